#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace magtomo {

using Complex = std::complex<double>;

// Scalar fields on the disk are closed-form expressions in x and y with
// exact symbolic derivatives.  The node set is deliberately small; powers
// with a non-constant exponent are rewritten as exp(b*log(a)) at parse time
// so that differentiation stays mechanical.
enum class ExprOp : std::uint8_t {
  Const, VarX, VarY,
  Add, Sub, Mul, Div, Neg,
  Sin, Cos, Exp, Log,
  Pow,   // constant exponent, stored in `value`
  Conj,
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  ExprOp op = ExprOp::Const;
  Complex value{0.0, 0.0};  // payload for Const; exponent for Pow
  bool int_exponent = false;
  ExprPtr a;
  ExprPtr b;
};

// Smart constructors; each performs constant folding and unit/zero
// simplification so derivative trees stay small.
ExprPtr make_const(Complex v);
ExprPtr make_const(double v);
ExprPtr var_x();
ExprPtr var_y();
ExprPtr add(ExprPtr a, ExprPtr b);
ExprPtr sub(ExprPtr a, ExprPtr b);
ExprPtr mul(ExprPtr a, ExprPtr b);
ExprPtr div_expr(ExprPtr a, ExprPtr b);
ExprPtr neg(ExprPtr a);
ExprPtr sin_expr(ExprPtr a);
ExprPtr cos_expr(ExprPtr a);
ExprPtr exp_expr(ExprPtr a);
ExprPtr log_expr(ExprPtr a);
ExprPtr pow_expr(ExprPtr a, Complex exponent);
ExprPtr conj_expr(ExprPtr a);

bool is_const(const ExprPtr& e);
bool is_const(const ExprPtr& e, Complex v);

Complex eval_expr(const Expr* e, double x, double y);
inline Complex eval_expr(const ExprPtr& e, double x, double y) {
  return eval_expr(e.get(), x, y);
}
inline double eval_real(const ExprPtr& e, double x, double y) {
  return eval_expr(e.get(), x, y).real();
}

// Exact partial derivative; var 0 = x, var 1 = y.
ExprPtr diff(const ExprPtr& e, int var);

struct ExprParseError : std::runtime_error {
  ExprParseError(const std::string& msg, std::size_t position_)
      : std::runtime_error(msg), position(position_) {}
  std::size_t position;
};

// Grammar: + - * / ^ with usual precedence, unary minus, parentheses,
// numbers, identifiers {x, y, i, pi}, functions {sin, cos, tan, exp, log,
// sqrt}.  Throws ExprParseError with the offending offset.
ExprPtr parse_expression(const std::string& text);

// Per-thread scratch space for tape evaluation.
struct EvalScratch {
  std::vector<Complex> regs;
};

// Flattened evaluation program for hot loops.  Shared subtrees are emitted
// once.  Evaluation is reentrant given a caller-owned scratch.
class ExprTape {
 public:
  ExprTape() = default;
  static ExprTape compile(const std::vector<ExprPtr>& outputs);
  static ExprTape compile(const ExprPtr& output);

  // out must have room for n_outputs() values.
  void eval(double x, double y, Complex* out, EvalScratch& scratch) const;
  Complex eval1(double x, double y, EvalScratch& scratch) const;
  int n_outputs() const { return static_cast<int>(outputs_.size()); }
  bool empty() const { return steps_.empty(); }

 private:
  struct Step {
    ExprOp op;
    std::int32_t a = -1;
    std::int32_t b = -1;
    Complex value{0.0, 0.0};
    bool int_exponent = false;
  };
  std::vector<Step> steps_;
  std::vector<std::int32_t> outputs_;
};

}  // namespace magtomo
