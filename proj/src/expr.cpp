#include "magtomo/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <unordered_map>

namespace magtomo {

namespace {

ExprPtr node(ExprOp op, Complex value, ExprPtr a, ExprPtr b, bool int_exp = false) {
  auto e = std::make_shared<Expr>();
  e->op = op;
  e->value = value;
  e->a = std::move(a);
  e->b = std::move(b);
  e->int_exponent = int_exp;
  return e;
}

Complex powi(Complex base, long k) {
  if (k == 0) return Complex(1.0, 0.0);
  bool invert = k < 0;
  unsigned long n = invert ? static_cast<unsigned long>(-k) : static_cast<unsigned long>(k);
  Complex acc(1.0, 0.0);
  Complex b = base;
  while (n) {
    if (n & 1) acc *= b;
    b *= b;
    n >>= 1;
  }
  return invert ? Complex(1.0, 0.0) / acc : acc;
}

}  // namespace

ExprPtr make_const(Complex v) { return node(ExprOp::Const, v, nullptr, nullptr); }
ExprPtr make_const(double v) { return make_const(Complex(v, 0.0)); }
ExprPtr var_x() {
  static const ExprPtr x = node(ExprOp::VarX, {}, nullptr, nullptr);
  return x;
}
ExprPtr var_y() {
  static const ExprPtr y = node(ExprOp::VarY, {}, nullptr, nullptr);
  return y;
}

bool is_const(const ExprPtr& e) { return e && e->op == ExprOp::Const; }
bool is_const(const ExprPtr& e, Complex v) { return is_const(e) && e->value == v; }

ExprPtr add(ExprPtr a, ExprPtr b) {
  if (is_const(a) && is_const(b)) return make_const(a->value + b->value);
  if (is_const(a, {0, 0})) return b;
  if (is_const(b, {0, 0})) return a;
  return node(ExprOp::Add, {}, std::move(a), std::move(b));
}

ExprPtr sub(ExprPtr a, ExprPtr b) {
  if (is_const(a) && is_const(b)) return make_const(a->value - b->value);
  if (is_const(b, {0, 0})) return a;
  if (a.get() == b.get()) return make_const(0.0);
  if (is_const(a, {0, 0})) return neg(std::move(b));
  return node(ExprOp::Sub, {}, std::move(a), std::move(b));
}

ExprPtr mul(ExprPtr a, ExprPtr b) {
  if (is_const(a) && is_const(b)) return make_const(a->value * b->value);
  if (is_const(a, {0, 0}) || is_const(b, {0, 0})) return make_const(0.0);
  if (is_const(a, {1, 0})) return b;
  if (is_const(b, {1, 0})) return a;
  return node(ExprOp::Mul, {}, std::move(a), std::move(b));
}

ExprPtr div_expr(ExprPtr a, ExprPtr b) {
  if (is_const(a) && is_const(b)) return make_const(a->value / b->value);
  if (is_const(a, {0, 0})) return make_const(0.0);
  if (is_const(b, {1, 0})) return a;
  return node(ExprOp::Div, {}, std::move(a), std::move(b));
}

ExprPtr neg(ExprPtr a) {
  if (is_const(a)) return make_const(-a->value);
  if (a->op == ExprOp::Neg) return a->a;
  return node(ExprOp::Neg, {}, std::move(a), nullptr);
}

ExprPtr sin_expr(ExprPtr a) {
  if (is_const(a)) return make_const(std::sin(a->value));
  return node(ExprOp::Sin, {}, std::move(a), nullptr);
}

ExprPtr cos_expr(ExprPtr a) {
  if (is_const(a)) return make_const(std::cos(a->value));
  return node(ExprOp::Cos, {}, std::move(a), nullptr);
}

ExprPtr exp_expr(ExprPtr a) {
  if (is_const(a)) return make_const(std::exp(a->value));
  return node(ExprOp::Exp, {}, std::move(a), nullptr);
}

ExprPtr log_expr(ExprPtr a) {
  if (is_const(a)) return make_const(std::log(a->value));
  return node(ExprOp::Log, {}, std::move(a), nullptr);
}

ExprPtr pow_expr(ExprPtr a, Complex exponent) {
  bool int_exp = exponent.imag() == 0.0 && exponent.real() == std::floor(exponent.real()) &&
                 std::abs(exponent.real()) <= 64.0;
  if (exponent == Complex(0.0, 0.0)) return make_const(1.0);
  if (exponent == Complex(1.0, 0.0)) return a;
  if (is_const(a)) {
    if (int_exp) return make_const(powi(a->value, static_cast<long>(exponent.real())));
    return make_const(std::pow(a->value, exponent));
  }
  return node(ExprOp::Pow, exponent, std::move(a), nullptr, int_exp);
}

ExprPtr conj_expr(ExprPtr a) {
  if (is_const(a)) return make_const(std::conj(a->value));
  if (a->op == ExprOp::Conj) return a->a;
  return node(ExprOp::Conj, {}, std::move(a), nullptr);
}

Complex eval_expr(const Expr* e, double x, double y) {
  switch (e->op) {
    case ExprOp::Const: return e->value;
    case ExprOp::VarX: return Complex(x, 0.0);
    case ExprOp::VarY: return Complex(y, 0.0);
    case ExprOp::Add: return eval_expr(e->a.get(), x, y) + eval_expr(e->b.get(), x, y);
    case ExprOp::Sub: return eval_expr(e->a.get(), x, y) - eval_expr(e->b.get(), x, y);
    case ExprOp::Mul: return eval_expr(e->a.get(), x, y) * eval_expr(e->b.get(), x, y);
    case ExprOp::Div: return eval_expr(e->a.get(), x, y) / eval_expr(e->b.get(), x, y);
    case ExprOp::Neg: return -eval_expr(e->a.get(), x, y);
    case ExprOp::Sin: return std::sin(eval_expr(e->a.get(), x, y));
    case ExprOp::Cos: return std::cos(eval_expr(e->a.get(), x, y));
    case ExprOp::Exp: return std::exp(eval_expr(e->a.get(), x, y));
    case ExprOp::Log: return std::log(eval_expr(e->a.get(), x, y));
    case ExprOp::Pow: {
      Complex base = eval_expr(e->a.get(), x, y);
      if (e->int_exponent) return powi(base, static_cast<long>(e->value.real()));
      return std::pow(base, e->value);
    }
    case ExprOp::Conj: return std::conj(eval_expr(e->a.get(), x, y));
  }
  return {};
}

ExprPtr diff(const ExprPtr& e, int var) {
  switch (e->op) {
    case ExprOp::Const: return make_const(0.0);
    case ExprOp::VarX: return make_const(var == 0 ? 1.0 : 0.0);
    case ExprOp::VarY: return make_const(var == 1 ? 1.0 : 0.0);
    case ExprOp::Add: return add(diff(e->a, var), diff(e->b, var));
    case ExprOp::Sub: return sub(diff(e->a, var), diff(e->b, var));
    case ExprOp::Mul: return add(mul(diff(e->a, var), e->b), mul(e->a, diff(e->b, var)));
    case ExprOp::Div:
      return div_expr(sub(mul(diff(e->a, var), e->b), mul(e->a, diff(e->b, var))),
                      mul(e->b, e->b));
    case ExprOp::Neg: return neg(diff(e->a, var));
    case ExprOp::Sin: return mul(cos_expr(e->a), diff(e->a, var));
    case ExprOp::Cos: return neg(mul(sin_expr(e->a), diff(e->a, var)));
    case ExprOp::Exp: return mul(exp_expr(e->a), diff(e->a, var));
    case ExprOp::Log: return div_expr(diff(e->a, var), e->a);
    case ExprOp::Pow:
      return mul(mul(make_const(e->value), pow_expr(e->a, e->value - Complex(1.0, 0.0))),
                 diff(e->a, var));
    case ExprOp::Conj: return conj_expr(diff(e->a, var));
  }
  return make_const(0.0);
}

// ---------------------------------------------------------------------------
// Parser

namespace {

struct Parser {
  const std::string& s;
  std::size_t pos = 0;

  explicit Parser(const std::string& text) : s(text) {}

  [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
    throw ExprParseError(msg + " at offset " + std::to_string(at) + " in '" + s + "'", at);
  }

  void skip_ws() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }

  bool eat(char c) {
    skip_ws();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  ExprPtr parse() {
    ExprPtr e = additive();
    skip_ws();
    if (pos != s.size()) fail("unexpected trailing input", pos);
    return e;
  }

  ExprPtr additive() {
    ExprPtr e = term();
    for (;;) {
      if (eat('+')) {
        e = add(e, term());
      } else if (eat('-')) {
        e = sub(e, term());
      } else {
        return e;
      }
    }
  }

  ExprPtr term() {
    ExprPtr e = unary();
    for (;;) {
      if (eat('*')) {
        e = mul(e, unary());
      } else if (eat('/')) {
        e = div_expr(e, unary());
      } else {
        return e;
      }
    }
  }

  ExprPtr unary() {
    skip_ws();
    if (eat('-')) return neg(unary());
    if (eat('+')) return unary();
    return power();
  }

  ExprPtr power() {
    ExprPtr base = primary();
    skip_ws();
    if (eat('^')) {
      ExprPtr expo = unary();  // right-associative, allows -1 exponents
      if (is_const(expo)) return pow_expr(base, expo->value);
      // General exponent: rewrite so the derivative rules stay closed.
      return exp_expr(mul(expo, log_expr(base)));
    }
    return base;
  }

  ExprPtr primary() {
    skip_ws();
    if (pos >= s.size()) fail("unexpected end of expression", pos);
    char c = s[pos];
    if (c == '(') {
      ++pos;
      ExprPtr e = additive();
      if (!eat(')')) fail("missing ')'", pos);
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s.c_str() + pos;
      char* end = nullptr;
      double v = std::strtod(begin, &end);
      if (end == begin) fail("malformed number", pos);
      pos += static_cast<std::size_t>(end - begin);
      return make_const(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos;
      while (pos < s.size() &&
             (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) {
        ++pos;
      }
      std::string name = s.substr(start, pos - start);
      if (name == "x") return var_x();
      if (name == "y") return var_y();
      if (name == "i") return make_const(Complex(0.0, 1.0));
      if (name == "pi") return make_const(3.14159265358979323846);
      // function call
      skip_ws();
      if (pos >= s.size() || s[pos] != '(') fail("unknown identifier '" + name + "'", start);
      ++pos;
      ExprPtr arg = additive();
      if (!eat(')')) fail("missing ')' after " + name, pos);
      if (name == "sin") return sin_expr(arg);
      if (name == "cos") return cos_expr(arg);
      if (name == "tan") return div_expr(sin_expr(arg), cos_expr(arg));
      if (name == "exp") return exp_expr(arg);
      if (name == "log") return log_expr(arg);
      if (name == "sqrt") return pow_expr(arg, Complex(0.5, 0.0));
      fail("unknown function '" + name + "'", start);
    }
    fail(std::string("unexpected character '") + c + "'", pos);
  }
};

}  // namespace

ExprPtr parse_expression(const std::string& text) {
  Parser p(text);
  return p.parse();
}

// ---------------------------------------------------------------------------
// Tape

ExprTape ExprTape::compile(const std::vector<ExprPtr>& outputs) {
  ExprTape tape;
  std::unordered_map<const Expr*, std::int32_t> seen;

  // Post-order emit with explicit stack; shared subtrees emitted once.
  struct Frame {
    const Expr* e;
    bool expanded;
  };
  auto emit = [&](const Expr* root) -> std::int32_t {
    std::vector<Frame> stack{{root, false}};
    while (!stack.empty()) {
      Frame f = stack.back();
      stack.pop_back();
      if (seen.count(f.e)) continue;
      if (!f.expanded) {
        stack.push_back({f.e, true});
        if (f.e->b) stack.push_back({f.e->b.get(), false});
        if (f.e->a) stack.push_back({f.e->a.get(), false});
      } else {
        Step st;
        st.op = f.e->op;
        st.value = f.e->value;
        st.int_exponent = f.e->int_exponent;
        st.a = f.e->a ? seen.at(f.e->a.get()) : -1;
        st.b = f.e->b ? seen.at(f.e->b.get()) : -1;
        seen[f.e] = static_cast<std::int32_t>(tape.steps_.size());
        tape.steps_.push_back(st);
      }
    }
    return seen.at(root);
  };

  for (const auto& out : outputs) {
    tape.outputs_.push_back(emit(out.get()));
  }
  return tape;
}

ExprTape ExprTape::compile(const ExprPtr& output) {
  return compile(std::vector<ExprPtr>{output});
}

void ExprTape::eval(double x, double y, Complex* out, EvalScratch& scratch) const {
  auto& r = scratch.regs;
  if (r.size() < steps_.size()) r.resize(steps_.size());
  const std::size_t n = steps_.size();
  for (std::size_t idx = 0; idx < n; ++idx) {
    const Step& st = steps_[idx];
    switch (st.op) {
      case ExprOp::Const: r[idx] = st.value; break;
      case ExprOp::VarX: r[idx] = Complex(x, 0.0); break;
      case ExprOp::VarY: r[idx] = Complex(y, 0.0); break;
      case ExprOp::Add: r[idx] = r[st.a] + r[st.b]; break;
      case ExprOp::Sub: r[idx] = r[st.a] - r[st.b]; break;
      case ExprOp::Mul: r[idx] = r[st.a] * r[st.b]; break;
      case ExprOp::Div: r[idx] = r[st.a] / r[st.b]; break;
      case ExprOp::Neg: r[idx] = -r[st.a]; break;
      case ExprOp::Sin: r[idx] = std::sin(r[st.a]); break;
      case ExprOp::Cos: r[idx] = std::cos(r[st.a]); break;
      case ExprOp::Exp: r[idx] = std::exp(r[st.a]); break;
      case ExprOp::Log: r[idx] = std::log(r[st.a]); break;
      case ExprOp::Pow:
        r[idx] = st.int_exponent ? powi(r[st.a], static_cast<long>(st.value.real()))
                                 : std::pow(r[st.a], st.value);
        break;
      case ExprOp::Conj: r[idx] = std::conj(r[st.a]); break;
    }
  }
  for (std::size_t k = 0; k < outputs_.size(); ++k) out[k] = r[outputs_[k]];
}

Complex ExprTape::eval1(double x, double y, EvalScratch& scratch) const {
  Complex v;
  eval(x, y, &v, scratch);
  return v;
}

}  // namespace magtomo
