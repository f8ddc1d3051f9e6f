#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "magtomo/geometry.hpp"

namespace magtomo {

using MatrixC = Eigen::MatrixXcd;
using VectorC = Eigen::VectorXcd;

// Square matrix of expression entries with exact entrywise derivatives.
// Supports the symbolic algebra needed for gauge transforms and curvature.
class MatrixField {
 public:
  MatrixField() = default;
  MatrixField(int n, std::vector<ExprPtr> entries);  // row-major, n*n
  static MatrixField zero(int n);
  static MatrixField identity(int n);
  static MatrixField from_strings(const std::vector<std::vector<std::string>>& rows);

  int n() const { return n_; }
  const ExprPtr& entry(int r, int c) const { return entries_[r * n_ + c]; }

  void eval(double x, double y, MatrixC& out, EvalScratch& scratch) const;
  void eval_dx(double x, double y, MatrixC& out, EvalScratch& scratch) const;
  void eval_dy(double x, double y, MatrixC& out, EvalScratch& scratch) const;

  MatrixField derivative(int var) const;
  MatrixField conjugate_transpose() const;
  MatrixField scaled(const ExprPtr& s) const;
  static MatrixField commutator(const MatrixField& a, const MatrixField& b);

  // Max over a deterministic interior sample set.
  double skew_hermitian_defect() const;
  double unitarity_defect() const;
  double boundary_identity_defect() const;  // sup_{|p|=1} |Q(p) - Id|

  friend MatrixField operator+(const MatrixField& a, const MatrixField& b);
  friend MatrixField operator-(const MatrixField& a, const MatrixField& b);
  friend MatrixField operator*(const MatrixField& a, const MatrixField& b);

 private:
  void compile();
  int n_ = 0;
  std::vector<ExprPtr> entries_, dx_, dy_;
  ExprTape tape_, tape_dx_, tape_dy_;
};

// Unitary connection coefficients plus Higgs field, all skew-Hermitian
// matrix fields.  The connection pairs with a unit vector via the
// coordinate components: A(x, v) = A_x v^1 + A_y v^2.
class AttenuationPair {
 public:
  AttenuationPair() = default;
  AttenuationPair(MatrixField a_x, MatrixField a_y, MatrixField phi,
                  double skew_tol = 1e-12);
  static AttenuationPair zero(int n);

  int n() const { return n_; }
  const MatrixField& A_x() const { return a_x_; }
  const MatrixField& A_y() const { return a_y_; }
  const MatrixField& Phi() const { return phi_; }

  // A(x, v) + Phi at a phase point; out is n x n.
  void attenuation_at(const Surface& surface, double x, double y, double theta,
                      MatrixC& out, EvalScratch& scratch) const;

  double skew_hermitian_defect() const;

 private:
  int n_ = 0;
  MatrixField a_x_, a_y_, phi_;
};

// (Q^{-1} dQ + Q^{-1} A Q, Q^{-1} Phi Q).  Q must be unitary on the disk and
// the identity on the boundary circle (sup tolerances enforced).
AttenuationPair gauge_transform(const AttenuationPair& pair, const MatrixField& Q,
                                double boundary_tol = 1e-10);

// e^{-2 phi} (dA_y/dx - dA_x/dy + [A_x, A_y]); skew-Hermitian pointwise.
MatrixField star_curvature(const Surface& surface, const AttenuationPair& pair);

// Coordinate components of d Phi + [A, Phi].
struct CovariantHiggsDerivative {
  MatrixField sx, sy;
};
CovariantHiggsDerivative covariant_higgs_derivative(const AttenuationPair& pair);

// Finite fiber-mode expansion sum_k c_k(x, y) e^{i k theta} with C^n-valued
// expression coefficients.  This is the exact (symbolic) route for applying
// the frame operators; the grid module provides the independent discrete
// route.
class FiberExpansion {
 public:
  FiberExpansion() = default;
  explicit FiberExpansion(int n) : n_(n) {}
  static FiberExpansion scalar_mode(int k, ExprPtr coefficient);

  int n() const { return n_; }
  int degree() const;
  bool empty() const { return modes_.empty(); }
  const std::map<int, std::vector<ExprPtr>>& modes() const { return modes_; }
  const std::vector<ExprPtr>* mode(int k) const;
  void add_to_mode(int k, int component, const ExprPtr& e);
  void set_mode(int k, std::vector<ExprPtr> comps);

  VectorC eval(double x, double y, double theta, EvalScratch& scratch) const;
  void compile();

 private:
  int n_ = 1;
  std::map<int, std::vector<ExprPtr>> modes_;
  ExprTape tape_;
  std::vector<int> tape_modes_;
  bool compiled_ = false;
};

FiberExpansion fe_add(const FiberExpansion& a, const FiberExpansion& b);
FiberExpansion fe_scale(const ExprPtr& s, const FiberExpansion& a);
// Pointwise product of scalar expansions (mode convolution).
FiberExpansion fe_mul(const FiberExpansion& a, const FiberExpansion& b);

FiberExpansion apply_V_sym(const FiberExpansion& u);
FiberExpansion apply_X_sym(const Surface& surface, const FiberExpansion& u);
FiberExpansion apply_Xperp_sym(const Surface& surface, const FiberExpansion& u);
// X + lambda V
FiberExpansion apply_flow_sym(const MagneticSystem& system, const FiberExpansion& u);
// A(x, v) u + Phi u
FiberExpansion apply_attenuation_sym(const Surface& surface, const AttenuationPair& pair,
                                     const FiberExpansion& u);
// X + lambda V + A + Phi
FiberExpansion apply_transport_sym(const MagneticSystem& system, const AttenuationPair& pair,
                                   const FiberExpansion& u);

// Symmetric covariant tensor on the disk of the given order; comp[j] is the
// component with j indices equal to y (the rest x).
struct SymmetricTensor {
  int order = 0;
  std::vector<ExprPtr> comp;  // size order + 1
};

// Associated phase-space function f(x, v) = f_{i1..im} v^{i1} ... v^{im};
// fiber support in modes |k| <= order with parity of the order.
FiberExpansion tensor_to_sm_function(const Surface& surface, const SymmetricTensor& tensor);

// Symmetrized covariant derivative (conformal Christoffel symbols); raises
// the order by one.
SymmetricTensor symmetric_inner_derivative(const Surface& surface, const SymmetricTensor& h);

// F = Phi p, sigma = dp + A p for p vanishing on the boundary circle; the
// attached expansion is (x, v) -> F(x) + sigma_x(x) v^1 + sigma_y(x) v^2.
struct KernelElement {
  std::vector<ExprPtr> F;        // n components
  std::vector<ExprPtr> sigma_x;  // n components
  std::vector<ExprPtr> sigma_y;
  FiberExpansion as_function;
};

KernelElement make_kernel_element(const Surface& surface, const AttenuationPair& pair,
                                  const std::vector<ExprPtr>& p, double boundary_tol = 1e-10);

}  // namespace magtomo
