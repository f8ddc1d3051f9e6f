#pragma once

#include <array>
#include <memory>
#include <string>

#include "magtomo/expr.hpp"

namespace magtomo {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline bool in_closed_disk(double x, double y, double tol = 1e-12) {
  return x * x + y * y <= 1.0 + tol;
}

// Conformal metric e^{2 phi}(dx^2 + dy^2) on the closed unit disk.  The log
// factor phi is an expression with exact first and second derivatives, so
// curvature is available in closed form.
class Surface {
 public:
  static Surface from_expression(const std::string& phi_text, std::string description);
  static Surface from_expression(ExprPtr phi, std::string description);
  static Surface flat();

  double phi(double x, double y) const;
  Vec2 grad_phi(double x, double y) const;
  // xx, xy, yy
  std::array<double, 3> hess_phi(double x, double y) const;
  double conformal_scale(double x, double y) const;  // e^{phi}

  // Gaussian curvature -e^{-2 phi} (phi_xx + phi_yy).  Throws
  // std::domain_error outside the closed disk.
  double curvature(double x, double y) const;

  double metric_dot(double x, double y, Vec2 a, Vec2 b) const;
  double metric_norm(double x, double y, Vec2 a) const;

  const std::string& description() const { return description_; }
  const ExprPtr& phi_expr() const { return phi_; }
  const ExprPtr& phi_x_expr() const { return phi_x_; }
  const ExprPtr& phi_y_expr() const { return phi_y_; }

 private:
  Surface() = default;
  ExprPtr phi_, phi_x_, phi_y_, phi_xx_, phi_xy_, phi_yy_;
  ExprTape tape_;       // phi, phi_x, phi_y
  ExprTape tape_hess_;  // phi_xx, phi_xy, phi_yy
  std::string description_;
};

// Point of the inflow boundary S(dM): position angle beta on the unit
// circle, direction angle mu measured from the inward normal.  |mu| <= pi/2
// is exactly the inward-pointing half of the sphere bundle over dM.
struct BoundaryPoint {
  double beta = 0.0;
  double mu = 0.0;
};

struct BoundaryFrame {
  Vec2 point;
  Vec2 tangent;        // g-unit, counterclockwise
  Vec2 inward_normal;  // g-unit
  double second_fundamental_form = 0.0;
};

BoundaryFrame boundary_frame(const Surface& surface, double beta);

// Surface plus magnetic intensity lambda (signed curvature forcing).  The
// magnetic field two-form is lambda times the metric area form.
class MagneticSystem {
 public:
  MagneticSystem(Surface surface, ExprPtr lambda, double max_flow_time = 20.0);
  static MagneticSystem from_expressions(const std::string& phi_text,
                                         const std::string& lambda_text,
                                         std::string description,
                                         double max_flow_time = 20.0);

  const Surface& surface() const { return surface_; }
  double lambda(double x, double y) const;
  Vec2 grad_lambda(double x, double y) const;
  double max_flow_time() const { return max_flow_time_; }
  const ExprPtr& lambda_expr() const { return lambda_; }
  const ExprPtr& lambda_x_expr() const { return lambda_x_; }
  const ExprPtr& lambda_y_expr() const { return lambda_y_; }

  struct FlowCoeffs {
    double phi, phi_x, phi_y, lambda;
  };
  FlowCoeffs flow_coeffs(double x, double y, EvalScratch& scratch) const;

 private:
  Surface surface_;
  ExprPtr lambda_, lambda_x_, lambda_y_;
  ExprTape flow_tape_;  // phi, phi_x, phi_y, lambda
  double max_flow_time_;
};

struct ConvexityReport {
  double min_margin = 0.0;
  bool pass = false;
};

// Samples the boundary sphere bundle (both tangent directions) and checks
// that the second fundamental form strictly dominates the magnetic forcing
// component along the inward normal.
ConvexityReport check_magnetic_convexity(const MagneticSystem& system, int n_samples);

}  // namespace magtomo
