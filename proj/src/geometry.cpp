#include "magtomo/geometry.hpp"

#include <cmath>
#include <stdexcept>

#include "magtomo/errors.hpp"

namespace magtomo {

namespace {

// Deterministic interior sample set for realness/validation checks.
std::vector<Vec2> validation_points() {
  std::vector<Vec2> pts;
  const double golden = 2.39996322972865332;  // radians
  for (int k = 0; k < 40; ++k) {
    double r = std::sqrt((k + 0.5) / 40.0);
    double a = golden * k;
    pts.push_back({r * std::cos(a), r * std::sin(a)});
  }
  return pts;
}

void require_real_field(const ExprPtr& f, const char* what) {
  EvalScratch scratch;
  ExprTape tape = ExprTape::compile(f);
  for (const Vec2& p : validation_points()) {
    Complex v = tape.eval1(p.x, p.y, scratch);
    if (!std::isfinite(v.real()) || std::abs(v.imag()) > 1e-10) {
      throw ValidationError(std::string(what) + " must be real and finite on the disk");
    }
  }
}

}  // namespace

Surface Surface::from_expression(const std::string& phi_text, std::string description) {
  return from_expression(parse_expression(phi_text), std::move(description));
}

Surface Surface::from_expression(ExprPtr phi, std::string description) {
  require_real_field(phi, "conformal factor");
  Surface s;
  s.phi_ = phi;
  s.phi_x_ = diff(phi, 0);
  s.phi_y_ = diff(phi, 1);
  s.phi_xx_ = diff(s.phi_x_, 0);
  s.phi_xy_ = diff(s.phi_x_, 1);
  s.phi_yy_ = diff(s.phi_y_, 1);
  s.tape_ = ExprTape::compile({s.phi_, s.phi_x_, s.phi_y_});
  s.tape_hess_ = ExprTape::compile({s.phi_xx_, s.phi_xy_, s.phi_yy_});
  s.description_ = std::move(description);
  return s;
}

Surface Surface::flat() { return from_expression(make_const(0.0), "flat disk"); }

double Surface::phi(double x, double y) const { return eval_real(phi_, x, y); }

Vec2 Surface::grad_phi(double x, double y) const {
  return {eval_real(phi_x_, x, y), eval_real(phi_y_, x, y)};
}

std::array<double, 3> Surface::hess_phi(double x, double y) const {
  EvalScratch scratch;
  Complex out[3];
  tape_hess_.eval(x, y, out, scratch);
  return {out[0].real(), out[1].real(), out[2].real()};
}

double Surface::conformal_scale(double x, double y) const { return std::exp(phi(x, y)); }

double Surface::curvature(double x, double y) const {
  if (!in_closed_disk(x, y)) {
    throw std::domain_error("curvature requested outside the closed unit disk");
  }
  auto h = hess_phi(x, y);
  return -std::exp(-2.0 * phi(x, y)) * (h[0] + h[2]);
}

double Surface::metric_dot(double x, double y, Vec2 a, Vec2 b) const {
  return std::exp(2.0 * phi(x, y)) * (a.x * b.x + a.y * b.y);
}

double Surface::metric_norm(double x, double y, Vec2 a) const {
  return std::sqrt(metric_dot(x, y, a, a));
}

BoundaryFrame boundary_frame(const Surface& surface, double beta) {
  double cb = std::cos(beta), sb = std::sin(beta);
  double em = std::exp(-surface.phi(cb, sb));
  Vec2 grad = surface.grad_phi(cb, sb);
  double phi_r = cb * grad.x + sb * grad.y;

  BoundaryFrame f;
  f.point = {cb, sb};
  f.tangent = {-em * sb, em * cb};
  f.inward_normal = {-em * cb, -em * sb};
  // Geodesic curvature of the unit circle in the conformal metric.
  f.second_fundamental_form = em * (1.0 + phi_r);
  return f;
}

MagneticSystem::MagneticSystem(Surface surface, ExprPtr lambda, double max_flow_time)
    : surface_(std::move(surface)), lambda_(std::move(lambda)), max_flow_time_(max_flow_time) {
  if (max_flow_time_ <= 0.0) throw ValidationError("max_flow_time must be positive");
  require_real_field(lambda_, "magnetic intensity");
  lambda_x_ = diff(lambda_, 0);
  lambda_y_ = diff(lambda_, 1);
  flow_tape_ = ExprTape::compile(
      {surface_.phi_expr(), surface_.phi_x_expr(), surface_.phi_y_expr(), lambda_});
}

MagneticSystem MagneticSystem::from_expressions(const std::string& phi_text,
                                                const std::string& lambda_text,
                                                std::string description,
                                                double max_flow_time) {
  return MagneticSystem(Surface::from_expression(phi_text, std::move(description)),
                        parse_expression(lambda_text), max_flow_time);
}

double MagneticSystem::lambda(double x, double y) const { return eval_real(lambda_, x, y); }

Vec2 MagneticSystem::grad_lambda(double x, double y) const {
  return {eval_real(lambda_x_, x, y), eval_real(lambda_y_, x, y)};
}

MagneticSystem::FlowCoeffs MagneticSystem::flow_coeffs(double x, double y,
                                                       EvalScratch& scratch) const {
  Complex out[4];
  flow_tape_.eval(x, y, out, scratch);
  return {out[0].real(), out[1].real(), out[2].real(), out[3].real()};
}

ConvexityReport check_magnetic_convexity(const MagneticSystem& system, int n_samples) {
  if (n_samples < 8) throw std::invalid_argument("convexity check needs n_samples >= 8");
  const Surface& surf = system.surface();
  ConvexityReport report;
  report.min_margin = std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_samples; ++s) {
    double beta = 2.0 * M_PI * s / n_samples;
    BoundaryFrame f = boundary_frame(surf, beta);
    double lam = system.lambda(f.point.x, f.point.y);
    Vec2 nu_out{-f.inward_normal.x, -f.inward_normal.y};
    for (int dir = 0; dir < 2; ++dir) {
      Vec2 v = dir == 0 ? f.tangent : Vec2{-f.tangent.x, -f.tangent.y};
      // Magnetic forcing Y(v) = lambda * (v rotated +90 degrees).
      Vec2 yv{-lam * v.y, lam * v.x};
      double margin = f.second_fundamental_form -
                      surf.metric_dot(f.point.x, f.point.y, yv, nu_out);
      report.min_margin = std::min(report.min_margin, margin);
    }
  }
  report.pass = report.min_margin > 0.0;
  return report;
}

}  // namespace magtomo
