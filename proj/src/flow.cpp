#include "magtomo/flow.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "magtomo/errors.hpp"
#include "magtomo/joint_rk4.hpp"

namespace magtomo {

void flow_rhs(const MagneticSystem& system, const double state[3], EvalScratch& scratch,
              double out[3]) {
  auto c = system.flow_coeffs(state[0], state[1], scratch);
  double em = std::exp(-c.phi);
  double ct = std::cos(state[2]), st = std::sin(state[2]);
  out[0] = em * ct;
  out[1] = em * st;
  out[2] = em * (-c.phi_x * st + c.phi_y * ct) + c.lambda;
}

namespace {

double radius2(const double s[3]) { return s[0] * s[0] + s[1] * s[1]; }

void rk4_step(const MagneticSystem& system, const double in[3], double h, EvalScratch& scratch,
              double out[3]) {
  double k1[3], k2[3], k3[3], k4[3], tmp[3];
  flow_rhs(system, in, scratch, k1);
  for (int d = 0; d < 3; ++d) tmp[d] = in[d] + 0.5 * h * k1[d];
  flow_rhs(system, tmp, scratch, k2);
  for (int d = 0; d < 3; ++d) tmp[d] = in[d] + 0.5 * h * k2[d];
  flow_rhs(system, tmp, scratch, k3);
  for (int d = 0; d < 3; ++d) tmp[d] = in[d] + h * k3[d];
  flow_rhs(system, tmp, scratch, k4);
  for (int d = 0; d < 3; ++d) {
    out[d] = in[d] + h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
  }
}

// Crossing time of the boundary circle within (0, h_max] from an inside
// state, refined to tol in t by bisection on single RK4 steps.
double refine_crossing(const MagneticSystem& system, const double inside[3], double h_max,
                       double tol, EvalScratch& scratch, double out_state[3]) {
  double lo = 0.0, hi = h_max;
  double probe[3];
  rk4_step(system, inside, hi, scratch, probe);
  // Widen if the nominal step does not cross (possible after endpoint jitter).
  int guard = 0;
  while (radius2(probe) <= 1.0 && guard++ < 60) {
    lo = hi;
    hi *= 1.5;
    rk4_step(system, inside, hi, scratch, probe);
  }
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    rk4_step(system, inside, mid, scratch, probe);
    if (radius2(probe) > 1.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  double t_star = 0.5 * (lo + hi);
  rk4_step(system, inside, t_star, scratch, out_state);
  return t_star;
}

// First pass: march with the requested step until the trajectory leaves the
// disk, and return the refined exit time.
double estimate_exit_time(const MagneticSystem& system, const double start[3],
                          const TraceOptions& opts, EvalScratch& scratch) {
  double s[3] = {start[0], start[1], start[2]};
  double t = 0.0;
  double next[3];
  while (t < system.max_flow_time()) {
    double h = std::min(opts.dt, system.max_flow_time() - t);
    rk4_step(system, s, h, scratch, next);
    if (radius2(next) > 1.0) {
      double out[3];
      return t + refine_crossing(system, s, h, opts.boundary_tol, scratch, out);
    }
    for (int d = 0; d < 3; ++d) s[d] = next[d];
    t += h;
  }
  throw TrappedGeodesicError("geodesic did not exit within max_flow_time; system rejected as non-simple");
}

}  // namespace

PhasePoint boundary_phase_point(const BoundaryPoint& bp) {
  // Direction mu away from the inward normal: heading pi + beta - mu.
  return {std::cos(bp.beta), std::sin(bp.beta), M_PI + bp.beta - bp.mu};
}

GeodesicTrace integrate_geodesic(const MagneticSystem& system, const PhasePoint& start,
                                 const TraceOptions& opts) {
  // Loose tolerance so exit states of earlier traces are valid starts.
  if (!in_closed_disk(start.x, start.y, 1e-9)) {
    throw std::domain_error("geodesic start point outside the closed unit disk");
  }
  EvalScratch scratch;
  double s0[3] = {start.x, start.y, start.theta};
  double tau = estimate_exit_time(system, s0, opts, scratch);

  // Re-integrate with a uniform step that lands on the exit time, then
  // polish the endpoint back onto the circle.
  long m = std::max<long>(opts.min_samples, static_cast<long>(std::ceil(tau / opts.dt - 1e-12)));
  m = std::max<long>(m, 2);
  double h = tau / static_cast<double>(m);

  GeodesicTrace trace;
  trace.step = h;
  trace.samples.reserve(m + 1);
  double s[3] = {s0[0], s0[1], s0[2]};
  trace.samples.push_back({0.0, {s[0], s[1], s[2]}});
  double next[3];
  for (long i = 0; i < m; ++i) {
    rk4_step(system, s, h, scratch, next);
    bool last = (i == m - 1);
    if (!last && radius2(next) > 1.0 + 1e-13) {
      // Early crossing (grazing or jittered trajectory): close here.
      double out[3];
      double dt_star = refine_crossing(system, s, h, opts.boundary_tol, scratch, out);
      trace.samples.push_back({i * h + dt_star, {out[0], out[1], out[2]}});
      trace.exit_time = i * h + dt_star;
      trace.exited = true;
      return trace;
    }
    for (int d = 0; d < 3; ++d) s[d] = next[d];
    if (!last) trace.samples.push_back({(i + 1) * h, {s[0], s[1], s[2]}});
  }
  // Final closure from the second-to-last sample.
  const TraceSample& prev = trace.samples.back();
  double pstate[3] = {prev.state.x, prev.state.y, prev.state.theta};
  double out[3];
  double dt_star = refine_crossing(system, pstate, h, opts.boundary_tol, scratch, out);
  trace.samples.push_back({prev.t + dt_star, {out[0], out[1], out[2]}});
  trace.exit_time = trace.samples.back().t;
  trace.exited = true;
  return trace;
}

GeodesicTrace integrate_geodesic(const MagneticSystem& system, const PhasePoint& start,
                                 double dt) {
  TraceOptions opts;
  opts.dt = dt;
  return integrate_geodesic(system, start, opts);
}

double exit_time(const MagneticSystem& system, const PhasePoint& start,
                 const TraceOptions& opts) {
  if (!in_closed_disk(start.x, start.y, 1e-9)) {
    throw std::domain_error("geodesic start point outside the closed unit disk");
  }
  EvalScratch scratch;
  double s0[3] = {start.x, start.y, start.theta};
  return estimate_exit_time(system, s0, opts, scratch);
}

ScatterPoint scattering_relation(const MagneticSystem& system, const BoundaryPoint& entry,
                                 const TraceOptions& opts) {
  GeodesicTrace trace = integrate_geodesic(system, boundary_phase_point(entry), opts);
  const PhasePoint& exit = trace.samples.back().state;
  ScatterPoint sp;
  sp.entry = entry;
  sp.tau = trace.exit_time;
  sp.beta_out = std::atan2(exit.y, exit.x);
  double mu = exit.theta - sp.beta_out;
  mu = std::remainder(mu, 2.0 * M_PI);
  sp.mu_out = mu;
  return sp;
}

std::vector<BoundaryPoint> make_entry_fan(int fan_size, double mu_max_margin) {
  const double golden = 0.6180339887498949;
  const double mu_max = M_PI / 2.0 - mu_max_margin;
  std::vector<BoundaryPoint> fan;
  fan.reserve(fan_size);
  for (int k = 0; k < fan_size; ++k) {
    double beta = 2.0 * M_PI * k / fan_size;
    double frac = std::fmod(k * golden, 1.0);
    fan.push_back({beta, mu_max * (2.0 * frac - 1.0)});
  }
  return fan;
}

double jacobi_coefficient(const MagneticSystem& system, const PhasePoint& p) {
  const Surface& surf = system.surface();
  double phi = surf.phi(p.x, p.y);
  auto h = surf.hess_phi(p.x, p.y);
  double K = -std::exp(-2.0 * phi) * (h[0] + h[2]);
  Vec2 gl = system.grad_lambda(p.x, p.y);
  double xperp_lambda =
      std::exp(-phi) * (std::sin(p.theta) * gl.x - std::cos(p.theta) * gl.y);
  double lam = system.lambda(p.x, p.y);
  return K + xperp_lambda + lam * lam;
}

JacobiSolution solve_jacobi(const MagneticSystem& system, const GeodesicTrace& trace,
                            double y0, double ydot0) {
  if (!trace.exited) throw std::invalid_argument("Jacobi solve requires an exited trace");
  Eigen::Vector3d init(y0, ydot0, 0.0);
  auto states = integrate_along(
      system, trace, init,
      [&](const PhasePoint& p, const Eigen::Vector3d& e, Eigen::Vector3d& de) {
        double a = jacobi_coefficient(system, p);
        double lam = system.lambda(p.x, p.y);
        de(0) = e(1);
        de(1) = -a * e(0);
        de(2) = lam * e(0);
      });
  JacobiSolution sol;
  sol.t.reserve(states.size());
  for (const auto& s : trace.samples) sol.t.push_back(s.t);
  sol.y.reserve(states.size());
  sol.ydot.reserve(states.size());
  sol.x_comp.reserve(states.size());
  for (const auto& e : states) {
    sol.y.push_back(e(0));
    sol.ydot.push_back(e(1));
    sol.x_comp.push_back(e(2));
  }
  return sol;
}

namespace {

// 4th-order first derivative of uniformly sampled data.
std::vector<double> differentiate_samples(const std::vector<double>& f, double h) {
  const std::size_t n = f.size();
  std::vector<double> d(n, 0.0);
  if (n < 5) return d;
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= 2 && i + 2 < n) {
      d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
    } else if (i == 0) {
      d[i] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h);
    } else if (i == 1) {
      d[i] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h);
    } else if (i + 2 == n) {
      d[i] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) /
             (12.0 * h);
    } else {
      d[i] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] +
              3.0 * f[n - 5]) /
             (12.0 * h);
    }
  }
  return d;
}

}  // namespace

RiccatiSolution solve_riccati(const MagneticSystem& system, const GeodesicTrace& trace) {
  JacobiSolution yb = solve_jacobi(system, trace, 0.0, 1.0);
  JacobiSolution wb = solve_jacobi(system, trace, 1.0, 0.0);
  const std::size_t n = yb.y.size();

  double c = 0.0;
  std::vector<double> z(n), zdot(n);
  bool found = false;
  for (int k = 0; k <= 20 && !found; ++k) {
    c = std::pow(2.0, k);
    found = true;
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = c * yb.y[i] + wb.y[i];
      zdot[i] = c * yb.ydot[i] + wb.ydot[i];
      if (z[i] <= 0.0) {
        found = false;
        break;
      }
    }
  }
  if (!found) {
    throw ConjugatePointError("no constant in the sweep keeps the Jacobi combination nonvanishing");
  }

  RiccatiSolution sol;
  sol.t = yb.t;
  sol.c = c;
  sol.z = z;
  sol.u.resize(n);
  for (std::size_t i = 0; i < n; ++i) sol.u[i] = zdot[i] / z[i];

  std::vector<double> du = differentiate_samples(sol.u, trace.step);
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {  // final closure sample excluded from the sup
    double a = jacobi_coefficient(system, trace.samples[i].state);
    worst = std::max(worst, std::abs(du[i] + sol.u[i] * sol.u[i] + a));
  }
  sol.max_residual = worst;
  return sol;
}

ConjugateReport check_no_conjugate_points(const MagneticSystem& system, int n_fan,
                                          const TraceOptions& opts) {
  if (n_fan < 16) throw std::invalid_argument("conjugate-point check needs n_fan >= 16");
  ConjugateReport report;
  report.min_y = std::numeric_limits<double>::infinity();
  for (const BoundaryPoint& bp : make_entry_fan(n_fan)) {
    GeodesicTrace trace = integrate_geodesic(system, boundary_phase_point(bp), opts);
    JacobiSolution jac = solve_jacobi(system, trace, 0.0, 1.0);
    for (std::size_t i = 0; i < jac.y.size(); ++i) {
      if (jac.t[i] < 1e-3) continue;
      report.min_y = std::min(report.min_y, jac.y[i]);
    }
  }
  report.pass = report.min_y > 0.0;
  return report;
}

SystemValidation validate_system(const MagneticSystem& system, int n_samples, int n_fan) {
  SystemValidation v;
  v.convexity = check_magnetic_convexity(system, n_samples);
  if (!v.convexity.pass) {
    v.pass = false;
    return v;
  }
  v.conjugate = check_no_conjugate_points(system, n_fan);
  v.pass = v.conjugate.pass;
  return v;
}

}  // namespace magtomo
