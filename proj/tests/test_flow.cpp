#include <doctest.h>

#include <cmath>

#include "magtomo/errors.hpp"
#include "magtomo/flow.hpp"

using namespace magtomo;

TEST_SUITE_BEGIN("flow");

namespace {

MagneticSystem flat_system(double lam) {
  return MagneticSystem::from_expressions("0", std::to_string(lam), "flat");
}

TraceOptions quick() {
  TraceOptions o;
  o.dt = 1e-3;
  o.min_samples = 256;
  return o;
}

// Exit time of the circular arc of curvature lam started at the disk center:
// |pos(t)| = (2/lam) sin(lam t / 2).
double arc_exit_time(double lam) { return (2.0 / lam) * std::asin(lam / 2.0); }

}  // namespace

TEST_CASE("straight ray from the center exits at time one") {
  MagneticSystem sys = flat_system(0.0);
  for (double th : {0.0, 0.8, 2.5}) {
    GeodesicTrace tr = integrate_geodesic(sys, {0.0, 0.0, th}, quick());
    CHECK(tr.exited);
    CHECK(std::abs(tr.exit_time - 1.0) < 1e-9);
  }
}

TEST_CASE("magnetic arc exit time matches the circle oracle") {
  MagneticSystem sys = flat_system(0.5);
  GeodesicTrace tr = integrate_geodesic(sys, {0.0, 0.0, 0.0}, quick());
  double expected = arc_exit_time(0.5);  // 4 asin(1/4) = 1.0107219...
  CHECK(std::abs(tr.exit_time - expected) < 1e-8);
  // The trajectory is a circle of radius 2 through the origin.
  for (std::size_t i = 0; i < tr.samples.size(); i += 50) {
    const auto& s = tr.samples[i];
    double r = std::hypot(s.state.x, s.state.y);
    CHECK(std::abs(r - 4.0 * std::sin(s.t / 4.0)) < 1e-8);
  }
}

TEST_CASE("boundary start along a diameter exits at time two") {
  MagneticSystem sys = flat_system(0.0);
  GeodesicTrace tr = integrate_geodesic(sys, {1.0, 0.0, M_PI}, quick());
  CHECK(std::abs(tr.exit_time - 2.0) < 1e-9);
}

TEST_CASE("chord exit time oracle") {
  MagneticSystem sys = flat_system(0.0);
  TraceOptions o = quick();
  CHECK(std::abs(exit_time(sys, {0.5, 0.0, M_PI / 2}, o) - std::sqrt(0.75)) < 1e-9);
  CHECK(std::abs(exit_time(sys, {0.0, 0.0, 1.1}, o) - 1.0) < 1e-9);
  MagneticSystem arc = flat_system(0.5);
  CHECK(std::abs(exit_time(arc, {0.0, 0.0, 0.0}, o) - arc_exit_time(0.5)) < 1e-8);
}

TEST_CASE("trace samples are uniform and land on the boundary") {
  MagneticSystem sys = flat_system(0.3);
  GeodesicTrace tr = integrate_geodesic(sys, {0.1, -0.2, 0.7}, quick());
  REQUIRE(tr.samples.size() >= 257);
  for (std::size_t i = 1; i < tr.samples.size(); ++i) {
    CHECK(tr.samples[i].t > tr.samples[i - 1].t);
  }
  double h = tr.samples[1].t - tr.samples[0].t;
  for (std::size_t i = 2; i + 1 < tr.samples.size(); ++i) {
    CHECK(std::abs((tr.samples[i].t - tr.samples[i - 1].t) - h) < 1e-12);
  }
  const auto& last = tr.samples.back().state;
  CHECK(std::abs(std::hypot(last.x, last.y) - 1.0) < 1e-9);
}

TEST_CASE("g-speed of the sampled positions is one") {
  MagneticSystem sys = MagneticSystem::from_expressions("0.2*(1-x^2-y^2)", "0.3", "curved");
  GeodesicTrace tr = integrate_geodesic(sys, {0.0, 0.1, 0.4}, quick());
  double h = tr.step;
  double worst = 0.0;
  for (std::size_t i = 2; i + 2 < tr.samples.size(); ++i) {
    auto pos = [&](std::size_t k, int c) {
      return c == 0 ? tr.samples[k].state.x : tr.samples[k].state.y;
    };
    Vec2 vel{(pos(i - 2, 0) - 8 * pos(i - 1, 0) + 8 * pos(i + 1, 0) - pos(i + 2, 0)) / (12 * h),
             (pos(i - 2, 1) - 8 * pos(i - 1, 1) + 8 * pos(i + 1, 1) - pos(i + 2, 1)) / (12 * h)};
    double speed =
        sys.surface().metric_norm(tr.samples[i].state.x, tr.samples[i].state.y, vel);
    worst = std::max(worst, std::abs(speed - 1.0));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("trapped orbits raise an error") {
  // lam = 4 from (0.5, 0): the orbit circle has radius 1/4 around
  // (0.5, 0.25) and stays strictly inside the disk.
  MagneticSystem sys = MagneticSystem::from_expressions("0", "4", "strong", 10.0);
  CHECK_THROWS_AS(integrate_geodesic(sys, {0.5, 0.0, 0.0}, quick()), TrappedGeodesicError);
}

TEST_CASE("scattering relation on flat diameters and chords") {
  MagneticSystem sys = flat_system(0.0);
  ScatterPoint d = scattering_relation(sys, {0.0, 0.0}, quick());
  CHECK(std::abs(std::remainder(d.beta_out - M_PI, 2 * M_PI)) < 1e-9);
  CHECK(std::abs(d.mu_out) < 1e-9);
  CHECK(std::abs(d.tau - 2.0) < 1e-9);

  double mu = M_PI / 4;
  ScatterPoint c = scattering_relation(sys, {0.0, mu}, quick());
  CHECK(std::abs(std::remainder(c.beta_out - (M_PI - 2 * mu), 2 * M_PI)) < 1e-8);
  CHECK(std::abs(c.mu_out - mu) < 1e-8);
  CHECK(std::abs(c.tau - 2 * std::cos(mu)) < 1e-8);
}

TEST_CASE("magnetic scattering matches the closed-form arc") {
  double lam = 0.3;
  MagneticSystem sys = flat_system(lam);
  ScatterPoint s = scattering_relation(sys, {0.0, 0.0}, quick());
  // Arc of radius R = 1/lam from (1,0) heading pi; exit where |pos| = 1.
  double R = 1.0 / lam;
  auto pos = [&](double t) {
    double psi = M_PI + lam * t;
    return Vec2{1.0 + R * (std::sin(psi) - std::sin(M_PI)), R * (-std::cos(psi) + std::cos(M_PI))};
  };
  // Bisection on the closed form, independent of the integrator.
  double lo = 0.5, hi = 2.0 * M_PI * R - 1e-6;
  auto inside = [&](double t) {
    Vec2 p = pos(t);
    return p.x * p.x + p.y * p.y < 1.0;
  };
  REQUIRE(inside(lo));
  while (hi - lo > 1e-12) {
    double mid = 0.5 * (lo + hi);
    (inside(mid) ? lo : hi) = mid;
  }
  double tau_oracle = 0.5 * (lo + hi);
  CHECK(std::abs(s.tau - tau_oracle) < 1e-7);
  Vec2 p = pos(tau_oracle);
  CHECK(std::abs(std::remainder(s.beta_out - std::atan2(p.y, p.x), 2 * M_PI)) < 1e-7);
}

TEST_CASE("direction reversal retraces only without magnetic forcing") {
  TraceOptions o = quick();
  PhasePoint entry = boundary_phase_point({0.7, 0.4});

  MagneticSystem plain = flat_system(0.0);
  GeodesicTrace fwd = integrate_geodesic(plain, entry, o);
  PhasePoint exit = fwd.samples.back().state;
  GeodesicTrace back =
      integrate_geodesic(plain, {exit.x, exit.y, exit.theta + M_PI}, o);
  PhasePoint ret = back.samples.back().state;
  CHECK(std::hypot(ret.x - entry.x, ret.y - entry.y) < 1e-7);

  MagneticSystem mag = flat_system(0.5);
  GeodesicTrace fwd2 = integrate_geodesic(mag, entry, o);
  PhasePoint exit2 = fwd2.samples.back().state;
  GeodesicTrace back2 =
      integrate_geodesic(mag, {exit2.x, exit2.y, exit2.theta + M_PI}, o);
  PhasePoint ret2 = back2.samples.back().state;
  CHECK(std::hypot(ret2.x - entry.x, ret2.y - entry.y) > 1e-2);
}

TEST_CASE("flat Jacobi data is linear") {
  MagneticSystem sys = flat_system(0.0);
  GeodesicTrace tr = integrate_geodesic(sys, {0.0, 0.0, 0.0}, quick());
  JacobiSolution j = solve_jacobi(sys, tr, 0.0, 1.0);
  for (std::size_t i = 0; i < j.t.size(); i += 40) {
    CHECK(std::abs(j.y[i] - j.t[i]) < 1e-10);
  }
}

TEST_CASE("constant-curvature Jacobi data is sinusoidal") {
  MagneticSystem round =
      MagneticSystem::from_expressions("log(2/(1+x^2+y^2))", "0", "round");
  GeodesicTrace tr = integrate_geodesic(round, {0.0, 0.0, 0.3}, quick());
  JacobiSolution j = solve_jacobi(round, tr, 0.0, 1.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < j.t.size(); ++i) {
    worst = std::max(worst, std::abs(j.y[i] - std::sin(j.t[i])));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("constant-forcing Jacobi data uses the shifted frequency") {
  MagneticSystem sys = flat_system(0.5);
  GeodesicTrace tr = integrate_geodesic(sys, {0.0, 0.0, 0.0}, quick());
  JacobiSolution j = solve_jacobi(sys, tr, 0.0, 1.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < j.t.size(); ++i) {
    worst = std::max(worst, std::abs(j.y[i] - std::sin(0.5 * j.t[i]) / 0.5));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("Jacobi components track a finite-difference variation of the flow") {
  // Nonconstant forcing so the gradient term in the coefficient matters.
  MagneticSystem sys =
      MagneticSystem::from_expressions("0.1*(1-x^2-y^2)", "0.3+0.2*x", "varied");
  PhasePoint start{-0.2, 0.15, 0.5};
  TraceOptions o = quick();
  GeodesicTrace tr = integrate_geodesic(sys, start, o);
  JacobiSolution j = solve_jacobi(sys, tr, 0.0, 1.0);

  const double eps = 1e-5;
  GeodesicTrace plus = integrate_geodesic(sys, {start.x, start.y, start.theta + eps}, o);
  GeodesicTrace minus = integrate_geodesic(sys, {start.x, start.y, start.theta - eps}, o);

  double worst_y = 0.0, worst_x = 0.0;
  std::size_t limit = std::min({tr.samples.size(), plus.samples.size(), minus.samples.size()});
  for (std::size_t i = 0; i + 8 < limit; i += 16) {
    // Compare at equal times; steps differ slightly between the traces.
    double t = tr.samples[i].t;
    auto state_at = [&](const GeodesicTrace& g) {
      double h = g.step;
      std::size_t k = std::min<std::size_t>(g.samples.size() - 2,
                                            static_cast<std::size_t>(t / h));
      double w = (t - g.samples[k].t) / (g.samples[k + 1].t - g.samples[k].t);
      const auto& a = g.samples[k].state;
      const auto& b = g.samples[k + 1].state;
      return Vec2{a.x + w * (b.x - a.x), a.y + w * (b.y - a.y)};
    };
    Vec2 pp = state_at(plus), pm = state_at(minus);
    Vec2 var{(pp.x - pm.x) / (2 * eps), (pp.y - pm.y) / (2 * eps)};
    const PhasePoint& base = tr.samples[i].state;
    double em = std::exp(-sys.surface().phi(base.x, base.y));
    Vec2 vel{em * std::cos(base.theta), em * std::sin(base.theta)};
    Vec2 ivel{-vel.y, vel.x};
    double y_fd = sys.surface().metric_dot(base.x, base.y, var, ivel);
    double x_fd = sys.surface().metric_dot(base.x, base.y, var, vel);
    worst_y = std::max(worst_y, std::abs(y_fd - j.y[i]));
    worst_x = std::max(worst_x, std::abs(x_fd - j.x_comp[i]));
  }
  CHECK(worst_y < 1e-4);
  CHECK(worst_x < 1e-4);
}

TEST_CASE("flat Riccati solution has the rational closed form") {
  MagneticSystem sys = flat_system(0.0);
  GeodesicTrace tr = integrate_geodesic(sys, {0.0, 0.0, 0.0}, quick());
  RiccatiSolution r = solve_riccati(sys, tr);
  CHECK(r.c == doctest::Approx(1.0));
  CHECK(r.max_residual < 1e-8);
  for (std::size_t i = 0; i < r.t.size(); i += 40) {
    CHECK(std::abs(r.u[i] - r.c / (r.c * r.t[i] + 1.0)) < 1e-6);
  }
}

TEST_CASE("constant-forcing Riccati solution matches the trigonometric form") {
  MagneticSystem sys = flat_system(0.5);
  GeodesicTrace tr = integrate_geodesic(sys, {0.0, 0.0, 0.0}, quick());
  RiccatiSolution r = solve_riccati(sys, tr);
  CHECK(r.max_residual < 1e-6);
  double lam = 0.5, c = r.c;
  for (std::size_t i = 0; i < r.t.size(); i += 40) {
    double t = r.t[i];
    double z = (c / lam) * std::sin(lam * t) + std::cos(lam * t);
    double zdot = c * std::cos(lam * t) - lam * std::sin(lam * t);
    CHECK(std::abs(r.u[i] - zdot / z) < 1e-6);
  }
}

TEST_CASE("Riccati residual stays small on a curved system") {
  MagneticSystem sys =
      MagneticSystem::from_expressions("0.15*(1-x^2-y^2)", "0.3+0.1*y", "curved");
  for (const BoundaryPoint& bp : make_entry_fan(8)) {
    GeodesicTrace tr = integrate_geodesic(sys, boundary_phase_point(bp), quick());
    RiccatiSolution r = solve_riccati(sys, tr);
    CHECK(r.max_residual < 1e-5);
  }
}

TEST_CASE("conjugate point fan reports") {
  TraceOptions o = quick();
  auto ok0 = check_no_conjugate_points(flat_system(0.0), 16, o);
  CHECK(ok0.pass);
  auto ok5 = check_no_conjugate_points(flat_system(0.5), 16, o);
  CHECK(ok5.pass);
  CHECK_THROWS_AS(check_no_conjugate_points(flat_system(0.0), 8, o), std::invalid_argument);
}

TEST_CASE("system validation gates convexity before the fan") {
  MagneticSystem strong = MagneticSystem::from_expressions("0", "1.5", "strong", 5.0);
  SystemValidation v = validate_system(strong);
  CHECK_FALSE(v.pass);
  CHECK_FALSE(v.convexity.pass);
  // The conjugate report is never reached; its default stays unset.
  CHECK(v.conjugate.min_y == 0.0);

  SystemValidation ok = validate_system(flat_system(0.3));
  CHECK(ok.pass);
}

TEST_CASE("exit time converges at fourth order") {
  // Curved factor keeps the truncation constants well above the bisection
  // tolerance at these steps.
  MagneticSystem sys =
      MagneticSystem::from_expressions("0.25*(1-x^2-y^2)", "0.5+0.2*x", "curved");
  PhasePoint start{0.05, -0.1, 0.6};
  TraceOptions fine;
  fine.dt = 1e-4;
  fine.min_samples = 2;
  fine.boundary_tol = 1e-13;
  double ref = exit_time(sys, start, fine);
  double err_prev = -1.0;
  for (double dt : {6.4e-2, 3.2e-2, 1.6e-2}) {
    TraceOptions o;
    o.dt = dt;
    o.min_samples = 2;
    o.boundary_tol = 1e-13;
    double err = std::abs(exit_time(sys, start, o) - ref);
    if (err_prev > 0) {
      double ratio = err_prev / err;
      CHECK(ratio > 8.0);
      CHECK(ratio < 40.0);
    }
    err_prev = err;
  }
}

TEST_SUITE_END();
