#pragma once

#include <vector>

#include "magtomo/geometry.hpp"

namespace magtomo {

// Point of the unit sphere bundle in chart coordinates: position plus fiber
// angle theta.  The represented velocity e^{-phi}(cos theta, sin theta) has
// unit metric norm by construction.
struct PhasePoint {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

struct TraceSample {
  double t = 0.0;
  PhasePoint state;
};

// Classical RK4 trajectory of the magnetic flow.  Samples are uniform in t
// except possibly a short final closure; the last sample sits on the
// boundary circle (bisection-refined) when the ray exits.
struct GeodesicTrace {
  std::vector<TraceSample> samples;
  double exit_time = 0.0;
  bool exited = false;
  double step = 0.0;  // nominal uniform step
};

struct TraceOptions {
  double dt = 1e-3;        // requested step; actual step also honors min_samples
  int min_samples = 2000;  // at least this many intervals per trace
  double boundary_tol = 1e-10;
};

PhasePoint boundary_phase_point(const BoundaryPoint& bp);

GeodesicTrace integrate_geodesic(const MagneticSystem& system, const PhasePoint& start,
                                 const TraceOptions& opts = {});
GeodesicTrace integrate_geodesic(const MagneticSystem& system, const PhasePoint& start,
                                 double dt);

double exit_time(const MagneticSystem& system, const PhasePoint& start,
                 const TraceOptions& opts = {});

// Exit point and direction for an inflow boundary point.  mu_out is the
// outgoing angle measured from the outward normal, so a flat diameter maps
// (beta, 0) to (beta + pi, 0).
struct ScatterPoint {
  BoundaryPoint entry;
  double beta_out = 0.0;
  double mu_out = 0.0;
  double tau = 0.0;
};

ScatterPoint scattering_relation(const MagneticSystem& system, const BoundaryPoint& entry,
                                 const TraceOptions& opts = {});

// Deterministic inflow fan: positions sweep the circle, directions fill
// (-mu_max, mu_max) by a golden-ratio sequence.  Grazing directions are
// excluded.
std::vector<BoundaryPoint> make_entry_fan(int fan_size, double mu_max_margin = 0.05);

// Scalar Jacobi data along a trace: y solves the second-order equation with
// coefficient K + Xperp(lambda) + lambda^2, x_comp integrates lambda * y.
struct JacobiSolution {
  std::vector<double> t;
  std::vector<double> y;
  std::vector<double> ydot;
  std::vector<double> x_comp;
};

JacobiSolution solve_jacobi(const MagneticSystem& system, const GeodesicTrace& trace,
                            double y0, double ydot0);

struct RiccatiSolution {
  std::vector<double> t;
  std::vector<double> u;  // zdot / z
  std::vector<double> z;
  double c = 0.0;
  double max_residual = 0.0;  // sup |du/dt + u^2 + K + Xperp(lambda) + lambda^2|
};

RiccatiSolution solve_riccati(const MagneticSystem& system, const GeodesicTrace& trace);

struct ConjugateReport {
  double min_y = 0.0;  // minimum of the vanishing-data Jacobi field past the ramp
  bool pass = false;
};

ConjugateReport check_no_conjugate_points(const MagneticSystem& system, int n_fan,
                                          const TraceOptions& opts = {});

struct SystemValidation {
  ConvexityReport convexity;
  ConjugateReport conjugate;
  bool pass = false;
};

// Gate for transform computations: convexity first, conjugate-point fan
// second (the fan may throw TrappedGeodesicError for wild systems).
SystemValidation validate_system(const MagneticSystem& system, int n_samples = 64,
                                 int n_fan = 32);

// Riccati / Jacobi coefficient K + Xperp(lambda) + lambda^2 evaluated in
// closed form at a phase point.
double jacobi_coefficient(const MagneticSystem& system, const PhasePoint& p);

}  // namespace magtomo
