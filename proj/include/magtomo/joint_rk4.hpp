#pragma once

#include "magtomo/flow.hpp"

namespace magtomo {

// Phase-space velocity of the magnetic flow.
void flow_rhs(const MagneticSystem& system, const double state[3], EvalScratch& scratch,
              double out[3]);

// Advances an auxiliary state along the sample grid of an existing trace by
// re-integrating the phase point jointly, so RK4 stages see coefficients at
// genuine stage states.  rhs(phase, extra, dextra) fills the time derivative
// of the auxiliary state.  With backward=true integration runs from the last
// sample toward t=0 (time reversal of the same orbit, not direction
// reversal); the returned vector is still indexed like trace.samples, and
// out[last] == init.
template <typename Extra, typename RhsFn>
std::vector<Extra> integrate_along(const MagneticSystem& system, const GeodesicTrace& trace,
                                   const Extra& init, RhsFn&& rhs, bool backward = false) {
  const auto& samples = trace.samples;
  std::vector<Extra> out(samples.size(), init);
  if (samples.empty()) return out;

  EvalScratch scratch;
  const double sign = backward ? -1.0 : 1.0;

  auto stage = [&](const double p[3], const Extra& e, double dp[3], Extra& de) {
    flow_rhs(system, p, scratch, dp);
    dp[0] *= sign;
    dp[1] *= sign;
    dp[2] *= sign;
    PhasePoint pp{p[0], p[1], p[2]};
    rhs(pp, e, de);
    if (backward) de = -de;
  };

  const std::size_t n = samples.size();
  std::size_t start_idx = backward ? n - 1 : 0;
  double p[3] = {samples[start_idx].state.x, samples[start_idx].state.y,
                 samples[start_idx].state.theta};
  Extra e = init;
  out[start_idx] = e;

  Extra k1 = init, k2 = init, k3 = init, k4 = init, tmp = init;
  double kp1[3], kp2[3], kp3[3], kp4[3], pt[3];

  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t i = backward ? n - 1 - step : step;
    std::size_t j = backward ? i - 1 : i + 1;
    double h = std::abs(samples[j].t - samples[i].t);

    stage(p, e, kp1, k1);
    for (int d = 0; d < 3; ++d) pt[d] = p[d] + 0.5 * h * kp1[d];
    tmp = e + (0.5 * h) * k1;
    stage(pt, tmp, kp2, k2);
    for (int d = 0; d < 3; ++d) pt[d] = p[d] + 0.5 * h * kp2[d];
    tmp = e + (0.5 * h) * k2;
    stage(pt, tmp, kp3, k3);
    for (int d = 0; d < 3; ++d) pt[d] = p[d] + h * kp3[d];
    tmp = e + h * k3;
    stage(pt, tmp, kp4, k4);

    for (int d = 0; d < 3; ++d) {
      p[d] += h / 6.0 * (kp1[d] + 2.0 * kp2[d] + 2.0 * kp3[d] + kp4[d]);
    }
    e = e + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out[j] = e;
  }
  return out;
}

}  // namespace magtomo
