#pragma once

// Total mechanical energy of the acrobot written out from link positions,
// independent of the simulator's equations of motion.

#include <cmath>

#include "sept/env/acrobot.hpp"

namespace sept::testing {

inline double acrobot_energy(const env::acrobot::State& s, const env::acrobot::Params& p) {
  namespace ac = env::acrobot;
  const double lc1 = p.l1 / 2, lc2 = p.l2 / 2, g = ac::kGravity;
  const double t1 = s[0], t2 = s[1], w1 = s[2], w2 = s[3];
  // velocities of the centres of mass
  const double v1x = lc1 * std::cos(t1) * w1, v1y = lc1 * std::sin(t1) * w1;
  const double v2x = p.l1 * std::cos(t1) * w1 + lc2 * std::cos(t1 + t2) * (w1 + w2);
  const double v2y = p.l1 * std::sin(t1) * w1 + lc2 * std::sin(t1 + t2) * (w1 + w2);
  const double ke = 0.5 * p.m1 * (v1x * v1x + v1y * v1y) + 0.5 * p.m2 * (v2x * v2x + v2y * v2y) +
                    0.5 * ac::kMoi * w1 * w1 + 0.5 * ac::kMoi * (w1 + w2) * (w1 + w2);
  const double y1 = -lc1 * std::cos(t1);
  const double y2 = -p.l1 * std::cos(t1) - lc2 * std::cos(t1 + t2);
  return ke + g * (p.m1 * y1 + p.m2 * y2);
}

/// Worst relative energy drift over `steps` zero-torque steps.
inline double acrobot_zero_torque_drift(env::acrobot::State s, const env::acrobot::Params& p, int steps) {
  const double e0 = acrobot_energy(s, p);
  double worst = 0;
  for (int k = 0; k < steps; ++k) {
    s = env::acrobot::advance(s, 0.0, p);
    worst = std::max(worst, std::abs(acrobot_energy(s, p) - e0) / std::abs(e0));
  }
  return worst;
}

}  // namespace sept::testing
