#include "sept/env/acrobot.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sept::env::acrobot {

namespace {

double wrap(double x) {
  const double two_pi = 2.0 * std::numbers::pi;
  x = std::fmod(x + std::numbers::pi, two_pi);
  if (x < 0) x += two_pi;
  return x - std::numbers::pi;
}

}  // namespace

Params params_from(std::span<const double> z) {
  if (z.size() != 4) throw std::invalid_argument("acrobot: z must have 4 components");
  return {z[0], z[1], z[2], z[3]};
}

double torque_for(int action) {
  switch (action) {
    case 0: return 1.0;
    case 1: return 0.0;
    case 2: return -1.0;
    default: throw std::invalid_argument("acrobot: invalid action " + std::to_string(action));
  }
}

// Lagrangian dynamics of the double pendulum (Sutton & Barto "book" form).
State derivative(const State& s, double torque, const Params& p) {
  const double lc1 = 0.5 * p.l1;
  const double lc2 = 0.5 * p.l2;
  const auto [th1, th2, dth1, dth2] = s;
  const double c2 = std::cos(th2);
  const double s2 = std::sin(th2);
  const double d1 = p.m1 * lc1 * lc1 + p.m2 * (p.l1 * p.l1 + lc2 * lc2 + 2.0 * p.l1 * lc2 * c2) + 2.0 * kMoi;
  const double d2 = p.m2 * (lc2 * lc2 + p.l1 * lc2 * c2) + kMoi;
  const double phi2 = p.m2 * lc2 * kGravity * std::sin(th1 + th2);
  const double phi1 = -p.m2 * p.l1 * lc2 * dth2 * dth2 * s2 - 2.0 * p.m2 * p.l1 * lc2 * dth2 * dth1 * s2 +
                      (p.m1 * lc1 + p.m2 * p.l1) * kGravity * std::sin(th1) + phi2;
  const double ddth2 = (torque + d2 / d1 * phi1 - p.m2 * p.l1 * lc2 * dth1 * dth1 * s2 - phi2) /
                       (p.m2 * lc2 * lc2 + kMoi - d2 * d2 / d1);
  const double ddth1 = -(d2 * ddth2 + phi1) / d1;
  return {dth1, dth2, ddth1, ddth2};
}

State rk4(const State& s, double torque, const Params& p, double h) {
  auto add = [](const State& a, const State& b, double k) {
    return State{a[0] + k * b[0], a[1] + k * b[1], a[2] + k * b[2], a[3] + k * b[3]};
  };
  const State k1 = derivative(s, torque, p);
  const State k2 = derivative(add(s, k1, 0.5 * h), torque, p);
  const State k3 = derivative(add(s, k2, 0.5 * h), torque, p);
  const State k4 = derivative(add(s, k3, h), torque, p);
  State out;
  for (int i = 0; i < 4; ++i) out[i] = s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

State advance(const State& s, double torque, const Params& p) {
  State x = s;
  const double h = kDt / kSubsteps;
  for (int i = 0; i < kSubsteps; ++i) x = rk4(x, torque, p, h);
  x[0] = wrap(x[0]);
  x[1] = wrap(x[1]);
  x[2] = std::clamp(x[2], -kMaxVel1, kMaxVel1);
  x[3] = std::clamp(x[3], -kMaxVel2, kMaxVel2);
  return x;
}

double tip_height(const State& s, const Params& p) {
  return -p.l1 * std::cos(s[0]) - p.l2 * std::cos(s[0] + s[1]);
}

}  // namespace sept::env::acrobot
