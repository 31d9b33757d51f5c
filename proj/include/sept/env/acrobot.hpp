#pragma once

// Two-link underactuated pendulum. Hidden parameter z = (m1, m2, l1, l2);
// centres of mass sit at half link length, both links have unit moment of
// inertia about their centre. Angles are measured from hanging straight down.
//
// One control step lasts 0.2 s and is integrated with 10 classical RK4
// substeps. Torque on the second joint is {+1, 0, -1} for actions {0, 1, 2}.
// The episode is solved when the tip rises above height 1 (reward +10);
// otherwise each step costs -1. Step cap 200.

#include <array>
#include <span>

namespace sept::env::acrobot {

using State = std::array<double, 4>;  // theta1, theta2, dtheta1, dtheta2

inline constexpr double kDt = 0.2;
inline constexpr int kSubsteps = 10;
inline constexpr double kGravity = 9.8;
inline constexpr double kMoi = 1.0;
inline constexpr double kMaxVel1 = 4.0 * 3.14159265358979323846;
inline constexpr double kMaxVel2 = 9.0 * 3.14159265358979323846;
inline constexpr double kHeightThreshold = 1.0;
inline constexpr double kStepReward = -1.0;
inline constexpr double kSolveReward = 10.0;
inline constexpr int kMaxSteps = 200;

struct Params {
  double m1 = 1.0, m2 = 1.0, l1 = 1.0, l2 = 1.0;
};

Params params_from(std::span<const double> z);
double torque_for(int action);

/// Time derivative of the state under constant torque.
State derivative(const State& s, double torque, const Params& p);
/// One RK4 substep of length h.
State rk4(const State& s, double torque, const Params& p, double h);
/// Full control step: substeps, angle wrapping, velocity bounds.
State advance(const State& s, double torque, const Params& p);
double tip_height(const State& s, const Params& p);

}  // namespace sept::env::acrobot
