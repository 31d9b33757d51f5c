#pragma once

// Within-host HIV infection model of Adams et al. (2004): six populations
// (T1, T2, T1*, T2*, V, E) driven by two drugs (RTI, PI) switched on or off.
//
// The twelve hidden variables multiply the twelve parameters lambda1, d1, k1,
// lambda2, d2, f, k2, delta, m1, m2, NT, c. Training/validation instances draw
// each factor from {0.9, 0.95, 1.05, 1.1}; test instances from
// {0.85, 0.925, 1.075, 1.15} (interpolation and extrapolation).
//
// One treatment period is 5 days, integrated with RK4. The substep count is
// chosen by doubling until the result agrees with the half-step run to a
// relative 1e-6 in every component. Episodes last 200 periods and start at
// the nominal unhealthy steady state.

#include <array>
#include <span>

namespace sept::env::hiv {

using Populations = std::array<double, 6>;
using DrugFlags = std::array<int, 2>;  // {RTI on, PI on}

inline constexpr int kHiddenCount = 12;
inline constexpr double kPeriodDays = 5.0;
inline constexpr int kHorizon = 200;
inline constexpr int kMinSubsteps = 32;
inline constexpr int kMaxSubsteps = 8192;
inline constexpr double kSubstepTolerance = 1e-6;
inline constexpr double kRtiEfficacy = 0.7;
inline constexpr double kPiEfficacy = 0.3;

inline constexpr Populations kUnhealthyState{163573.0, 5.0, 11945.0, 46.0, 63919.0, 24.0};
inline constexpr Populations kHealthyStateApprox{967839.0, 621.0, 76.0, 6.0, 415.0, 353108.0};

inline constexpr std::array<double, 4> kTrainFactors{0.9, 0.95, 1.05, 1.1};
inline constexpr std::array<double, 4> kTestFactors{0.85, 0.925, 1.075, 1.15};

struct Params {
  double lambda1 = 1e4, d1 = 0.01, k1 = 8e-7, lambda2 = 31.98, d2 = 0.01, f = 0.34, k2 = 1e-4, delta = 0.7,
         m1 = 1e-5, m2 = 1e-5, NT = 100.0, c = 13.0;
  double rho1 = 1.0, rho2 = 1.0, lambdaE = 1.0, bE = 0.3, Kb = 100.0, dE = 0.25, Kd = 500.0, deltaE = 0.1;
};

/// Nominal parameters with the twelve hidden factors applied.
Params params_from(std::span<const double> z);
DrugFlags drugs_for(int action);

/// dP/dt of the six populations. Throws std::invalid_argument if a population
/// is not strictly positive or a drug flag is outside {0, 1}.
Populations hiv_derivative(const Populations& pops, DrugFlags drugs, std::span<const double> z);
Populations derivative(const Populations& pops, DrugFlags drugs, const Params& p);

struct PeriodResult {
  Populations populations;
  int substeps;
};

PeriodResult integrate_period(const Populations& start, DrugFlags drugs, const Params& p);
Populations integrate_fixed(const Populations& start, DrugFlags drugs, const Params& p, int substeps);

/// Treatment reward: -(Q V + R1 e1^2 + R2 e2^2 - S E).
double reward(const Populations& pops, DrugFlags drugs);

}  // namespace sept::env::hiv
