#include "sept/env/hiv.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sept::env::hiv {

namespace {

constexpr double kRewardQ = 0.1;
constexpr double kRewardR1 = 20000.0;
constexpr double kRewardR2 = 2000.0;
constexpr double kRewardS = 1000.0;

Populations axpy(const Populations& x, const Populations& d, double h) {
  Populations out;
  for (int i = 0; i < 6; ++i) out[i] = x[i] + h * d[i];
  return out;
}

bool all_positive(const Populations& p) {
  return std::all_of(p.begin(), p.end(), [](double v) { return v > 0.0 && std::isfinite(v); });
}

double max_relative_gap(const Populations& a, const Populations& b) {
  double gap = 0.0;
  for (int i = 0; i < 6; ++i) gap = std::max(gap, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), 1e-12));
  return gap;
}

}  // namespace

Params params_from(std::span<const double> z) {
  if (z.size() != kHiddenCount) throw std::invalid_argument("hiv: z must have 12 components");
  Params p;
  p.lambda1 *= z[0];
  p.d1 *= z[1];
  p.k1 *= z[2];
  p.lambda2 *= z[3];
  p.d2 *= z[4];
  p.f *= z[5];
  p.k2 *= z[6];
  p.delta *= z[7];
  p.m1 *= z[8];
  p.m2 *= z[9];
  p.NT *= z[10];
  p.c *= z[11];
  return p;
}

DrugFlags drugs_for(int action) {
  if (action < 0 || action > 3) throw std::invalid_argument("hiv: invalid action " + std::to_string(action));
  return {action & 1, (action >> 1) & 1};
}

Populations derivative(const Populations& y, DrugFlags drugs, const Params& p) {
  const double e1 = drugs[0] ? kRtiEfficacy : 0.0;
  const double e2 = drugs[1] ? kPiEfficacy : 0.0;
  const auto [T1, T2, T1s, T2s, V, E] = y;
  const double infect1 = (1.0 - e1) * p.k1 * V * T1;
  const double infect2 = (1.0 - p.f * e1) * p.k2 * V * T2;
  const double infected = T1s + T2s;
  Populations d;
  d[0] = p.lambda1 - p.d1 * T1 - infect1;
  d[1] = p.lambda2 - p.d2 * T2 - infect2;
  d[2] = infect1 - p.delta * T1s - p.m1 * E * T1s;
  d[3] = infect2 - p.delta * T2s - p.m2 * E * T2s;
  d[4] = (1.0 - e2) * p.NT * p.delta * infected - p.c * V - (p.rho1 * infect1 + p.rho2 * infect2);
  d[5] = p.lambdaE + p.bE * infected / (infected + p.Kb) * E - p.dE * infected / (infected + p.Kd) * E -
         p.deltaE * E;
  return d;
}

Populations hiv_derivative(const Populations& pops, DrugFlags drugs, std::span<const double> z) {
  if (!all_positive(pops)) throw std::invalid_argument("hiv_derivative: populations must be strictly positive");
  if ((drugs[0] != 0 && drugs[0] != 1) || (drugs[1] != 0 && drugs[1] != 1))
    throw std::invalid_argument("hiv_derivative: drug flags must be 0 or 1");
  return derivative(pops, drugs, params_from(z));
}

Populations integrate_fixed(const Populations& start, DrugFlags drugs, const Params& p, int substeps) {
  const double h = kPeriodDays / substeps;
  Populations y = start;
  for (int i = 0; i < substeps; ++i) {
    const Populations k1 = derivative(y, drugs, p);
    const Populations k2 = derivative(axpy(y, k1, 0.5 * h), drugs, p);
    const Populations k3 = derivative(axpy(y, k2, 0.5 * h), drugs, p);
    const Populations k4 = derivative(axpy(y, k3, h), drugs, p);
    for (int j = 0; j < 6; ++j) y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
  }
  return y;
}

PeriodResult integrate_period(const Populations& start, DrugFlags drugs, const Params& p) {
  int n = kMinSubsteps;
  Populations coarse = integrate_fixed(start, drugs, p, n);
  while (true) {
    const Populations fine = integrate_fixed(start, drugs, p, 2 * n);
    const bool ok = all_positive(coarse) && all_positive(fine);
    if (ok && max_relative_gap(coarse, fine) < kSubstepTolerance) return {fine, 2 * n};
    n *= 2;
    if (n > kMaxSubsteps) {
      if (!all_positive(fine)) throw std::runtime_error("hiv: integrator lost positivity");
      return {fine, n};
    }
    coarse = fine;
  }
}

double reward(const Populations& pops, DrugFlags drugs) {
  const double e1 = drugs[0] ? kRtiEfficacy : 0.0;
  const double e2 = drugs[1] ? kPiEfficacy : 0.0;
  return -(kRewardQ * pops[4] + kRewardR1 * e1 * e1 + kRewardR2 * e2 * e2 - kRewardS * pops[5]);
}

}  // namespace sept::env::hiv
