#pragma once

// Two states, two actions, horizon 2, tabular softmax policy (one-hot state
// input into a single softmax layer: logits_s = W[:, s] + b).
//
// exact_entropy_gradient differentiates the closed-form trajectory entropy
//   H = H(rho) + sum_s1 rho(s1) [ H(pi_s1) + sum_a pi(a|s1) ( H(P(.|s1,a)) + sum_s2 P(s2|s1,a) H(pi_s2) ) ]
// by hand. expected_estimator enumerates all 16 trajectories and averages the
// score-function estimator sum_t grad log pi(a_t|s_t) * (-log p(tau)) computed
// by the library.

#include <array>
#include <cmath>

#include "sept/nn/network.hpp"
#include "sept/probe/probe_policy.hpp"

namespace sept::testing {

struct TinyMdp {
  std::array<double, 2> rho{0.6, 0.4};
  // P[s][a][s']
  using Row = std::array<double, 2>;
  std::array<std::array<Row, 2>, 2> P{std::array<Row, 2>{Row{0.9, 0.1}, Row{0.3, 0.7}},
                                      std::array<Row, 2>{Row{0.2, 0.8}, Row{0.55, 0.45}}};
};

inline nn::NetworkSpec tabular_spec() {
  return nn::NetworkSpec{2, {{nn::LayerKind::dense, 2, nn::Activation::softmax}}};
}

inline std::array<double, 2> policy_at(const nn::ParameterSet<double>& p, int s) {
  const auto& W = p.tensors[0].value;
  const auto& b = p.tensors[1].value;
  const double l0 = W(0, s) + b(0, 0), l1 = W(1, s) + b(1, 0);
  const double m = std::max(l0, l1);
  const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

inline double entropy2(const std::array<double, 2>& q) {
  double h = 0;
  for (double v : q)
    if (v > 0) h -= v * std::log(v);
  return h;
}

inline nn::ParameterSet<double> exact_entropy_gradient(const TinyMdp& m, const nn::ParameterSet<double>& p) {
  const std::array<std::array<double, 2>, 2> pi{policy_at(p, 0), policy_at(p, 1)};
  const std::array<double, 2> Hpi{entropy2(pi[0]), entropy2(pi[1])};
  // visitation weight of each state for the H(pi_s) terms
  std::array<double, 2> visit{m.rho[0], m.rho[1]};
  for (int s1 = 0; s1 < 2; ++s1)
    for (int a = 0; a < 2; ++a)
      for (int s2 = 0; s2 < 2; ++s2) visit[s2] += m.rho[s1] * pi[s1][a] * m.P[s1][a][s2];
  auto g = p.zeros_like();
  for (int s = 0; s < 2; ++s) {
    std::array<double, 2> c{};
    for (int a = 0; a < 2; ++a) {
      c[a] = entropy2(m.P[s][a]);
      for (int s2 = 0; s2 < 2; ++s2) c[a] += m.P[s][a][s2] * Hpi[s2];
    }
    for (int j = 0; j < 2; ++j) {
      double dl = -visit[s] * pi[s][j] * (std::log(pi[s][j]) + Hpi[s]);
      for (int a = 0; a < 2; ++a) dl += m.rho[s] * c[a] * pi[s][a] * ((a == j ? 1.0 : 0.0) - pi[s][j]);
      g.tensors[0].value(j, s) += dl;
      g.tensors[1].value(j, 0) += dl;
    }
  }
  return g;
}

inline nn::ParameterSet<double> expected_estimator(const TinyMdp& m, const nn::ParameterSet<double>& p) {
  const auto spec = tabular_spec();
  auto total = p.zeros_like();
  const std::array<std::array<double, 2>, 2> pi{policy_at(p, 0), policy_at(p, 1)};
  for (int s1 = 0; s1 < 2; ++s1)
    for (int a1 = 0; a1 < 2; ++a1)
      for (int s2 = 0; s2 < 2; ++s2)
        for (int a2 = 0; a2 < 2; ++a2) {
          const double prob = m.rho[s1] * pi[s1][a1] * m.P[s1][a1][s2] * pi[s2][a2];
          nn::Matrix<double> states = nn::Matrix<double>::Zero(2, 2);
          states(s1, 0) = 1.0;
          states(s2, 1) = 1.0;
          auto g = probe::log_prob_gradient(spec, p, states, {a1, a2});
          total.axpy(prob * -std::log(prob), g);
        }
  return total;
}

}  // namespace sept::testing
