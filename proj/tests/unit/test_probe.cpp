#include <doctest.h>

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "sept/probe/probe_policy.hpp"
#include "support/enumeration.hpp"

using namespace sept;
using namespace sept::probe;

TEST_CASE("enumerated score-function estimator equals the exact entropy gradient") {
  testing::TinyMdp mdp;
  Rng rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    auto p = nn::init_parameters<double>(testing::tabular_spec(), rng);
    for (auto& t : p.tensors) t.value *= 2.0;
    const auto exact = testing::exact_entropy_gradient(mdp, p);
    const auto est = testing::expected_estimator(mdp, p);
    for (std::size_t k = 0; k < p.size(); ++k)
      CHECK((exact.tensors[k].value - est.tensors[k].value).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("return normalizer") {
  ReturnNormalizer n(3);
  CHECK(n.normalize(5.0) == 0.0);  // single value has no spread
  CHECK(n.normalize(5.0) == 0.0);
  CHECK(n.normalize(8.0) > 0.0);
  CHECK(n.normalize(NAN) == 0.0);
  CHECK(n.size() == 3);
  n.normalize(1.0);
  CHECK(n.size() == 3);
}

TEST_CASE("zero normalized return leaves the probe unchanged") {
  Rng rng(2);
  auto l = make_probe_learner(2, 4, {}, rng);
  ProbeRecord rec;
  rec.trajectory.states = {{0.0, 0.0}, {0.0, 1.0}};
  rec.trajectory.actions = {0, 1};
  rec.real_steps = 2;
  rec.probe_return = 3.0;
  const auto before = l.params;
  const auto rep = reinforce_update(l, rec);  // first return: normalized to 0
  CHECK_FALSE(rep.applied);
  for (std::size_t k = 0; k < l.params.size(); ++k) CHECK(l.params.tensors[k].value == before.tensors[k].value);
}

TEST_CASE("bandit converges to the rewarded action") {
  Rng rng(3);
  ProbeConfig cfg;
  cfg.hidden = {8};
  cfg.learning_rate = 1e-2;
  auto l = make_probe_learner(1, 2, cfg, rng);
  const std::vector<double> obs{1.0};
  for (int it = 0; it < 3000; ++it) {
    const auto p = action_probabilities(l.spec, l.params, obs);
    const int a = sample_categorical({p(0), p(1)}, rng);
    ProbeRecord rec;
    rec.trajectory.states = {obs};
    rec.trajectory.actions = {a};
    rec.real_steps = 1;
    rec.probe_return = a == 0 ? 1.0 : -1.0;
    reinforce_update(l, rec);
  }
  const auto p = action_probabilities(l.spec, l.params, obs);
  CHECK(p(0) > 0.99);
  CHECK(p.sum() == doctest::Approx(1.0));
}

TEST_CASE("probe rollout on nav2d") {
  Rng rng(4);
  auto l = make_probe_learner(2, 4, {}, rng);
  // near-uniform initial policy: flatten the output layer
  l.params.tensors[l.params.size() - 2].value.setZero();
  l.params.tensors[l.params.size() - 1].value.setZero();
  const env::InstanceSpec inst{env::Domain::nav2d, {1.0}, env::Split::train};
  std::array<int, 4> counts{};
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    const auto r = probe_rollout(l, inst, env::reset(inst, rng), 2, rng);
    REQUIRE(r.record.trajectory.length() == 2);
    REQUIRE(r.record.real_steps == 2);
    ++counts[r.record.trajectory.actions[0]];
    CHECK(r.trace.final_state.step_index == 2);
  }
  for (int c : counts) CHECK(std::abs(c / double(n) - 0.25) < 0.02);

  Rng a(5), b(5);
  const auto r1 = probe_rollout(l, inst, env::reset(inst, a), 2, a);
  const auto r2 = probe_rollout(l, inst, env::reset(inst, b), 2, b);
  CHECK(r1.record.trajectory.actions == r2.record.trajectory.actions);
  CHECK(r1.record.trajectory.states == r2.record.trajectory.states);
}

TEST_CASE("truncated probing pads with the final state") {
  vae::Trajectory t;
  t.states = {{1.0, 2.0}};
  t.actions = {3};
  pad_trajectory(t, {1.5, 2.5}, 3);
  CHECK(t.truncated);
  CHECK(t.length() == 3);
  CHECK(t.states[2] == std::vector<double>{1.5, 2.5});
}

TEST_CASE("probe return is reproducible") {
  Rng rng(6);
  const auto specs = vae::make_vae_specs(2, 4, 2, 4, 4);
  const auto model = vae::init_vae<float>(specs, rng);
  vae::Trajectory t;
  t.states = {{0.0, 0.0}, {0.0, 1.0}};
  t.actions = {0, 2};
  CHECK(probe_return(specs, model, t, 1.0) == probe_return(specs, model, t, 1.0));
}
