#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sept/baselines/baselines.hpp"

using namespace sept;
using namespace sept::baselines;

TEST_CASE("totalvar hand values") {
  CHECK(totalvar_reward({{0, 0}, {1, -1}}, 2) == doctest::Approx(1.0));
  CHECK(totalvar_reward({{3, 3}, {3, 3}, {3, 3}}, 3) == 0.0);
  // only the first T_p states count
  CHECK(totalvar_reward({{0, 0}, {1, -1}, {100, 100}}, 2) == doctest::Approx(1.0));
  const std::vector<std::vector<double>> s{{0.5, -1}, {1.5, 2}, {-1, 0}};
  const double base = totalvar_reward(s, 3);
  for (double c : {0.0, 0.5, 3.0}) {
    auto scaled = s;
    for (auto& v : scaled)
      for (auto& x : v) x *= c;
    CHECK(totalvar_reward(scaled, 3) == doctest::Approx(c * base));
  }
  CHECK_THROWS_AS(totalvar_reward({{0, 0}, {1, 1}}, 1), std::invalid_argument);
  CHECK_THROWS_AS(totalvar_reward({{0, 0}}, 2), std::invalid_argument);
}

TEST_CASE("dynasept eta and mixed reward") {
  DynaState st;
  const std::vector<double> lv{std::log(4.0), std::log(1.0)};  // sigma 2, 1
  auto r = dynasept_step(st, lv, 10.0, -1.0);
  CHECK(r.eta == doctest::Approx(1.0));
  CHECK(r.total_reward == doctest::Approx(10.0));
  // halving every sigma gives eta 0.5
  const std::vector<double> half{std::log(1.0), std::log(0.25)};
  r = dynasept_step(st, half, 10.0, -1.0);
  CHECK(r.eta == doctest::Approx(0.5));
  CHECK(r.total_reward == doctest::Approx(0.5 * 10 + 0.5 * -1));
  CHECK(st.eta == doctest::Approx(0.5));
  // running max only grows; a larger sigma raises it before eta is formed
  r = dynasept_step(st, {std::log(16.0), std::log(1.0)}, 0.0, 0.0);
  CHECK(st.sigma_max[0] == doctest::Approx(4.0));
  CHECK(r.eta == doctest::Approx(1.0));
  CHECK(st.sigma_max[1] == doctest::Approx(1.0));
  // eta -> 0 leaves the environment reward alone
  DynaState z{{1e300, 1e300}, 1.0};
  r = dynasept_step(z, {0.0, 0.0}, 123.0, -7.5);
  CHECK(r.eta == doctest::Approx(0.0));
  CHECK(r.total_reward == doctest::Approx(-7.5));
  CHECK_THROWS_AS(dynasept_step(st, {0.0}, 0, 0), std::invalid_argument);
}

TEST_CASE("epopt keeps the lowest decile") {
  std::vector<double> returns(100);
  std::iota(returns.begin(), returns.end(), 1.0);
  // shuffle deterministically so order does not give the answer away
  Rng rng(3);
  for (std::size_t i = returns.size() - 1; i > 0; --i)
    std::swap(returns[i], returns[static_cast<std::size_t>(uniform_index(rng, static_cast<int>(i) + 1))]);
  const auto keep = epopt_select(returns, 10.0);
  REQUIRE(keep.size() == 10);
  for (std::size_t k = 0; k < keep.size(); ++k) CHECK(returns[keep[k]] == static_cast<double>(k + 1));
  CHECK(epopt_select({5, 1, 3}, 10.0).size() == 1);
  CHECK(epopt_select({5, 1, 3}, 100.0).size() == 3);
  CHECK(epopt_select({2, 2, 2}, 34.0) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("maml inner step descends the adaptation loss") {
  Rng rng(4);
  control::QConfig cfg;
  cfg.hidden = {8};
  auto q = control::make_q_learner(2, 3, cfg, rng);
  std::vector<control::Transition> adapt;
  for (int k = 0; k < 4; ++k)
    adapt.push_back({{static_cast<float>(uniform(rng, -1, 1)), static_cast<float>(uniform(rng, -1, 1))},
                     uniform_index(rng, 3),
                     1.0f,
                     {0.f, 0.f},
                     true});
  const double before = td_loss(q, q.online, adapt, nullptr);
  const auto adapted = maml_adapt(q, adapt, 1e-2);
  CHECK(td_loss(q, adapted, adapt, nullptr) < before);
  const auto same = maml_adapt(q, adapt, 0.0);
  for (std::size_t k = 0; k < same.size(); ++k) CHECK(same.tensors[k].value == q.online.tensors[k].value);
  CHECK_THROWS_AS(td_loss(q, q.online, {}, nullptr), std::invalid_argument);
}

TEST_CASE("probe methods are not baselines") {
  auto c = algo::preset(env::Domain::nav2d, algo::Method::sept, algo::Scale::desk);
  CHECK_THROWS_AS(run_baseline(c), std::invalid_argument);
}

TEST_CASE("sept-np starts from the rolling mean") {
  auto c = algo::preset(env::Domain::nav2d, algo::Method::sept_np, algo::Scale::desk);
  c.instances = 3;
  c.episodes_per_instance = 2;
  const auto m = run_baseline(c);
  CHECK(m.latent_estimates == 6);
  CHECK(m.latent_rolling_mean.size() == 2);
  CHECK(std::isfinite(m.latent_rolling_mean[0]));
}

TEST_CASE("oracle ddqn learns a fixed navigation instance") {
  // one z value, enough episodes for the goal to propagate back
  auto c = algo::preset(env::Domain::nav2d, algo::Method::oracle, algo::Scale::desk);
  c.instances = 1;
  c.episodes_per_instance = 600;
  c.seed = 2;
  const auto m = run_baseline(c);
  int solved = 0;
  for (std::size_t i = m.log.solved.size() - 50; i < m.log.solved.size(); ++i) solved += m.log.solved[i];
  CHECK(solved >= 25);
}
