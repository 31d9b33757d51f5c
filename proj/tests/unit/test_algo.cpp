#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "sept/algo/config.hpp"
#include "sept/sept/sept.hpp"

using namespace sept;
using namespace sept::algo;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny(Method m, env::Domain d = env::Domain::nav2d) {
  auto c = preset(d, m, Scale::desk);
  c.instances = 4;
  c.episodes_per_instance = 2;
  c.seed = 11;
  return c;
}

bool same_bits(const nn::ParameterSet<float>& a, const nn::ParameterSet<float>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const auto& x = a.tensors[k].value;
    const auto& y = b.tensors[k].value;
    if (x.size() != y.size() || std::memcmp(x.data(), y.data(), sizeof(float) * x.size()) != 0) return false;
  }
  return true;
}

fs::path scratch_dir(const char* name) {
  auto p = fs::temp_directory_path() / ("sept_unit_" + std::string(name));
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("full-scale presets carry the published table") {
  struct Row {
    env::Domain d;
    int tp, inst, eps, vb, dim;
    double alpha;
    int probe_mb;
    double eps0;
  };
  for (const Row& r : {Row{env::Domain::nav2d, 2, 1000, 10, 10, 2, 1.0, 1, 1.0},
                       Row{env::Domain::acrobot, 5, 500, 8, 64, 2, 0.005, 10, 1.0},
                       Row{env::Domain::hiv, 8, 500, 5, 64, 6, 1.0, 1, 0.3}}) {
    const auto c = preset(r.d, Method::sept, Scale::full);
    CHECK(c.probe_steps == r.tp);
    CHECK(c.instances == r.inst);
    CHECK(c.episodes_per_instance == r.eps);
    CHECK(c.vae_batch == r.vb);
    CHECK(c.latent_dim == r.dim);
    CHECK(c.tracking_rate == r.alpha);
    CHECK(c.probe_updates == r.probe_mb);
    CHECK(c.epsilon_start == r.eps0);
    CHECK(c.vae_learning_rate == 1e-4);
    CHECK(c.probe_learning_rate == 1e-3);
    CHECK(c.vae_minibatches == 10);
    CHECK(c.beta == 1.0);
    CHECK(c.q_batch == 32);
    CHECK(c.train_every == 10);
    CHECK(c.epsilon_end == 0.15);
    CHECK(c.q_learning_rate == 1e-3);
    CHECK(c.q_clip_norm == 2.5);
    CHECK(c.gamma == 0.99);
    CHECK(c.target_rate == 5e-3);
    CHECK(c.encoder_width == 300);
    CHECK(c.decoder_width == 256);
    CHECK(c.q_hidden == std::vector<int>{256, 512});
    CHECK(c.probe_hidden == std::vector<int>{32, 32, 32});
  }
}

TEST_CASE("desk presets narrow the networks fourfold") {
  const auto c = preset(env::Domain::nav2d, Method::sept, Scale::desk);
  CHECK(c.encoder_width == 75);
  CHECK(c.decoder_width == 64);
  CHECK(c.q_hidden == std::vector<int>{64, 128});
  CHECK(c.probe_hidden == std::vector<int>{8, 8, 8});
  CHECK(c.instances == 200);
  CHECK(c.episodes_per_instance == 10);
  CHECK(c.test_instances == 4);
  CHECK(c.replay_capacity == 20000);
  CHECK(c.target_rate == 1e-2);
}

TEST_CASE("config json round trip and rejection") {
  auto c = preset(env::Domain::acrobot, Method::maxent, Scale::desk);
  c.seed = 99;
  c.q_hidden = {7, 9};
  const auto back = config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));

  auto j = to_json(c);
  j["learning_rat"] = 0.1;
  CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);
  j = to_json(c);
  j["schema_version"] = 2;
  CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);
  j = to_json(c);
  j["probe_steps"] = 0;
  CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);
  j = to_json(c);
  j["gamma"] = "high";
  CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);
  // keys left out fall back to the preset
  const auto sparse = config_from_json({{"schema_version", 1}, {"domain", "hiv"}, {"method", "avg"}});
  CHECK(sparse.probe_steps == 8);
  CHECK(sparse.method == Method::avg);
}

TEST_CASE("method names and aliases") {
  for (auto m : all_methods()) CHECK(parse_method(to_string(m)) == m);
  CHECK(parse_method("maml") == Method::maml_fo);
  CHECK(parse_method("epopt") == Method::epopt_adv);
  CHECK_THROWS_AS(parse_method("bnn"), std::invalid_argument);
  CHECK_THROWS_AS(parse_scale("huge"), std::invalid_argument);
}

TEST_CASE("condition width per method") {
  CHECK(condition_dim(tiny(Method::sept)) == 2);
  CHECK(condition_dim(tiny(Method::dynasept)) == 3);
  CHECK(condition_dim(tiny(Method::oracle)) == 1);
  CHECK(condition_dim(tiny(Method::avg)) == 0);
  CHECK(condition_dim(tiny(Method::oracle, env::Domain::acrobot)) == 4);
}

TEST_CASE("episode driver accumulates rewards and caps") {
  Rng rng(1);
  const auto inst = env::sample_instance(env::Domain::nav2d, env::Split::test, rng);
  EpisodeDriver d(inst, rng);
  int n = 0;
  while (!d.done()) {
    const bool terminal = d.act(0);
    CHECK(terminal == d.solved());
    ++n;
  }
  CHECK(n == d.cap());
  CHECK(d.result().reward_trace.size() == static_cast<std::size_t>(n));
  double sum = 0;
  for (double r : d.result().reward_trace) sum += r;
  CHECK(d.result().cumulative_reward == doctest::Approx(sum));
  if (!d.solved()) CHECK(d.result().steps_to_solve == 50);
}

TEST_CASE("training is deterministic for a seed") {
  for (auto m : {Method::sept, Method::avg, Method::dynasept}) {
    const auto a = train(tiny(m));
    const auto b = train(tiny(m));
    CHECK(same_bits(a.q.online, b.q.online));
    CHECK(a.log.returns == b.log.returns);
    auto c = tiny(m);
    c.seed = 12;
    CHECK_FALSE(same_bits(train(c).q.online, a.q.online));
  }
}

TEST_CASE("training log has one entry per episode") {
  const auto m = train(tiny(Method::sept));
  CHECK(m.log.returns.size() == 8);
  CHECK(m.log.probe_returns.size() == 8);
  CHECK(m.log.solved.size() == 8);
  CHECK(m.vae.has_value());
  CHECK(m.probe.has_value());
}

TEST_CASE("test episode does not modify the model") {
  for (auto m : {Method::sept, Method::maml_fo, Method::sept_np, Method::dynasept}) {
    const auto model = train(tiny(m));
    const auto before = model.q.online;
    const auto probe_before = model.probe ? model.probe->params : nn::ParameterSet<float>{};
    Rng rng(5);
    const auto inst = env::sample_instance(env::Domain::nav2d, env::Split::test, rng);
    const auto r = test_episode(model, inst, rng);
    CHECK(r.steps_to_solve >= 1);
    CHECK(same_bits(model.q.online, before));
    if (model.probe) CHECK(same_bits(model.probe->params, probe_before));
  }
}

TEST_CASE("test episode rejects a foreign domain") {
  const auto model = train(tiny(Method::avg));
  Rng rng(1);
  const auto inst = env::sample_instance(env::Domain::acrobot, env::Split::test, rng);
  CHECK_THROWS_AS(test_episode(model, inst, rng), std::invalid_argument);
}

TEST_CASE("checkpoint round trip reproduces test episodes") {
  for (auto m : {Method::sept, Method::sept_np, Method::dynasept, Method::oracle}) {
    const auto model = train(tiny(m));
    const auto dir = scratch_dir("ckpt");
    save_model(model, dir);
    const auto loaded = load_model(dir);
    CHECK(same_bits(loaded.q.online, model.q.online));
    CHECK(same_bits(loaded.q.target, model.q.target));
    CHECK(loaded.latent_rolling_mean == model.latent_rolling_mean);
    CHECK(loaded.sigma_max == model.sigma_max);
    CHECK(loaded.log.returns == model.log.returns);
    CHECK(to_json(loaded.config) == to_json(model.config));
    for (int k = 0; k < 3; ++k) {
      Rng r1(100 + k), r2(100 + k);
      const auto inst = env::sample_instance(env::Domain::nav2d, env::Split::test, r1);
      (void)env::sample_instance(env::Domain::nav2d, env::Split::test, r2);
      const auto a = test_episode(model, inst, r1);
      const auto b = test_episode(loaded, inst, r2);
      CHECK(a.reward_trace == b.reward_trace);
    }
    fs::remove_all(dir);
  }
}

TEST_CASE("checkpoint detects tampering") {
  const auto model = train(tiny(Method::sept));
  const auto dir = scratch_dir("tamper");
  save_model(model, dir);
  {
    std::fstream f(dir / "q_online.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-1, std::ios::end);
    f.put('\x5a');
  }
  CHECK_THROWS_AS(load_model(dir), std::runtime_error);
  fs::remove(dir / "state.json");
  CHECK_THROWS_AS(load_model(dir), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("sha1 known answers") {
  CHECK(sha1_hex("") == "da39a3ee5e6b4b0d3255bfef95601890afd80709");
  CHECK(sha1_hex("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");
}

TEST_CASE("identical config and seed give identical checkpoint files") {
  const auto a = scratch_dir("same_a"), b = scratch_dir("same_b");
  save_model(train(tiny(Method::sept)), a);
  save_model(train(tiny(Method::sept)), b);
  for (const auto& e : fs::directory_iterator(a)) CHECK(sha1_file(e.path()) == sha1_file(b / e.path().filename()));
  fs::remove_all(a);
  fs::remove_all(b);
}
