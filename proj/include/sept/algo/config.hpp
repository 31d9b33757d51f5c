#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sept/env/env_family.hpp"

namespace sept::algo {

enum class Method { sept, avg, oracle, epopt_adv, maml_fo, sept_np, totalvar, maxent, dynasept };
enum class Scale { desk, full };

std::string_view to_string(Method m);
std::string_view to_string(Scale s);
Method parse_method(std::string_view name);
Scale parse_scale(std::string_view name);
const std::vector<Method>& all_methods();

/// Methods that run a dedicated probe policy.
bool uses_probe(Method m);
/// Methods that train a trajectory VAE.
bool uses_vae(Method m);

inline constexpr int kConfigSchemaVersion = 1;

struct TrainConfig {
  env::Domain domain = env::Domain::nav2d;
  Method method = Method::sept;
  Scale scale = Scale::desk;
  std::uint64_t seed = 0;

  int instances = 200;
  int episodes_per_instance = 10;
  int probe_steps = 2;  // T_p
  int latent_dim = 2;
  int test_instances = 4;  // M per training run

  // trajectory VAE
  int encoder_width = 75;
  int decoder_width = 64;
  double beta = 1.0;
  double entropy_weight = 0.5;
  double vae_learning_rate = 1e-4;
  int vae_batch = 10;
  int vae_minibatches = 10;
  double tracking_rate = 1.0;

  // probe
  std::vector<int> probe_hidden{8, 8, 8};
  double probe_learning_rate = 1e-3;
  int probe_updates = 1;

  // control
  std::vector<int> q_hidden{64, 128};
  double q_learning_rate = 1e-3;
  double q_clip_norm = 2.5;
  double gamma = 0.99;
  double target_rate = 5e-3;
  int q_batch = 32;
  int train_every = 10;
  double reward_scale = 1.0;
  double epsilon_start = 1.0;
  double epsilon_end = 0.15;
  long long replay_capacity = 100000;

  // latent input to the control policy: posterior sample during training,
  // posterior mean at test unless the flags say otherwise
  bool train_latent_sample = true;
  bool test_latent_sample = false;

  // baselines
  double maml_inner_learning_rate = 1e-2;
  int epopt_rollouts = 100;
  double epopt_percentile = 10.0;
  double dyna_probe_weight = 1.0;

  int total_episodes() const { return instances * episodes_per_instance; }
};

/// Table-driven defaults. Desk scale narrows every network 4x and shrinks the
/// instance count; full scale is the published configuration.
TrainConfig preset(env::Domain domain, Method method, Scale scale);

/// Throws std::invalid_argument describing the first violated rule.
void validate(const TrainConfig& c);

nlohmann::json to_json(const TrainConfig& c);
/// Starts from the preset named by domain/method/scale in `j` and overrides
/// the remaining keys. Unknown keys or a schema mismatch throw.
TrainConfig config_from_json(const nlohmann::json& j);

}  // namespace sept::algo
