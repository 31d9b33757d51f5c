#include "sept/algo/config.hpp"

#include <set>
#include <stdexcept>
#include <string>

namespace sept::algo {

namespace {

struct MethodName {
  Method method;
  std::string_view name;
};

constexpr MethodName kMethodNames[] = {
    {Method::sept, "sept"},         {Method::avg, "avg"},         {Method::oracle, "oracle"},
    {Method::epopt_adv, "epopt_adv"}, {Method::maml_fo, "maml_fo"}, {Method::sept_np, "sept_np"},
    {Method::totalvar, "totalvar"}, {Method::maxent, "maxent"},   {Method::dynasept, "dynasept"},
};

std::vector<int> quarter(const std::vector<int>& widths) {
  std::vector<int> out;
  for (int w : widths) out.push_back(std::max(1, w / 4));
  return out;
}

}  // namespace

std::string_view to_string(Method m) {
  for (const auto& e : kMethodNames)
    if (e.method == m) return e.name;
  return "unknown";
}

std::string_view to_string(Scale s) { return s == Scale::desk ? "desk" : "full"; }

Method parse_method(std::string_view name) {
  for (const auto& e : kMethodNames)
    if (e.name == name) return e.method;
  if (name == "epopt") return Method::epopt_adv;
  if (name == "maml") return Method::maml_fo;
  if (name == "average") return Method::avg;
  throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

Scale parse_scale(std::string_view name) {
  if (name == "desk") return Scale::desk;
  if (name == "full") return Scale::full;
  throw std::invalid_argument("unknown scale '" + std::string(name) + "' (expected desk or full)");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> v{Method::sept,    Method::avg,      Method::oracle,
                                     Method::epopt_adv, Method::maml_fo, Method::sept_np,
                                     Method::totalvar, Method::maxent,   Method::dynasept};
  return v;
}

bool uses_probe(Method m) { return m == Method::sept || m == Method::totalvar || m == Method::maxent; }

bool uses_vae(Method m) { return uses_probe(m) || m == Method::sept_np || m == Method::dynasept; }

TrainConfig preset(env::Domain domain, Method method, Scale scale) {
  TrainConfig c;
  c.domain = domain;
  c.method = method;
  c.scale = scale;
  switch (domain) {
    case env::Domain::nav2d:
    case env::Domain::nav2d_switch:
      c.probe_steps = 2;
      c.instances = 1000;
      c.episodes_per_instance = 10;
      c.vae_batch = 10;
      c.latent_dim = 2;
      c.tracking_rate = 1.0;
      c.probe_updates = 1;
      c.epsilon_start = 1.0;
      c.test_instances = 10;
      c.reward_scale = 0.01;
      // at 1 the normalized probe reward drowns the -0.1 step penalty
      c.dyna_probe_weight = 0.01;
      break;
    case env::Domain::acrobot:
      c.probe_steps = 5;
      c.instances = 500;
      c.episodes_per_instance = 8;
      c.vae_batch = 64;
      c.latent_dim = 2;
      c.tracking_rate = 0.005;
      c.probe_updates = 10;
      c.epsilon_start = 1.0;
      c.test_instances = 5;
      c.reward_scale = 1.0;
      break;
    case env::Domain::hiv:
      c.probe_steps = 8;
      c.instances = 500;
      c.episodes_per_instance = 5;
      c.vae_batch = 64;
      c.latent_dim = 6;
      c.tracking_rate = 1.0;
      c.probe_updates = 1;
      c.epsilon_start = 0.3;
      c.test_instances = 5;
      c.reward_scale = 1e-6;
      break;
  }
  // the encoder entropy penalty has no published weight; 0.5 keeps the
  // posterior variance bounded (at 1 it cancels the KL log-variance term)
  c.entropy_weight = 0.5;
  c.encoder_width = 300;
  c.decoder_width = 256;
  c.probe_hidden = {32, 32, 32};
  c.q_hidden = {256, 512};
  if (scale == Scale::desk) {
    const int full_episodes = c.total_episodes();
    c.encoder_width /= 4;
    c.decoder_width /= 4;
    c.probe_hidden = quarter(c.probe_hidden);
    c.q_hidden = quarter(c.q_hidden);
    switch (domain) {
      case env::Domain::nav2d:
      case env::Domain::nav2d_switch:
        c.instances = 200;
        c.test_instances = 4;
        break;
      case env::Domain::acrobot:
        c.instances = 50;
        c.test_instances = 2;
        break;
      case env::Domain::hiv:
        c.instances = 40;
        c.test_instances = 2;
        break;
    }
    // A 5x shorter budget needs faster learners: denser DDQN updates, a
    // shorter horizon, faster target tracking, quicker VAE and probe, and a
    // replay buffer covering the same fraction of training as at full scale.
    c.train_every = 2;
    c.gamma = 0.95;
    c.target_rate = 1e-2;
    c.vae_learning_rate = 1e-3;
    c.probe_learning_rate = 5e-3;
    c.replay_capacity = 100000LL * c.total_episodes() / full_episodes;
  }
  return c;
}

void validate(const TrainConfig& c) {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  if (c.instances < 1) fail("instances must be >= 1");
  if (c.episodes_per_instance < 1) fail("episodes_per_instance must be >= 1");
  if (c.test_instances < 1) fail("test_instances must be >= 1");
  const auto info = env::domain_info(c.domain);
  const bool needs_tp = uses_vae(c.method) || c.method == Method::maml_fo;
  if (needs_tp && c.probe_steps < 1) fail("probe_steps (T_p) must be >= 1 for " + std::string(to_string(c.method)));
  if (c.probe_steps >= info.max_steps) fail("probe_steps must be shorter than the episode cap");
  if (c.latent_dim < 1) fail("latent_dim must be >= 1");
  if (c.encoder_width < 1 || c.decoder_width < 1) fail("network widths must be positive");
  for (int w : c.probe_hidden)
    if (w < 1) fail("probe_hidden widths must be positive");
  for (int w : c.q_hidden)
    if (w < 1) fail("q_hidden widths must be positive");
  if (c.beta < 0 || c.entropy_weight < 0) fail("beta and entropy_weight must be >= 0");
  if (c.tracking_rate < 0 || c.tracking_rate > 1) fail("tracking_rate must lie in [0, 1]");
  if (c.vae_batch < 1 || c.vae_minibatches < 1) fail("vae batch settings must be positive");
  if (c.probe_updates < 1) fail("probe_updates must be >= 1");
  if (c.q_batch < 1 || c.train_every < 1) fail("q batch settings must be positive");
  if (!(c.epsilon_end > 0 && c.epsilon_end <= c.epsilon_start && c.epsilon_start <= 1))
    fail("need 0 < epsilon_end <= epsilon_start <= 1");
  if (c.gamma < 0 || c.gamma > 1) fail("gamma must lie in [0, 1]");
  if (c.replay_capacity < c.q_batch) fail("replay_capacity must hold at least one batch");
  if (c.reward_scale <= 0) fail("reward_scale must be positive");
  if (c.epopt_rollouts < 1 || c.epopt_percentile <= 0 || c.epopt_percentile > 100)
    fail("epopt settings out of range");
  if (c.dyna_probe_weight < 0) fail("dyna_probe_weight must be >= 0");
}

// Keys are listed once here; both directions go through this table.
#define SEPT_CONFIG_FIELDS(X)      \
  X(seed)                          \
  X(instances)                     \
  X(episodes_per_instance)         \
  X(probe_steps)                   \
  X(latent_dim)                    \
  X(test_instances)                \
  X(encoder_width)                 \
  X(decoder_width)                 \
  X(beta)                          \
  X(entropy_weight)                \
  X(vae_learning_rate)             \
  X(vae_batch)                     \
  X(vae_minibatches)               \
  X(tracking_rate)                 \
  X(probe_hidden)                  \
  X(probe_learning_rate)           \
  X(probe_updates)                 \
  X(q_hidden)                      \
  X(q_learning_rate)               \
  X(q_clip_norm)                   \
  X(gamma)                         \
  X(target_rate)                   \
  X(q_batch)                       \
  X(train_every)                   \
  X(reward_scale)                  \
  X(epsilon_start)                 \
  X(epsilon_end)                   \
  X(replay_capacity)               \
  X(train_latent_sample)           \
  X(test_latent_sample)            \
  X(maml_inner_learning_rate)      \
  X(epopt_rollouts)                \
  X(epopt_percentile)              \
  X(dyna_probe_weight)

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["domain"] = std::string(env::to_string(c.domain));
  j["method"] = std::string(to_string(c.method));
  j["scale"] = std::string(to_string(c.scale));
#define X(name) j[#name] = c.name;
  SEPT_CONFIG_FIELDS(X)
#undef X
  return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  if (!j.contains("schema_version") || j.at("schema_version") != kConfigSchemaVersion)
    throw std::invalid_argument("config: schema_version must be " + std::to_string(kConfigSchemaVersion));
  std::set<std::string> known{"schema_version", "domain", "method", "scale"};
#define X(name) known.insert(#name);
  SEPT_CONFIG_FIELDS(X)
#undef X
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw std::invalid_argument("config: unknown key '" + key + "'");

  auto get_str = [&](const char* key, const char* fallback) {
    return j.contains(key) ? j.at(key).get<std::string>() : std::string(fallback);
  };
  TrainConfig c = preset(env::parse_domain(get_str("domain", "nav2d")), parse_method(get_str("method", "sept")),
                         parse_scale(get_str("scale", "desk")));
  try {
#define X(name) \
  if (j.contains(#name)) j.at(#name).get_to(c.name);
    SEPT_CONFIG_FIELDS(X)
#undef X
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  validate(c);
  return c;
}

}  // namespace sept::algo
