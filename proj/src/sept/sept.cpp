#include "sept/sept/sept.hpp"

#include <cmath>
#include <stdexcept>

#include "sept/baselines/baselines.hpp"

namespace sept::algo {

int condition_dim(const TrainConfig& c) {
  switch (c.method) {
    case Method::sept:
    case Method::totalvar:
    case Method::maxent:
    case Method::sept_np: return c.latent_dim;
    case Method::dynasept: return c.latent_dim + 1;
    case Method::oracle: return env::domain_info(c.domain).z_dim;
    case Method::avg:
    case Method::epopt_adv:
    case Method::maml_fo: return 0;
  }
  return 0;
}

vae::VaeConfig vae_config(const TrainConfig& c) {
  vae::VaeConfig v;
  v.beta = c.beta;
  v.entropy_weight = c.entropy_weight;
  v.learning_rate = c.vae_learning_rate;
  v.batch_size = c.vae_batch;
  v.minibatches = c.vae_minibatches;
  v.tracking_rate = c.tracking_rate;
  return v;
}

probe::ProbeConfig probe_config(const TrainConfig& c) {
  probe::ProbeConfig p;
  p.hidden = c.probe_hidden;
  p.learning_rate = c.probe_learning_rate;
  p.updates_per_episode = c.probe_updates;
  return p;
}

control::QConfig q_config(const TrainConfig& c) {
  control::QConfig q;
  q.hidden = c.q_hidden;
  q.learning_rate = c.q_learning_rate;
  q.clip_norm = c.q_clip_norm;
  q.gamma = c.gamma;
  q.target_rate = c.target_rate;
  q.batch_size = c.q_batch;
  q.train_every = c.train_every;
  q.reward_scale = c.reward_scale;
  return q;
}

control::ReplayConfig replay_config(const TrainConfig& c) {
  control::ReplayConfig r;
  r.capacity = static_cast<std::size_t>(c.replay_capacity);
  return r;
}

TrainedModel init_model(const TrainConfig& c, Rng& rng) {
  validate(c);
  const auto info = env::domain_info(c.domain);
  TrainedModel m{c, std::nullopt, std::nullopt,
                 control::make_q_learner(info.state_dim + condition_dim(c), info.action_count, q_config(c), rng)};
  if (uses_vae(c.method)) {
    const auto specs =
        vae::make_vae_specs(info.state_dim, info.action_count, c.latent_dim, c.encoder_width, c.decoder_width);
    m.vae = vae::make_vae_learner(specs, vae_config(c), rng);
  }
  if (uses_probe(c.method)) m.probe = probe::make_probe_learner(info.state_dim, info.action_count, probe_config(c), rng);
  if (c.method == Method::sept_np) m.latent_rolling_mean.assign(c.latent_dim, 0.0);
  return m;
}

RunStreams make_streams(std::uint64_t seed) {
  return {Rng(derive_seed(seed, "init")), Rng(derive_seed(seed, "instances")), Rng(derive_seed(seed, "env")),
          Rng(derive_seed(seed, "act")), Rng(derive_seed(seed, "learn"))};
}

probe::ProbeRecord run_probe(const probe::ProbeLearner& probe, EpisodeDriver& driver, int T_p, Rng& rng) {
  probe::ProbeRecord rec;
  for (int t = 0; t < T_p && !driver.done(); ++t) {
    const auto p = probe::action_probabilities(probe.spec, probe.params, driver.observation());
    const std::vector<double> probs(p.data(), p.data() + p.size());
    const int a = probe::sample_categorical(probs, rng);
    rec.trajectory.states.push_back(driver.observation());
    rec.trajectory.actions.push_back(a);
    rec.log_probs.push_back(std::log(std::max(probs[a], 1e-300)));
    driver.act(a);
  }
  rec.real_steps = rec.trajectory.length();
  probe::pad_trajectory(rec.trajectory, driver.observation(), T_p);
  return rec;
}

std::vector<double> estimate_latent(const vae::VaeLearner& vae, const vae::Trajectory& traj, bool sample, Rng& rng) {
  const auto post = vae::encode(vae.specs, vae.online, traj);
  const nn::Matrix<float> z = sample ? vae::sample_latent(post, rng) : post.mean;
  return std::vector<double>(z.data(), z.data() + z.size());
}

namespace {

double probe_objective(const TrainedModel& m, const probe::ProbeRecord& rec) {
  switch (m.config.method) {
    case Method::sept: return probe::probe_return(m.vae->specs, m.vae->target, rec.trajectory, m.config.beta);
    case Method::maxent: return -probe::probe_return(m.vae->specs, m.vae->target, rec.trajectory, m.config.beta);
    case Method::totalvar: return baselines::totalvar_reward(rec.trajectory.states, m.config.probe_steps);
    default: throw std::invalid_argument("probe_objective: method has no probe");
  }
}

void record(TrainingLog& log, const EpisodeDriver& d, double probe_value) {
  const auto& r = d.result();
  log.returns.push_back(r.cumulative_reward);
  log.probe_returns.push_back(probe_value);
  log.steps.push_back(r.steps_to_solve);
  log.solved.push_back(r.solved ? 1 : 0);
}

}  // namespace

TrainedModel train_probe_method(const TrainConfig& config) {
  if (!uses_probe(config.method))
    throw std::invalid_argument("train_probe_method: " + std::string(to_string(config.method)) + " has no probe");
  if (config.probe_steps < 1) throw std::invalid_argument("config: probe_steps (T_p) must be >= 1");
  auto s = make_streams(config.seed);
  TrainedModel m = init_model(config, s.init);
  control::ReplayBuffer replay(replay_config(config));
  vae::TrajectoryBuffer D;
  const long long total = config.total_episodes();
  long long episode = 0;
  for (int i = 0; i < config.instances; ++i) {
    const auto instance = env::sample_instance(config.domain, env::Split::train, s.instances);
    for (int e = 0; e < config.episodes_per_instance; ++e, ++episode) {
      EpisodeDriver d(instance, s.env);
      auto rec = run_probe(*m.probe, d, config.probe_steps, s.act);
      D.push(rec.trajectory);
      rec.probe_return = probe_objective(m, rec);
      probe::reinforce_update(*m.probe, rec);
      vae::vae_train_step(*m.vae, D, s.learn);
      vae::polyak_update(*m.vae);
      const auto z_hat = estimate_latent(*m.vae, rec.trajectory, config.train_latent_sample, s.learn);
      const double eps = control::epsilon_schedule(episode, config.epsilon_start, config.epsilon_end, total);
      run_control(m.q, &replay, d, [&](int) -> const std::vector<double>& { return z_hat; }, eps, s.act, s.learn);
      record(m.log, d, rec.probe_return);
    }
  }
  return m;
}

TrainedModel train(const TrainConfig& config) {
  validate(config);
  if (uses_probe(config.method)) return train_probe_method(config);
  return baselines::run_baseline(config);
}

EpisodeResult test_episode(const TrainedModel& model, const env::InstanceSpec& instance, Rng& rng) {
  const auto& c = model.config;
  if (instance.domain != c.domain) throw std::invalid_argument("test_episode: instance domain differs from the model's");
  if (!uses_probe(c.method)) return baselines::test_baseline(model, instance, rng);
  EpisodeDriver d(instance, rng);
  const auto rec = run_probe(*model.probe, d, c.probe_steps, rng);
  const auto z_hat = estimate_latent(*model.vae, rec.trajectory, c.test_latent_sample, rng);
  run_greedy(model.q, d, [&](int) -> const std::vector<double>& { return z_hat; });
  return d.result();
}

}  // namespace sept::algo
