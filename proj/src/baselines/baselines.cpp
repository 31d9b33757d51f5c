#include "sept/baselines/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>

#include "sept/nn/adam.hpp"

namespace sept::baselines {

using algo::EpisodeDriver;
using algo::EpisodeResult;
using algo::Method;
using algo::TrainConfig;
using algo::TrainedModel;

double totalvar_reward(const std::vector<std::vector<double>>& states, int T_p) {
  if (T_p < 2) throw std::invalid_argument("totalvar_reward: T_p must be >= 2");
  if (static_cast<int>(states.size()) < T_p) throw std::invalid_argument("totalvar_reward: fewer than T_p states");
  double sum = 0.0;
  for (int t = 0; t + 1 < T_p; ++t) {
    if (states[t].size() != states[t + 1].size()) throw std::invalid_argument("totalvar_reward: ragged states");
    for (std::size_t i = 0; i < states[t].size(); ++i) sum += std::abs(states[t + 1][i] - states[t][i]);
  }
  return sum / T_p;
}

DynaStep dynasept_step(DynaState& state, const std::vector<double>& log_variance, double probe_reward,
                       double env_reward) {
  if (log_variance.empty()) throw std::invalid_argument("dynasept_step: empty posterior");
  if (state.sigma_max.empty()) state.sigma_max.assign(log_variance.size(), 0.0);
  if (state.sigma_max.size() != log_variance.size()) throw std::invalid_argument("dynasept_step: dimension changed");
  double ratio = 0.0;
  for (std::size_t i = 0; i < log_variance.size(); ++i) {
    const double sigma = std::exp(0.5 * log_variance[i]);
    state.sigma_max[i] = std::max(state.sigma_max[i], sigma);
    ratio += state.sigma_max[i] > 0 ? sigma / state.sigma_max[i] : 1.0;
  }
  state.eta = ratio / static_cast<double>(log_variance.size());
  return {state.eta, state.eta * probe_reward + (1.0 - state.eta) * env_reward};
}

std::vector<std::size_t> epopt_select(const std::vector<double>& returns, double percentile) {
  if (!(percentile > 0 && percentile <= 100)) throw std::invalid_argument("epopt_select: percentile out of range");
  std::vector<std::size_t> idx(returns.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return returns[a] < returns[b]; });
  const auto keep = static_cast<std::size_t>(std::ceil(percentile / 100.0 * static_cast<double>(returns.size()) - 1e-9));
  idx.resize(std::min(keep, idx.size()));
  return idx;
}

namespace {

nn::Matrix<float> stack(const std::vector<control::Transition>& batch, bool next) {
  const auto& first = next ? batch.front().next_input : batch.front().input;
  nn::Matrix<float> m(static_cast<Eigen::Index>(first.size()), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& v = next ? batch[b].next_input : batch[b].input;
    for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) = v[i];
  }
  return m;
}

int greedy(const nn::NetworkSpec& spec, const nn::ParameterSet<float>& params, const std::vector<float>& input) {
  const nn::Matrix<float> x = Eigen::Map<const nn::Matrix<float>>(input.data(), static_cast<Eigen::Index>(input.size()), 1);
  const nn::Matrix<float> q = nn::predict(spec, params, x);
  return control::argmax_lowest(std::vector<double>(q.data(), q.data() + q.size()));
}

int epsilon_greedy(const nn::NetworkSpec& spec, const nn::ParameterSet<float>& params, const std::vector<float>& input,
                   double eps, int action_count, Rng& rng) {
  if (uniform(rng, 0.0, 1.0) < eps) return uniform_index(rng, action_count);
  return greedy(spec, params, input);
}

control::Transition scaled(control::Transition t, double scale) {
  t.reward = static_cast<float>(t.reward * scale);
  return t;
}

void record(algo::TrainingLog& log, const EpisodeResult& r) {
  log.returns.push_back(r.cumulative_reward);
  log.probe_returns.push_back(0.0);
  log.steps.push_back(r.steps_to_solve);
  log.solved.push_back(r.solved ? 1 : 0);
}

std::vector<double> with_eta(const std::vector<double>& z, double eta) {
  auto c = z;
  c.push_back(eta);
  return c;
}

std::vector<double> as_doubles(const nn::Matrix<float>& m) { return {m.data(), m.data() + m.size()}; }

// ---- Avg / Oracle -------------------------------------------------------

TrainedModel train_plain(const TrainConfig& c) {
  auto s = algo::make_streams(c.seed);
  TrainedModel m = algo::init_model(c, s.init);
  control::ReplayBuffer replay(algo::replay_config(c));
  const long long total = c.total_episodes();
  long long episode = 0;
  for (int i = 0; i < c.instances; ++i) {
    const auto instance = env::sample_instance(c.domain, env::Split::train, s.instances);
    for (int e = 0; e < c.episodes_per_instance; ++e, ++episode) {
      EpisodeDriver d(instance, s.env);
      const double eps = control::epsilon_schedule(episode, c.epsilon_start, c.epsilon_end, total);
      if (c.method == Method::oracle)
        algo::run_control(m.q, &replay, d, [&](int t) { return env::effective_z(instance, t); }, eps, s.act, s.learn);
      else
        algo::run_control(m.q, &replay, d, [](int) { return std::vector<double>{}; }, eps, s.act, s.learn);
      record(m.log, d.result());
    }
  }
  return m;
}

// ---- EPOpt-adv ----------------------------------------------------------

TrainedModel train_epopt(const TrainConfig& c) {
  auto s = algo::make_streams(c.seed);
  TrainedModel m = algo::init_model(c, s.init);
  control::ReplayBuffer replay(algo::replay_config(c));
  const int action_count = env::domain_info(c.domain).action_count;
  const long long total = c.total_episodes();
  const int iterations = (c.total_episodes() + c.epopt_rollouts - 1) / c.epopt_rollouts;
  long long episode = 0;
  for (int it = 0; it < iterations; ++it) {
    std::vector<std::vector<control::Transition>> rollouts;
    std::vector<double> returns;
    long long steps = 0;
    for (int k = 0; k < c.epopt_rollouts; ++k, ++episode) {
      const auto instance = env::sample_instance(c.domain, env::Split::train, s.instances);
      EpisodeDriver d(instance, s.env);
      const double eps = control::epsilon_schedule(episode, c.epsilon_start, c.epsilon_end, total);
      std::vector<control::Transition> tr;
      while (!d.done()) {
        auto input = control::q_input(d.observation(), {});
        const int a = epsilon_greedy(m.q.spec, m.q.online, input, eps, action_count, s.act);
        const bool terminal = d.act(a);
        tr.push_back({std::move(input), a, static_cast<float>(d.last_reward()), control::q_input(d.observation(), {}),
                      terminal});
      }
      steps += static_cast<long long>(tr.size());
      returns.push_back(d.result().cumulative_reward);
      rollouts.push_back(std::move(tr));
      record(m.log, d.result());
    }
    for (auto k : epopt_select(returns, c.epopt_percentile))
      for (auto& t : rollouts[k]) replay.push(scaled(std::move(t), c.reward_scale));
    // as many minibatch steps as a regular learner would take on the same
    // number of environment steps
    m.q.env_steps += steps;
    const long long train_steps = steps / c.train_every;
    for (long long k = 0; k < train_steps; ++k)
      if (replay.size() >= static_cast<std::size_t>(c.q_batch)) control::ddqn_train_step(m.q, replay, s.learn);
  }
  return m;
}

// ---- MAML (first order) -------------------------------------------------

struct MamlEpisode {
  std::vector<control::Transition> adaptation;
  std::vector<control::Transition> query;
};

void maml_meta_step(control::QLearner& q, const std::deque<MamlEpisode>& store, double inner_lr, int batch_size,
                    Rng& rng) {
  const auto& ep = store[static_cast<std::size_t>(uniform_index(rng, static_cast<int>(store.size())))];
  const auto adapted = maml_adapt(q, ep.adaptation, inner_lr);
  const auto& pool = ep.query.empty() ? ep.adaptation : ep.query;
  std::vector<control::Transition> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  for (int b = 0; b < batch_size; ++b) batch.push_back(pool[static_cast<std::size_t>(uniform_index(rng, static_cast<int>(pool.size())))]);
  nn::ParameterSet<float> g;
  td_loss(q, adapted, batch, &g);
  // first order: the gradient at the adapted parameters is applied to the
  // pre-adaptation parameters
  nn::adam_update(q.online, std::move(g), q.adam);
  nn::soft_update(q.target, q.online, q.config.target_rate);
  ++q.train_steps;
}

TrainedModel train_maml(const TrainConfig& c) {
  auto s = algo::make_streams(c.seed);
  TrainedModel m = algo::init_model(c, s.init);
  const int action_count = env::domain_info(c.domain).action_count;
  std::deque<MamlEpisode> store;
  const std::size_t store_capacity = 1000;
  const long long total = c.total_episodes();
  long long episode = 0;
  for (int i = 0; i < c.instances; ++i) {
    const auto instance = env::sample_instance(c.domain, env::Split::train, s.instances);
    for (int e = 0; e < c.episodes_per_instance; ++e, ++episode) {
      EpisodeDriver d(instance, s.env);
      const double eps = control::epsilon_schedule(episode, c.epsilon_start, c.epsilon_end, total);
      MamlEpisode ep;
      auto run = [&](const nn::ParameterSet<float>& params, std::vector<control::Transition>& out, int limit) {
        for (int t = 0; t < limit && !d.done(); ++t) {
          auto input = control::q_input(d.observation(), {});
          const int a = epsilon_greedy(m.q.spec, params, input, eps, action_count, s.act);
          const bool terminal = d.act(a);
          out.push_back(scaled({std::move(input), a, static_cast<float>(d.last_reward()),
                                control::q_input(d.observation(), {}), terminal},
                               c.reward_scale));
        }
      };
      run(m.q.online, ep.adaptation, c.probe_steps);
      if (!d.done()) {
        const auto adapted = maml_adapt(m.q, ep.adaptation, c.maml_inner_learning_rate);
        run(adapted, ep.query, d.cap());
      }
      const long long steps = static_cast<long long>(ep.adaptation.size() + ep.query.size());
      store.push_back(std::move(ep));
      if (store.size() > store_capacity) store.pop_front();
      for (long long k = 0; k < steps; ++k)
        if (++m.q.env_steps % c.train_every == 0)
          maml_meta_step(m.q, store, c.maml_inner_learning_rate, c.q_batch, s.learn);
      record(m.log, d.result());
    }
  }
  return m;
}

// ---- SEPT-NP ------------------------------------------------------------

TrainedModel train_sept_np(const TrainConfig& c) {
  auto s = algo::make_streams(c.seed);
  TrainedModel m = algo::init_model(c, s.init);
  control::ReplayBuffer replay(algo::replay_config(c));
  vae::TrajectoryBuffer D;
  const long long total = c.total_episodes();
  long long episode = 0;
  for (int i = 0; i < c.instances; ++i) {
    const auto instance = env::sample_instance(c.domain, env::Split::train, s.instances);
    for (int e = 0; e < c.episodes_per_instance; ++e, ++episode) {
      EpisodeDriver d(instance, s.env);
      const double eps = control::epsilon_schedule(episode, c.epsilon_start, c.epsilon_end, total);
      const auto z0 = m.latent_rolling_mean;
      // the control policy itself generates the first T_p steps
      vae::Trajectory traj;
      std::vector<control::Transition> pending;
      for (int t = 0; t < c.probe_steps && !d.done(); ++t) {
        auto input = control::q_input(d.observation(), z0);
        const int a = control::act_epsilon_greedy(m.q, input, eps, s.act);
        traj.states.push_back(d.observation());
        traj.actions.push_back(a);
        const bool terminal = d.act(a);
        pending.push_back({std::move(input), a, static_cast<float>(d.last_reward()), control::q_input(d.observation(), z0),
                           terminal});
      }
      probe::pad_trajectory(traj, d.observation(), c.probe_steps);
      D.push(traj);
      vae::vae_train_step(*m.vae, D, s.learn);
      vae::polyak_update(*m.vae);
      const auto z_hat = algo::estimate_latent(*m.vae, traj, c.train_latent_sample, s.learn);
      ++m.latent_estimates;
      for (std::size_t k = 0; k < z_hat.size(); ++k)
        m.latent_rolling_mean[k] += (z_hat[k] - m.latent_rolling_mean[k]) / static_cast<double>(m.latent_estimates);
      // the last probe-phase transition leads into the re-conditioned state
      if (!pending.empty()) pending.back().next_input = control::q_input(d.observation(), z_hat);
      for (auto& t : pending) control::observe(m.q, replay, std::move(t), s.learn);
      algo::run_control(m.q, &replay, d, [&](int) -> const std::vector<double>& { return z_hat; }, eps, s.act, s.learn);
      record(m.log, d.result());
    }
  }
  return m;
}

// ---- DynaSEPT -----------------------------------------------------------

struct DynaWindow {
  std::deque<std::vector<double>> states;
  std::deque<int> actions;

  void push(const std::vector<double>& s, int a, int T_p) {
    states.push_back(s);
    actions.push_back(a);
    if (static_cast<int>(actions.size()) > T_p) {
      states.pop_front();
      actions.pop_front();
    }
  }
  vae::Trajectory trajectory() const { return {{states.begin(), states.end()}, {actions.begin(), actions.end()}, false}; }
};

TrainedModel train_dynasept(const TrainConfig& c) {
  auto s = algo::make_streams(c.seed);
  TrainedModel m = algo::init_model(c, s.init);
  control::ReplayBuffer replay(algo::replay_config(c));
  vae::TrajectoryBuffer D;
  auto& v = *m.vae;
  const long long total = c.total_episodes();
  long long episode = 0;
  DynaState dyna;
  for (int i = 0; i < c.instances; ++i) {
    const auto instance = env::sample_instance(c.domain, env::Split::train, s.instances);
    for (int e = 0; e < c.episodes_per_instance; ++e, ++episode) {
      EpisodeDriver d(instance, s.env);
      const double eps = control::epsilon_schedule(episode, c.epsilon_start, c.epsilon_end, total);
      std::vector<double> z(static_cast<std::size_t>(c.latent_dim), 0.0);
      dyna.eta = 1.0;
      DynaWindow window;
      double probe_sum = 0.0;
      while (!d.done()) {
        auto input = control::q_input(d.observation(), with_eta(z, dyna.eta));
        const int a = control::act_epsilon_greedy(m.q, input, eps, s.act);
        window.push(d.observation(), a, c.probe_steps);
        const bool terminal = d.act(a);
        double reward = d.last_reward();
        if (static_cast<int>(window.actions.size()) == c.probe_steps) {
          const auto traj = window.trajectory();
          D.push(traj);
          const double elbo = probe::probe_return(v.specs, v.target, traj, c.beta);
          probe_sum += elbo;
          // probe reward in raw environment units so reward_scale applies uniformly
          const double r_p = c.dyna_probe_weight * m.dyna_normalizer.normalize(elbo) / c.reward_scale;
          const auto post = vae::encode(v.specs, v.online, traj);
          const auto step = dynasept_step(dyna, as_doubles(post.log_variance), r_p, reward);
          reward = step.total_reward;
          z = c.train_latent_sample ? as_doubles(vae::sample_latent(post, s.learn)) : as_doubles(post.mean);
        }
        auto next = control::q_input(d.observation(), with_eta(z, dyna.eta));
        control::observe(m.q, replay, {std::move(input), a, static_cast<float>(reward), std::move(next), terminal}, s.learn);
      }
      if (!D.empty()) {
        vae::vae_train_step(v, D, s.learn);
        vae::polyak_update(v);
      }
      record(m.log, d.result());
      m.log.probe_returns.back() = probe_sum;
    }
  }
  m.sigma_max = dyna.sigma_max;
  return m;
}

}  // namespace

double td_loss(const control::QLearner& q, const nn::ParameterSet<float>& params,
               const std::vector<control::Transition>& batch, nn::ParameterSet<float>* grads) {
  if (batch.empty()) throw std::invalid_argument("td_loss: empty batch");
  const auto x = stack(batch, false);
  const auto xn = stack(batch, true);
  const nn::Matrix<float> q_online_next = nn::predict(q.spec, params, xn);
  const nn::Matrix<float> q_target_next = nn::predict(q.spec, q.target, xn);
  std::vector<double> rewards;
  std::vector<bool> dones;
  std::vector<int> actions;
  for (const auto& t : batch) {
    rewards.push_back(t.reward);
    dones.push_back(t.done);
    actions.push_back(t.action);
  }
  const auto y = control::ddqn_targets(q_online_next, q_target_next, rewards, dones, q.config.gamma);
  const std::vector<double> w(batch.size(), 1.0);
  return control::q_loss(q.spec, params, x, actions, y, w, q.config.huber_delta, grads).loss;
}

nn::ParameterSet<float> maml_adapt(const control::QLearner& q, const std::vector<control::Transition>& adaptation,
                                   double inner_learning_rate) {
  nn::ParameterSet<float> g;
  td_loss(q, q.online, adaptation, &g);
  auto adapted = q.online;
  if (!g.all_finite()) return adapted;
  if (q.config.clip_norm > 0) nn::clip_global_norm(g, q.config.clip_norm);
  adapted.axpy(static_cast<float>(-inner_learning_rate), g);
  return adapted;
}

TrainedModel run_baseline(const TrainConfig& config) {
  algo::validate(config);
  switch (config.method) {
    case Method::avg:
    case Method::oracle: return train_plain(config);
    case Method::epopt_adv: return train_epopt(config);
    case Method::maml_fo: return train_maml(config);
    case Method::sept_np: return train_sept_np(config);
    case Method::dynasept: return train_dynasept(config);
    default:
      throw std::invalid_argument("run_baseline: " + std::string(algo::to_string(config.method)) +
                                  " is trained by the probe pipeline");
  }
}

EpisodeResult test_baseline(const TrainedModel& model, const env::InstanceSpec& instance, Rng& rng) {
  const auto& c = model.config;
  const auto& q = model.q;
  EpisodeDriver d(instance, rng);
  switch (c.method) {
    case Method::avg:
    case Method::epopt_adv: algo::run_greedy(q, d, [](int) { return std::vector<double>{}; }); break;
    case Method::oracle: algo::run_greedy(q, d, [&](int t) { return env::effective_z(instance, t); }); break;
    case Method::maml_fo: {
      // adaptation uses observed rewards; the adapted parameters are local
      // to this episode
      std::vector<control::Transition> adaptation;
      for (int t = 0; t < c.probe_steps && !d.done(); ++t) {
        auto input = control::q_input(d.observation(), {});
        const int a = greedy(q.spec, q.online, input);
        const bool terminal = d.act(a);
        adaptation.push_back(scaled({std::move(input), a, static_cast<float>(d.last_reward()),
                                     control::q_input(d.observation(), {}), terminal},
                                    c.reward_scale));
      }
      if (d.done()) break;
      const auto adapted = maml_adapt(q, adaptation, c.maml_inner_learning_rate);
      while (!d.done()) d.act(greedy(q.spec, adapted, control::q_input(d.observation(), {})));
      break;
    }
    case Method::sept_np: {
      const auto z0 = model.latent_rolling_mean;
      vae::Trajectory traj;
      for (int t = 0; t < c.probe_steps && !d.done(); ++t) {
        const int a = greedy(q.spec, q.online, control::q_input(d.observation(), z0));
        traj.states.push_back(d.observation());
        traj.actions.push_back(a);
        d.act(a);
      }
      probe::pad_trajectory(traj, d.observation(), c.probe_steps);
      const auto z_hat = algo::estimate_latent(*model.vae, traj, c.test_latent_sample, rng);
      algo::run_greedy(q, d, [&](int) -> const std::vector<double>& { return z_hat; });
      break;
    }
    case Method::dynasept: {
      const auto& v = *model.vae;
      DynaState dyna{model.sigma_max, 1.0};
      std::vector<double> z(static_cast<std::size_t>(c.latent_dim), 0.0);
      DynaWindow window;
      while (!d.done()) {
        const int a = greedy(q.spec, q.online, control::q_input(d.observation(), with_eta(z, dyna.eta)));
        window.push(d.observation(), a, c.probe_steps);
        d.act(a);
        if (static_cast<int>(window.actions.size()) == c.probe_steps) {
          const auto post = vae::encode(v.specs, v.online, window.trajectory());
          dynasept_step(dyna, as_doubles(post.log_variance), 0.0, 0.0);
          z = c.test_latent_sample ? as_doubles(vae::sample_latent(post, rng)) : as_doubles(post.mean);
        }
      }
      break;
    }
    default: throw std::invalid_argument("test_baseline: not a baseline method");
  }
  return d.result();
}

}  // namespace sept::baselines
