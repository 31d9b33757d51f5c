#include "sept/probe/probe_policy.hpp"

#include <cmath>
#include <stdexcept>

namespace sept::probe {

nn::NetworkSpec make_probe_spec(int state_dim, int action_count, const std::vector<int>& hidden) {
  return nn::mlp_spec(state_dim, hidden, action_count, nn::Activation::relu, nn::Activation::softmax);
}

double ReturnNormalizer::normalize(double value) {
  if (!std::isfinite(value)) return 0.0;
  values_.push_back(value);
  while (values_.size() > window_) values_.pop_front();
  if (values_.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : values_) mean += v;
  mean /= static_cast<double>(values_.size());
  double var = 0.0;
  for (double v : values_) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values_.size());
  const double sd = std::sqrt(var);
  if (sd < 1e-8 * std::max(1.0, std::abs(mean))) return 0.0;
  return (value - mean) / sd;
}

ProbeLearner make_probe_learner(int state_dim, int action_count, const ProbeConfig& config, Rng& rng) {
  if (config.updates_per_episode < 1) throw std::invalid_argument("probe: updates_per_episode must be >= 1");
  ProbeLearner l;
  l.config = config;
  l.spec = make_probe_spec(state_dim, action_count, config.hidden);
  l.params = nn::init_parameters<float>(l.spec, rng);
  nn::AdamConfig ac;
  ac.learning_rate = config.learning_rate;
  l.adam = nn::make_adam(l.params, ac);
  l.normalizer = ReturnNormalizer(config.return_window);
  return l;
}

template <typename T>
nn::Vector<T> action_probabilities(const nn::NetworkSpec& spec, const nn::ParameterSet<T>& params,
                                   const std::vector<double>& observation) {
  nn::Matrix<T> x(static_cast<int>(observation.size()), 1);
  for (std::size_t i = 0; i < observation.size(); ++i) x(static_cast<int>(i), 0) = static_cast<T>(observation[i]);
  return nn::predict(spec, params, x).col(0);
}

int sample_categorical(const std::vector<double>& probs, Rng& rng) {
  const double u = uniform(rng, 0.0, 1.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

template <typename T>
nn::ParameterSet<T> log_prob_gradient(const nn::NetworkSpec& spec, const nn::ParameterSet<T>& params,
                                      const nn::Matrix<T>& states, const std::vector<int>& actions) {
  if (states.cols() != static_cast<Eigen::Index>(actions.size()))
    throw std::invalid_argument("log_prob_gradient: one action per state column");
  auto fwd = nn::forward(spec, params, nn::Sequence<T>{states});
  const auto& p = fwd.outputs[0];
  nn::Matrix<T> g = nn::Matrix<T>::Zero(p.rows(), p.cols());
  // d log p_a / d p = onehot / p_a; the softmax backward turns this into onehot - p.
  for (std::size_t t = 0; t < actions.size(); ++t) g(actions[t], t) = T(1) / std::max(p(actions[t], t), T(1e-30));
  return nn::backward(spec, params, fwd.cache, nn::Sequence<T>{g}).grads;
}

void pad_trajectory(vae::Trajectory& traj, const std::vector<double>& last_state, int T_p) {
  if (traj.length() < T_p) traj.truncated = true;
  while (traj.length() < T_p) {
    traj.states.push_back(last_state);
    traj.actions.push_back(0);
  }
}

ProbeRollout probe_rollout(const ProbeLearner& learner, const env::InstanceSpec& instance,
                           const env::EnvState& start, int T_p, Rng& rng) {
  if (T_p < 1) throw std::invalid_argument("probe_rollout: T_p must be positive");
  ProbeRollout out;
  env::EnvState s = start;
  for (int t = 0; t < T_p && !s.done; ++t) {
    const auto p = action_probabilities(learner.spec, learner.params, s.observation);
    std::vector<double> probs(p.data(), p.data() + p.size());
    const int a = sample_categorical(probs, rng);
    out.record.trajectory.states.push_back(s.observation);
    out.record.trajectory.actions.push_back(a);
    out.record.log_probs.push_back(std::log(std::max(probs[a], 1e-300)));
    auto r = env::step(instance, s, a);
    out.trace.rewards.push_back(r.reward);
    out.trace.solved = out.trace.solved || r.solved;
    s = std::move(r.next_state);
  }
  out.record.real_steps = out.record.trajectory.length();
  pad_trajectory(out.record.trajectory, s.observation, T_p);
  out.trace.done = s.done;
  out.trace.final_state = std::move(s);
  return out;
}

double probe_return(const vae::VaeSpecs& specs, const vae::VaeModel<float>& model, const vae::Trajectory& traj,
                    double beta) {
  Rng rng(splitmix64(vae::trajectory_hash(traj)));
  return vae::elbo(specs, model, traj, beta, rng);
}

ReinforceReport reinforce_update(ProbeLearner& learner, const ProbeRecord& record) {
  ReinforceReport rep;
  rep.normalized_return = learner.normalizer.normalize(record.probe_return);
  if (rep.normalized_return == 0.0 || !std::isfinite(rep.normalized_return) || record.real_steps == 0) return rep;
  const int n = record.real_steps;
  const auto& traj = record.trajectory;
  nn::Matrix<float> states(learner.spec.input_dim, n);
  for (int t = 0; t < n; ++t)
    for (int i = 0; i < learner.spec.input_dim; ++i) states(i, t) = static_cast<float>(traj.states[t][i]);
  const std::vector<int> actions(traj.actions.begin(), traj.actions.begin() + n);
  for (int k = 0; k < learner.config.updates_per_episode; ++k) {
    auto g = log_prob_gradient(learner.spec, learner.params, states, actions);
    g.scale(static_cast<float>(-rep.normalized_return));  // Adam descends
    rep.applied = nn::adam_update(learner.params, std::move(g), learner.adam).applied || rep.applied;
  }
  return rep;
}

template nn::Vector<float> action_probabilities<float>(const nn::NetworkSpec&, const nn::ParameterSet<float>&,
                                                       const std::vector<double>&);
template nn::Vector<double> action_probabilities<double>(const nn::NetworkSpec&, const nn::ParameterSet<double>&,
                                                         const std::vector<double>&);
template nn::ParameterSet<float> log_prob_gradient<float>(const nn::NetworkSpec&, const nn::ParameterSet<float>&,
                                                          const nn::Matrix<float>&, const std::vector<int>&);
template nn::ParameterSet<double> log_prob_gradient<double>(const nn::NetworkSpec&, const nn::ParameterSet<double>&,
                                                            const nn::Matrix<double>&, const std::vector<int>&);

}  // namespace sept::probe
