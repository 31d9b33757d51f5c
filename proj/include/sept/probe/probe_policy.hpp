#pragma once

// Probe policy: a small softmax MLP run for the first T_p steps of every
// episode, trained by REINFORCE with the (target) VAE lower bound as return.

#include <cstddef>
#include <deque>
#include <vector>

#include "sept/core/random.hpp"
#include "sept/env/env_family.hpp"
#include "sept/nn/adam.hpp"
#include "sept/nn/network.hpp"
#include "sept/vae/trajectory_vae.hpp"

namespace sept::probe {

struct ProbeConfig {
  std::vector<int> hidden{32, 32, 32};
  double learning_rate = 1e-3;
  int updates_per_episode = 1;
  std::size_t return_window = 100;
};

nn::NetworkSpec make_probe_spec(int state_dim, int action_count, const std::vector<int>& hidden);

/// Running standardization over the most recent returns (current included).
class ReturnNormalizer {
 public:
  explicit ReturnNormalizer(std::size_t window = 100) : window_(window) {}
  /// Records `value` and returns (value - mean) / std over the window; 0 when
  /// the spread is degenerate or `value` is not finite (in which case it is
  /// not recorded).
  double normalize(double value);
  std::size_t size() const { return values_.size(); }
  const std::deque<double>& values() const { return values_; }
  void restore(std::deque<double> values) { values_ = std::move(values); }

 private:
  std::size_t window_;
  std::deque<double> values_;
};

struct ProbeLearner {
  ProbeConfig config;
  nn::NetworkSpec spec;
  nn::ParameterSet<float> params;
  nn::AdamState<float> adam;
  ReturnNormalizer normalizer;
};

ProbeLearner make_probe_learner(int state_dim, int action_count, const ProbeConfig& config, Rng& rng);

template <typename T>
nn::Vector<T> action_probabilities(const nn::NetworkSpec& spec, const nn::ParameterSet<T>& params,
                                   const std::vector<double>& observation);

/// Inverse-CDF draw from a probability vector.
int sample_categorical(const std::vector<double>& probs, Rng& rng);

/// Sum over steps of grad log pi(a_t | s_t). `states` is |S| x n, one column
/// per step.
template <typename T>
nn::ParameterSet<T> log_prob_gradient(const nn::NetworkSpec& spec, const nn::ParameterSet<T>& params,
                                      const nn::Matrix<T>& states, const std::vector<int>& actions);

struct ProbeRecord {
  vae::Trajectory trajectory;
  std::vector<double> log_probs;  // chosen actions, real steps only
  int real_steps = 0;             // < T_p when the episode ended during probing
  double probe_return = 0.0;
};

/// What the environment produced during a rollout. Kept apart from the
/// record so learners never have to see rewards.
struct EnvTrace {
  env::EnvState final_state;
  std::vector<double> rewards;
  bool solved = false;
  bool done = false;
};

struct ProbeRollout {
  ProbeRecord record;
  EnvTrace trace;
};

/// Samples T_p actions from the probe starting at `start`. If the episode ends
/// early the trajectory is padded with the final state (action 0) and marked
/// truncated.
ProbeRollout probe_rollout(const ProbeLearner& learner, const env::InstanceSpec& instance,
                           const env::EnvState& start, int T_p, Rng& rng);

/// Pads a partial trajectory up to `T_p` by repeating its last state.
void pad_trajectory(vae::Trajectory& traj, const std::vector<double>& last_state, int T_p);

/// ELBO of `traj` under the given (target) VAE, with the latent sample seeded
/// by the trajectory hash so equal inputs give equal returns.
double probe_return(const vae::VaeSpecs& specs, const vae::VaeModel<float>& model, const vae::Trajectory& traj,
                    double beta);

struct ReinforceReport {
  double normalized_return = 0.0;
  bool applied = false;
};

/// Normalizes `record.probe_return` and takes config.updates_per_episode Adam
/// steps ascending normalized_return * sum_t log pi(a_t|s_t). Skipped when the
/// normalized return is zero or non-finite.
ReinforceReport reinforce_update(ProbeLearner& learner, const ProbeRecord& record);

}  // namespace sept::probe
