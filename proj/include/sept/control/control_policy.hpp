#pragma once

// Latent-conditioned double DQN with proportional prioritized replay.
//
// The Q-network input is [s; c] where c is the conditioning vector: the latent
// estimate for SEPT, the true z for Oracle, (z_hat, eta) for DynaSEPT, empty
// for Avg/EPOpt/MAML.

#include <cstddef>
#include <vector>

#include "sept/core/random.hpp"
#include "sept/nn/adam.hpp"
#include "sept/nn/network.hpp"

namespace sept::control {

/// Binary sum tree over a fixed number of leaves.
class SumTree {
 public:
  explicit SumTree(std::size_t capacity);

  std::size_t capacity() const { return capacity_; }
  void set(std::size_t index, double priority);
  double get(std::size_t index) const { return nodes_[leaf_base_ + index]; }
  double total() const { return nodes_[1]; }
  /// Leaf whose cumulative range contains `mass` (0 <= mass < total).
  std::size_t find(double mass) const;

 private:
  std::size_t capacity_;
  std::size_t leaf_base_;
  std::vector<double> nodes_;  // 1-based heap layout
};

struct Transition {
  std::vector<float> input;       // [s; c]
  int action = 0;
  float reward = 0.0f;
  std::vector<float> next_input;  // [s'; c']
  bool done = false;
};

struct ReplayConfig {
  std::size_t capacity = 100000;
  double priority_exponent = 0.6;
  double is_exponent_start = 0.4;
  double is_exponent_end = 1.0;
  double priority_floor = 1e-6;
};

struct ReplaySample {
  std::vector<std::size_t> indices;
  std::vector<double> weights;  // importance weights normalized by the batch max
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(const ReplayConfig& config = {});

  /// New transitions get the largest priority seen so far.
  void push(Transition t);
  std::size_t size() const { return size_; }
  const ReplayConfig& config() const { return config_; }
  const Transition& operator[](std::size_t i) const { return items_[i]; }
  /// Stratified proportional sampling.
  ReplaySample sample(std::size_t batch, double is_exponent, Rng& rng) const;
  /// `td_error` magnitudes; stored priority is (|td| + floor)^exponent.
  void update_priorities(const std::vector<std::size_t>& indices, const std::vector<double>& td_errors);
  double priority(std::size_t i) const { return tree_.get(i); }
  double total_priority() const { return tree_.total(); }

 private:
  ReplayConfig config_;
  SumTree tree_;
  std::vector<Transition> items_;
  std::size_t next_ = 0;
  std::size_t size_ = 0;
  double max_priority_ = 1.0;
};

struct QConfig {
  std::vector<int> hidden{256, 512};
  double learning_rate = 1e-3;
  double clip_norm = 2.5;
  double gamma = 0.99;
  double target_rate = 5e-3;
  int batch_size = 32;
  int train_every = 10;
  double huber_delta = 1.0;
  /// Multiplies environment rewards before they enter the replay buffer.
  double reward_scale = 1.0;
  /// Training steps over which the IS exponent anneals to its end value.
  long long is_anneal_steps = 10000;
};

nn::NetworkSpec make_q_spec(int input_dim, int action_count, const std::vector<int>& hidden);

struct QLearner {
  QConfig config;
  nn::NetworkSpec spec;
  nn::ParameterSet<float> online;
  nn::ParameterSet<float> target;
  nn::AdamState<float> adam;
  long long env_steps = 0;
  long long train_steps = 0;
};

QLearner make_q_learner(int input_dim, int action_count, const QConfig& config, Rng& rng);

/// Concatenates state and conditioning vector into one network input.
std::vector<float> q_input(const std::vector<double>& state, const std::vector<double>& cond);

std::vector<double> q_values(const QLearner& learner, const std::vector<float>& input);

/// Index of the largest value; ties go to the lowest index.
int argmax_lowest(const std::vector<double>& values);

int act_epsilon_greedy(const QLearner& learner, const std::vector<float>& input, double epsilon, Rng& rng);

/// eps_start * (eps_end / eps_start)^(n / N); clamps n to [0, N].
double epsilon_schedule(long long episode, double eps_start, double eps_end, long long total_episodes);

/// Double-DQN targets r + gamma (1 - done) Q_target(s', argmax_a Q_online(s', a)).
/// Q matrices are |A| x B.
template <typename T>
std::vector<double> ddqn_targets(const nn::Matrix<T>& q_online_next, const nn::Matrix<T>& q_target_next,
                                 const std::vector<double>& rewards, const std::vector<bool>& dones, double gamma);

struct QLossResult {
  double loss = 0.0;
  std::vector<double> td_errors;  // Q(s, a) - y
};

/// Importance-weighted Huber loss averaged over the batch. `inputs` is
/// in_dim x B. When `grads` is non-null it receives d loss / d params.
template <typename T>
QLossResult q_loss(const nn::NetworkSpec& spec, const nn::ParameterSet<T>& params, const nn::Matrix<T>& inputs,
                   const std::vector<int>& actions, const std::vector<double>& targets,
                   const std::vector<double>& weights, double huber_delta, nn::ParameterSet<T>* grads);

struct TrainReport {
  double loss = 0.0;
  std::vector<std::size_t> indices;
  std::vector<double> td_errors;
};

/// One prioritized DDQN minibatch step plus soft target update. Throws
/// std::invalid_argument if the buffer holds fewer than batch_size items.
TrainReport ddqn_train_step(QLearner& learner, ReplayBuffer& buffer, Rng& rng);

/// Stores the transition (reward scaled) and trains every `train_every`
/// environment steps once the buffer holds a full batch. Returns true when a
/// training step ran.
bool observe(QLearner& learner, ReplayBuffer& buffer, Transition t, Rng& rng);

}  // namespace sept::control
