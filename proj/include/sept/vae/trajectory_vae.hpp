#pragma once

// beta-VAE over short probe trajectories.
//
// Encoder: BiLSTM over per-step inputs (s_t, onehot a_t), outputs mean-pooled
// over time, then one linear head producing [mean; log_variance] (2D rows).
// Decoder: LSTM over (s_t, onehot a_t, z) followed by a linear layer producing
// [mean; log_variance] of the next pair (s_{t+1}, onehot a_{t+1}).

#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <vector>

#include "sept/core/random.hpp"
#include "sept/nn/adam.hpp"
#include "sept/nn/network.hpp"

namespace sept::vae {

struct Trajectory {
  std::vector<std::vector<double>> states;  // T_p rows of |S|
  std::vector<int> actions;                 // T_p action indices
  bool truncated = false;                   // episode ended early, final state repeated

  int length() const { return static_cast<int>(actions.size()); }
};

/// Throws std::invalid_argument unless the trajectory has exactly `length`
/// steps with consistent state widths and in-range actions.
void check_trajectory(const Trajectory& traj, int length, int state_dim, int action_count);

/// FNV-1a over the raw state bytes and actions; seeds the probe-return sample.
std::uint64_t trajectory_hash(const Trajectory& traj);

struct VaeSpecs {
  int state_dim = 0;
  int action_count = 0;
  int latent_dim = 0;
  nn::NetworkSpec encoder;  // bilstm
  nn::NetworkSpec head;     // dense, 2D outputs
  nn::NetworkSpec decoder;  // lstm + dense, 2(|S|+|A|) outputs

  int pair_dim() const { return state_dim + action_count; }
};

VaeSpecs make_vae_specs(int state_dim, int action_count, int latent_dim, int encoder_width, int decoder_width);

template <typename T>
struct VaeModel {
  nn::ParameterSet<T> encoder;
  nn::ParameterSet<T> head;
  nn::ParameterSet<T> decoder;

  template <typename U>
  VaeModel<U> cast() const {
    return {encoder.template cast<U>(), head.template cast<U>(), decoder.template cast<U>()};
  }
};

template <typename T>
VaeModel<T> init_vae(const VaeSpecs& specs, Rng& rng);

/// Columns are trajectories.
template <typename T>
struct Posterior {
  nn::Matrix<T> mean;          // D x B
  nn::Matrix<T> log_variance;  // D x B
};

constexpr double kDecoderLogVarMin = -6.0;
constexpr double kDecoderLogVarMax = 4.0;

/// Per-step encoder inputs for a batch of equal-length trajectories.
template <typename T>
nn::Sequence<T> encoder_inputs(const VaeSpecs& specs, const std::vector<const Trajectory*>& batch);

template <typename T>
Posterior<T> encode(const VaeSpecs& specs, const VaeModel<T>& model, const std::vector<const Trajectory*>& batch);

template <typename T>
Posterior<T> encode(const VaeSpecs& specs, const VaeModel<T>& model, const Trajectory& traj);

/// mean + exp(log_variance / 2) * eps.
template <typename T>
nn::Matrix<T> reparameterize(const Posterior<T>& post, const nn::Matrix<T>& eps);

template <typename T>
nn::Matrix<T> sample_latent(const Posterior<T>& post, Rng& rng);

/// Closed-form KL(q || N(0, I)) per column.
template <typename T>
std::vector<double> kl_to_standard_normal(const Posterior<T>& post);

/// Differential entropy of the diagonal Gaussian per column.
template <typename T>
std::vector<double> gaussian_entropy(const Posterior<T>& post);

/// Sum over t = 1..T_p-1 of the decoder's diagonal Gaussian log-density of
/// the next (state, onehot action) pair; one value per trajectory column.
/// `z` is D x B. A length-1 trajectory scores 0.
template <typename T>
std::vector<double> decode_log_likelihood(const VaeSpecs& specs, const VaeModel<T>& model,
                                          const std::vector<const Trajectory*>& batch, const nn::Matrix<T>& z);

/// -beta * KL + log-likelihood using one reparameterized sample.
template <typename T>
double elbo(const VaeSpecs& specs, const VaeModel<T>& model, const Trajectory& traj, double beta, Rng& rng);

struct ObjectiveTerms {
  double loss = 0.0;  // mean over batch of -(loglik - beta KL) + entropy_weight * H
  double log_likelihood = 0.0;
  double kl = 0.0;
  double entropy = 0.0;
};

/// Batch objective with a fixed noise matrix `eps` (D x B). When `grads` is
/// non-null it receives d loss / d params.
template <typename T>
ObjectiveTerms vae_objective(const VaeSpecs& specs, const VaeModel<T>& model,
                             const std::vector<const Trajectory*>& batch, const nn::Matrix<T>& eps, double beta,
                             double entropy_weight, VaeModel<T>* grads);

/// FIFO ring of trajectories; the oldest entry is evicted at capacity.
class TrajectoryBuffer {
 public:
  explicit TrajectoryBuffer(std::size_t capacity = 1000);

  void push(Trajectory traj);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  const Trajectory& operator[](std::size_t i) const { return items_[i]; }
  /// Uniform draw without replacement when possible, otherwise with.
  std::vector<const Trajectory*> sample(std::size_t count, Rng& rng) const;

  void write(std::ostream& os) const;
  static TrajectoryBuffer read(std::istream& is);

 private:
  std::size_t capacity_;
  std::deque<Trajectory> items_;
};

struct VaeConfig {
  double beta = 1.0;
  double entropy_weight = 1.0;
  double learning_rate = 1e-4;
  int batch_size = 10;
  int minibatches = 10;
  double tracking_rate = 1.0;  // alpha for the target copy
};

/// Online model, slowly tracking target copy and optimizer state.
struct VaeLearner {
  VaeSpecs specs;
  VaeConfig config;
  VaeModel<float> online;
  VaeModel<float> target;
  nn::AdamState<float> adam_encoder;
  nn::AdamState<float> adam_head;
  nn::AdamState<float> adam_decoder;
};

VaeLearner make_vae_learner(const VaeSpecs& specs, const VaeConfig& config, Rng& rng);

/// Runs config.minibatches Adam steps on batches drawn from `buffer`; returns
/// the mean loss. Throws std::invalid_argument on an empty buffer.
double vae_train_step(VaeLearner& learner, const TrajectoryBuffer& buffer, Rng& rng);

/// target <- alpha * online + (1 - alpha) * target for every network.
void polyak_update(VaeLearner& learner);

}  // namespace sept::vae
