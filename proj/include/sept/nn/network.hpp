#pragma once

// Dense and recurrent function approximators with hand-written reverse mode.
//
// Data layout: every activation is a (features x batch) column-major matrix and
// a sequence is one such matrix per time step. Dense layers act step-wise, so a
// plain MLP is a network run on a length-1 sequence.

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "sept/core/random.hpp"

namespace sept::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using Sequence = std::vector<Matrix<T>>;

enum class LayerKind { dense, lstm, bilstm };
enum class Activation { linear, relu, tanh, softmax };

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  int width = 0;
  Activation activation = Activation::linear;
};

struct NetworkSpec {
  int input_dim = 0;
  std::vector<LayerSpec> layers;

  /// Width of the last layer's output (2x width for a bidirectional layer).
  int output_dim() const;
  /// Throws std::invalid_argument on an inconsistent stack.
  void validate() const;
  std::size_t parameter_count() const;
  /// Stable textual identity, embedded in checkpoints.
  std::string fingerprint() const;
};

/// Convenience builders for the shapes used in this project.
NetworkSpec mlp_spec(int input_dim, const std::vector<int>& hidden, int output_dim,
                     Activation hidden_act, Activation output_act);

template <typename T>
struct Tensor {
  std::string name;
  Matrix<T> value;
};

/// Flat, ordered collection of named tensors. Order follows the NetworkSpec layers.
template <typename T>
struct ParameterSet {
  std::vector<Tensor<T>> tensors;

  std::size_t size() const { return tensors.size(); }
  std::size_t scalar_count() const;
  ParameterSet zeros_like() const;
  bool same_shape(const ParameterSet& other) const;
  bool all_finite() const;
  double squared_norm() const;
  void set_zero();
  void scale(T factor);
  /// this += factor * other
  void axpy(T factor, const ParameterSet& other);
  const Tensor<T>* find(const std::string& name) const;

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    out.tensors.reserve(tensors.size());
    for (const auto& t : tensors) out.tensors.push_back({t.name, t.value.template cast<U>()});
    return out;
  }
};

/// Allocates parameters for `spec`. Dense weights use uniform fan-in scaling,
/// recurrent weights are orthogonal per gate block, forget-gate bias is 1.
template <typename T>
ParameterSet<T> init_parameters(const NetworkSpec& spec, Rng& rng);

template <typename T>
ParameterSet<T> zero_parameters(const NetworkSpec& spec);

template <typename T>
struct LstmTrace {
  Sequence<T> gates;  // 4H x B, post-nonlinearity, order i f g o
  Sequence<T> cells;
  Sequence<T> hiddens;
};

template <typename T>
struct LayerCache {
  Sequence<T> inputs;
  Sequence<T> outputs;
  LstmTrace<T> forward_dir;
  LstmTrace<T> backward_dir;
};

template <typename T>
struct ForwardCache {
  std::string fingerprint;
  std::vector<LayerCache<T>> layers;
};

template <typename T>
struct ForwardResult {
  Sequence<T> outputs;
  ForwardCache<T> cache;
};

template <typename T>
struct BackwardResult {
  ParameterSet<T> grads;
  Sequence<T> input_grads;
};

/// Runs the stack over a sequence. Throws std::invalid_argument on a dimension
/// mismatch, an empty sequence, a ragged batch or non-finite input.
template <typename T>
ForwardResult<T> forward(const NetworkSpec& spec, const ParameterSet<T>& params,
                         const Sequence<T>& inputs);

/// Output-only forward pass; skips building the cache.
template <typename T>
Sequence<T> predict(const NetworkSpec& spec, const ParameterSet<T>& params,
                    const Sequence<T>& inputs);

/// Convenience for a feed-forward net on one batch.
template <typename T>
Matrix<T> predict(const NetworkSpec& spec, const ParameterSet<T>& params, const Matrix<T>& input);

/// Full backpropagation (through time for recurrent layers). `output_grads`
/// holds dLoss/dOutput per step; empty entries count as zero.
template <typename T>
BackwardResult<T> backward(const NetworkSpec& spec, const ParameterSet<T>& params,
                           const ForwardCache<T>& cache, const Sequence<T>& output_grads);

/// Elementwise target <- rate * online + (1 - rate) * target.
template <typename T>
void soft_update(ParameterSet<T>& target, const ParameterSet<T>& online, double rate);

}  // namespace sept::nn
