#pragma once

#include "sept/nn/network.hpp"

namespace sept::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global L2 norm threshold; 0 disables clipping.
  double clip_norm = 0.0;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  ParameterSet<T> first_moment;
  ParameterSet<T> second_moment;
  long long step = 0;
  long long skipped = 0;
};

struct UpdateReport {
  bool applied = false;
  double grad_norm = 0.0;     // before clipping
  double applied_norm = 0.0;  // after clipping
};

template <typename T>
AdamState<T> make_adam(const ParameterSet<T>& params, const AdamConfig& config);

/// Scales `grads` in place so its global norm is at most `threshold`.
/// Returns the norm before scaling.
template <typename T>
double clip_global_norm(ParameterSet<T>& grads, double threshold);

/// One bias-corrected Adam step after global-norm clipping. A gradient with
/// any non-finite entry is rejected: parameters and moments stay untouched and
/// the report says applied = false.
template <typename T>
UpdateReport adam_update(ParameterSet<T>& params, ParameterSet<T> grads, AdamState<T>& state);

}  // namespace sept::nn
