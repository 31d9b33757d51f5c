#include "sept/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace sept::nn {

template <typename T>
AdamState<T> make_adam(const ParameterSet<T>& params, const AdamConfig& config) {
  AdamState<T> s;
  s.config = config;
  s.first_moment = params.zeros_like();
  s.second_moment = params.zeros_like();
  return s;
}

template <typename T>
double clip_global_norm(ParameterSet<T>& grads, double threshold) {
  const double norm = std::sqrt(grads.squared_norm());
  if (threshold > 0.0 && norm > threshold) grads.scale(static_cast<T>(threshold / norm));
  return norm;
}

template <typename T>
UpdateReport adam_update(ParameterSet<T>& params, ParameterSet<T> grads, AdamState<T>& state) {
  if (!params.same_shape(grads) || !params.same_shape(state.first_moment))
    throw std::invalid_argument("adam_update: shape mismatch");
  UpdateReport report;
  if (!grads.all_finite()) {
    ++state.skipped;
    report.grad_norm = std::nan("");
    return report;
  }
  report.grad_norm = clip_global_norm(grads, state.config.clip_norm);
  report.applied_norm = std::sqrt(grads.squared_norm());

  ++state.step;
  const auto& c = state.config;
  const T b1 = static_cast<T>(c.beta1);
  const T b2 = static_cast<T>(c.beta2);
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  const T step_size = static_cast<T>(c.learning_rate / bc1);
  const T sqrt_bc2 = static_cast<T>(std::sqrt(bc2));
  const T eps = static_cast<T>(c.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment.tensors[i].value;
    auto& v = state.second_moment.tensors[i].value;
    const auto& g = grads.tensors[i].value;
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g.cwiseAbs2();
    params.tensors[i].value.array() -= step_size * m.array() / (v.array().sqrt() / sqrt_bc2 + eps);
  }
  report.applied = true;
  return report;
}

template AdamState<float> make_adam<float>(const ParameterSet<float>&, const AdamConfig&);
template AdamState<double> make_adam<double>(const ParameterSet<double>&, const AdamConfig&);
template double clip_global_norm<float>(ParameterSet<float>&, double);
template double clip_global_norm<double>(ParameterSet<double>&, double);
template UpdateReport adam_update<float>(ParameterSet<float>&, ParameterSet<float>, AdamState<float>&);
template UpdateReport adam_update<double>(ParameterSet<double>&, ParameterSet<double>, AdamState<double>&);

}  // namespace sept::nn
