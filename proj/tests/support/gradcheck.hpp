#pragma once

// Five-point central differences over every scalar of a ParameterSet. Test-only:
// this is the independent oracle the analytic gradients are checked against.

#include <algorithm>
#include <cmath>
#include <functional>

#include "sept/nn/network.hpp"

namespace sept::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
};

/// Relative error |a - n| / max(|a|, |n|, floor); the floor keeps near-zero
/// entries from dominating.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline GradCheckResult check_gradient(nn::ParameterSet<double> params, const nn::ParameterSet<double>& analytic,
                                      const std::function<double(const nn::ParameterSet<double>&)>& loss,
                                      double h = 1e-4) {
  GradCheckResult r;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& m = params.tensors[t].value;
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      const double orig = m.data()[k];
      auto at = [&](double offset) {
        m.data()[k] = orig + offset;
        return loss(params);
      };
      const double numeric = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
      m.data()[k] = orig;
      const double a = analytic.tensors[t].value.data()[k];
      r.max_rel_error = std::max(r.max_rel_error, relative_error(a, numeric));
      r.max_abs_error = std::max(r.max_abs_error, std::abs(a - numeric));
      ++r.checked;
    }
  }
  return r;
}

}  // namespace sept::testing
