#include "sept/nn/network.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sept::nn {

namespace {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::lstm: return "lstm";
    case LayerKind::bilstm: return "bilstm";
  }
  return "?";
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::softmax: return "softmax";
  }
  return "?";
}

int layer_output_dim(const LayerSpec& l) { return l.kind == LayerKind::bilstm ? 2 * l.width : l.width; }

int tensors_per_layer(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::dense: return 2;
    case LayerKind::lstm: return 3;
    case LayerKind::bilstm: return 6;
  }
  return 0;
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
void apply_activation(Activation a, Matrix<T>& m) {
  switch (a) {
    case Activation::linear: break;
    case Activation::relu: m = m.cwiseMax(T(0)); break;
    case Activation::tanh: m = m.array().tanh().matrix(); break;
    case Activation::softmax:
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        auto col = m.col(c);
        col.array() -= col.maxCoeff();
        col = col.array().exp().matrix();
        col /= col.sum();
      }
      break;
  }
}

// dL/dpre given dL/dout and the post-activation output.
template <typename T>
Matrix<T> activation_backward(Activation a, const Matrix<T>& out, const Matrix<T>& grad) {
  switch (a) {
    case Activation::linear: return grad;
    case Activation::relu: return (out.array() > T(0)).select(grad, T(0));
    case Activation::tanh: return (grad.array() * (T(1) - out.array().square())).matrix();
    case Activation::softmax: {
      Matrix<T> res(out.rows(), out.cols());
      for (Eigen::Index c = 0; c < out.cols(); ++c) {
        const T dot = out.col(c).dot(grad.col(c));
        res.col(c) = (out.col(c).array() * (grad.col(c).array() - dot)).matrix();
      }
      return res;
    }
  }
  return grad;
}

template <typename T>
struct LstmRefs {
  const Matrix<T>& W;
  const Matrix<T>& U;
  const Matrix<T>& b;
};

// Runs one direction over `inputs`; `reverse` walks time backwards but stores
// traces indexed by original time.
template <typename T>
void lstm_forward(const LstmRefs<T>& p, const Sequence<T>& inputs, bool reverse, int width,
                  LstmTrace<T>* trace, Sequence<T>& hiddens_out) {
  const auto steps = static_cast<int>(inputs.size());
  const Eigen::Index batch = inputs.front().cols();
  Matrix<T> h = Matrix<T>::Zero(width, batch);
  Matrix<T> c = Matrix<T>::Zero(width, batch);
  hiddens_out.assign(steps, Matrix<T>());
  if (trace) {
    trace->gates.assign(steps, Matrix<T>());
    trace->cells.assign(steps, Matrix<T>());
    trace->hiddens.assign(steps, Matrix<T>());
  }
  Matrix<T> a(4 * width, batch);
  for (int k = 0; k < steps; ++k) {
    const int t = reverse ? steps - 1 - k : k;
    a.noalias() = p.W * inputs[t];
    a.noalias() += p.U * h;
    a.colwise() += p.b.col(0);
    auto i_g = a.topRows(width);
    auto f_g = a.middleRows(width, width);
    auto g_g = a.middleRows(2 * width, width);
    auto o_g = a.bottomRows(width);
    i_g = i_g.unaryExpr([](T x) { return sigmoid(x); });
    f_g = f_g.unaryExpr([](T x) { return sigmoid(x); });
    g_g = g_g.array().tanh().matrix();
    o_g = o_g.unaryExpr([](T x) { return sigmoid(x); });
    c = (f_g.array() * c.array() + i_g.array() * g_g.array()).matrix();
    h = (o_g.array() * c.array().tanh()).matrix();
    hiddens_out[t] = h;
    if (trace) {
      trace->gates[t] = a;
      trace->cells[t] = c;
      trace->hiddens[t] = h;
    }
  }
}

// Accumulates parameter gradients for one direction and returns input grads
// (indexed by original time).
template <typename T>
void lstm_backward(const LstmRefs<T>& p, const Sequence<T>& inputs, const LstmTrace<T>& trace,
                   const Sequence<T>& dh_out, bool reverse, int width, Matrix<T>& dW, Matrix<T>& dU,
                   Matrix<T>& db, Sequence<T>& dx) {
  const auto steps = static_cast<int>(inputs.size());
  const Eigen::Index batch = inputs.front().cols();
  Matrix<T> dh_next = Matrix<T>::Zero(width, batch);
  Matrix<T> dc_next = Matrix<T>::Zero(width, batch);
  Matrix<T> da(4 * width, batch);
  const Matrix<T> zero = Matrix<T>::Zero(width, batch);
  for (int k = steps - 1; k >= 0; --k) {
    const int t = reverse ? steps - 1 - k : k;
    const int prev = reverse ? t + 1 : t - 1;
    const bool has_prev = k > 0;
    const Matrix<T>& c_prev = has_prev ? trace.cells[prev] : zero;
    const Matrix<T>& h_prev = has_prev ? trace.hiddens[prev] : zero;
    const auto& g = trace.gates[t];
    auto i_g = g.topRows(width).array();
    auto f_g = g.middleRows(width, width).array();
    auto g_g = g.middleRows(2 * width, width).array();
    auto o_g = g.bottomRows(width).array();
    Matrix<T> dh = dh_next;
    if (dh_out[t].size() != 0) dh += dh_out[t];
    const auto tanh_c = trace.cells[t].array().tanh();
    Matrix<T> dc = dc_next;
    dc.array() += dh.array() * o_g * (T(1) - tanh_c.square());
    da.topRows(width) = (dc.array() * g_g * i_g * (T(1) - i_g)).matrix();
    da.middleRows(width, width) = (dc.array() * c_prev.array() * f_g * (T(1) - f_g)).matrix();
    da.middleRows(2 * width, width) = (dc.array() * i_g * (T(1) - g_g.square())).matrix();
    da.bottomRows(width) = (dh.array() * tanh_c * o_g * (T(1) - o_g)).matrix();
    dc_next = (dc.array() * f_g).matrix();
    dW.noalias() += da * inputs[t].transpose();
    if (has_prev) dU.noalias() += da * h_prev.transpose();
    db.col(0) += da.rowwise().sum();
    if (dx[t].size() == 0) dx[t] = Matrix<T>::Zero(inputs[t].rows(), batch);
    dx[t].noalias() += p.W.transpose() * da;
    dh_next.noalias() = p.U.transpose() * da;
  }
}

template <typename T>
void check_inputs(const NetworkSpec& spec, const Sequence<T>& inputs) {
  if (inputs.empty()) throw std::invalid_argument("forward: empty input sequence");
  const Eigen::Index batch = inputs.front().cols();
  for (const auto& x : inputs) {
    if (x.rows() != spec.input_dim)
      throw std::invalid_argument("forward: input dimension " + std::to_string(x.rows()) +
                                  " does not match spec " + std::to_string(spec.input_dim));
    if (x.cols() != batch || batch == 0) throw std::invalid_argument("forward: ragged batch");
    if (!x.allFinite()) throw std::invalid_argument("forward: non-finite input");
  }
}

template <typename T>
void check_params(const NetworkSpec& spec, const ParameterSet<T>& params) {
  std::size_t expected = 0;
  for (const auto& l : spec.layers) expected += static_cast<std::size_t>(tensors_per_layer(l));
  if (params.size() != expected) throw std::invalid_argument("parameter set does not match spec");
}

template <typename T>
Sequence<T> run(const NetworkSpec& spec, const ParameterSet<T>& params, const Sequence<T>& inputs,
                ForwardCache<T>* cache) {
  spec.validate();
  check_params(spec, params);
  check_inputs(spec, inputs);
  if (cache) {
    cache->fingerprint = spec.fingerprint();
    cache->layers.assign(spec.layers.size(), LayerCache<T>());
  }
  Sequence<T> current = inputs;
  std::size_t offset = 0;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const auto& layer = spec.layers[li];
    LayerCache<T>* lc = cache ? &cache->layers[li] : nullptr;
    if (lc) lc->inputs = current;
    Sequence<T> next(current.size());
    if (layer.kind == LayerKind::dense) {
      const auto& W = params.tensors[offset].value;
      const auto& b = params.tensors[offset + 1].value;
      for (std::size_t t = 0; t < current.size(); ++t) {
        next[t].noalias() = W * current[t];
        next[t].colwise() += b.col(0);
        apply_activation(layer.activation, next[t]);
      }
    } else {
      LstmRefs<T> fwd{params.tensors[offset].value, params.tensors[offset + 1].value,
                      params.tensors[offset + 2].value};
      Sequence<T> hf;
      lstm_forward(fwd, current, false, layer.width, lc ? &lc->forward_dir : nullptr, hf);
      if (layer.kind == LayerKind::lstm) {
        next = std::move(hf);
      } else {
        LstmRefs<T> bwd{params.tensors[offset + 3].value, params.tensors[offset + 4].value,
                        params.tensors[offset + 5].value};
        Sequence<T> hb;
        lstm_forward(bwd, current, true, layer.width, lc ? &lc->backward_dir : nullptr, hb);
        for (std::size_t t = 0; t < current.size(); ++t) {
          next[t].resize(2 * layer.width, hf[t].cols());
          next[t].topRows(layer.width) = hf[t];
          next[t].bottomRows(layer.width) = hb[t];
        }
      }
    }
    if (lc) lc->outputs = next;
    current = std::move(next);
    offset += static_cast<std::size_t>(tensors_per_layer(layer));
  }
  return current;
}

template <typename T>
Matrix<T> orthogonal(int n, Rng& rng) {
  Matrix<double> g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = standard_normal(rng);
  Eigen::HouseholderQR<Matrix<double>> qr(g);
  Matrix<double> q = qr.householderQ() * Matrix<double>::Identity(n, n);
  // Sign fix makes the decomposition unique.
  Matrix<double> r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (int i = 0; i < n; ++i)
    if (r(i, i) < 0) q.col(i) *= -1.0;
  return q.cast<T>();
}

template <typename T>
Matrix<T> uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  Matrix<T> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = static_cast<T>(uniform(rng, -bound, bound));
  return m;
}

template <typename T>
void append_lstm(ParameterSet<T>& ps, const std::string& prefix, int in, int width, Rng* rng) {
  Matrix<T> W = Matrix<T>::Zero(4 * width, in);
  Matrix<T> U = Matrix<T>::Zero(4 * width, width);
  Matrix<T> b = Matrix<T>::Zero(4 * width, 1);
  if (rng) {
    W = uniform_matrix<T>(4 * width, in, 1.0 / std::sqrt(static_cast<double>(in)), *rng);
    for (int g = 0; g < 4; ++g) U.middleRows(g * width, width) = orthogonal<T>(width, *rng);
    b.middleRows(width, width).setConstant(T(1));
  }
  ps.tensors.push_back({prefix + ".W", std::move(W)});
  ps.tensors.push_back({prefix + ".U", std::move(U)});
  ps.tensors.push_back({prefix + ".b", std::move(b)});
}

template <typename T>
ParameterSet<T> build_parameters(const NetworkSpec& spec, Rng* rng) {
  spec.validate();
  ParameterSet<T> ps;
  int in = spec.input_dim;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const auto& l = spec.layers[li];
    const std::string prefix = "L" + std::to_string(li);
    switch (l.kind) {
      case LayerKind::dense: {
        Matrix<T> W = Matrix<T>::Zero(l.width, in);
        Matrix<T> b = Matrix<T>::Zero(l.width, 1);
        if (rng) {
          const double bound = 1.0 / std::sqrt(static_cast<double>(in));
          W = uniform_matrix<T>(l.width, in, bound, *rng);
          b = uniform_matrix<T>(l.width, 1, bound, *rng);
        }
        ps.tensors.push_back({prefix + ".W", std::move(W)});
        ps.tensors.push_back({prefix + ".b", std::move(b)});
        break;
      }
      case LayerKind::lstm: append_lstm(ps, prefix + ".fwd", in, l.width, rng); break;
      case LayerKind::bilstm:
        append_lstm(ps, prefix + ".fwd", in, l.width, rng);
        append_lstm(ps, prefix + ".bwd", in, l.width, rng);
        break;
    }
    in = layer_output_dim(l);
  }
  return ps;
}

}  // namespace

int NetworkSpec::output_dim() const { return layers.empty() ? input_dim : layer_output_dim(layers.back()); }

void NetworkSpec::validate() const {
  if (input_dim <= 0) throw std::invalid_argument("NetworkSpec: input_dim must be positive");
  if (layers.empty()) throw std::invalid_argument("NetworkSpec: no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.width <= 0) throw std::invalid_argument("NetworkSpec: layer width must be positive");
    if (l.kind != LayerKind::dense && l.activation != Activation::tanh)
      throw std::invalid_argument("NetworkSpec: recurrent layers use tanh cells");
    if (l.activation == Activation::softmax && i + 1 != layers.size())
      throw std::invalid_argument("NetworkSpec: softmax only on the output layer");
  }
}

std::size_t NetworkSpec::parameter_count() const {
  std::size_t n = 0;
  int in = input_dim;
  for (const auto& l : layers) {
    const auto w = static_cast<std::size_t>(l.width);
    const auto i = static_cast<std::size_t>(in);
    switch (l.kind) {
      case LayerKind::dense: n += w * i + w; break;
      case LayerKind::lstm: n += 4 * w * (i + w + 1); break;
      case LayerKind::bilstm: n += 8 * w * (i + w + 1); break;
    }
    in = layer_output_dim(l);
  }
  return n;
}

std::string NetworkSpec::fingerprint() const {
  std::ostringstream os;
  os << "in=" << input_dim;
  for (const auto& l : layers) os << '|' << kind_name(l.kind) << ':' << l.width << ':' << activation_name(l.activation);
  return os.str();
}

NetworkSpec mlp_spec(int input_dim, const std::vector<int>& hidden, int output_dim, Activation hidden_act,
                     Activation output_act) {
  NetworkSpec s;
  s.input_dim = input_dim;
  for (int h : hidden) s.layers.push_back({LayerKind::dense, h, hidden_act});
  s.layers.push_back({LayerKind::dense, output_dim, output_act});
  return s;
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += static_cast<std::size_t>(t.value.size());
  return n;
}

template <typename T>
ParameterSet<T> ParameterSet<T>::zeros_like() const {
  ParameterSet out;
  out.tensors.reserve(tensors.size());
  for (const auto& t : tensors) out.tensors.push_back({t.name, Matrix<T>::Zero(t.value.rows(), t.value.cols())});
  return out;
}

template <typename T>
bool ParameterSet<T>::same_shape(const ParameterSet& other) const {
  if (other.tensors.size() != tensors.size()) return false;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].value.rows() != other.tensors[i].value.rows() ||
        tensors[i].value.cols() != other.tensors[i].value.cols())
      return false;
  }
  return true;
}

template <typename T>
bool ParameterSet<T>::all_finite() const {
  for (const auto& t : tensors)
    if (!t.value.allFinite()) return false;
  return true;
}

template <typename T>
double ParameterSet<T>::squared_norm() const {
  double s = 0;
  for (const auto& t : tensors) s += static_cast<double>(t.value.squaredNorm());
  return s;
}

template <typename T>
void ParameterSet<T>::set_zero() {
  for (auto& t : tensors) t.value.setZero();
}

template <typename T>
void ParameterSet<T>::scale(T factor) {
  for (auto& t : tensors) t.value *= factor;
}

template <typename T>
void ParameterSet<T>::axpy(T factor, const ParameterSet& other) {
  if (!same_shape(other)) throw std::invalid_argument("ParameterSet::axpy: shape mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) tensors[i].value += factor * other.tensors[i].value;
}

template <typename T>
const Tensor<T>* ParameterSet<T>::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

template <typename T>
ParameterSet<T> init_parameters(const NetworkSpec& spec, Rng& rng) {
  return build_parameters<T>(spec, &rng);
}

template <typename T>
ParameterSet<T> zero_parameters(const NetworkSpec& spec) {
  return build_parameters<T>(spec, nullptr);
}

template <typename T>
ForwardResult<T> forward(const NetworkSpec& spec, const ParameterSet<T>& params, const Sequence<T>& inputs) {
  ForwardResult<T> r;
  r.outputs = run(spec, params, inputs, &r.cache);
  return r;
}

template <typename T>
Sequence<T> predict(const NetworkSpec& spec, const ParameterSet<T>& params, const Sequence<T>& inputs) {
  return run<T>(spec, params, inputs, nullptr);
}

template <typename T>
Matrix<T> predict(const NetworkSpec& spec, const ParameterSet<T>& params, const Matrix<T>& input) {
  Sequence<T> seq{input};
  return std::move(run<T>(spec, params, seq, nullptr).front());
}

template <typename T>
BackwardResult<T> backward(const NetworkSpec& spec, const ParameterSet<T>& params, const ForwardCache<T>& cache,
                           const Sequence<T>& output_grads) {
  if (cache.fingerprint != spec.fingerprint() || cache.layers.size() != spec.layers.size())
    throw std::invalid_argument("backward: cache does not belong to this spec");
  check_params(spec, params);
  const std::size_t steps = cache.layers.front().inputs.size();
  if (output_grads.size() != steps) throw std::invalid_argument("backward: gradient sequence length mismatch");

  BackwardResult<T> r;
  r.grads = params.zeros_like();
  std::vector<std::size_t> offsets(spec.layers.size());
  {
    std::size_t off = 0;
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
      offsets[li] = off;
      off += static_cast<std::size_t>(tensors_per_layer(spec.layers[li]));
    }
  }

  Sequence<T> grad = output_grads;
  for (std::size_t li = spec.layers.size(); li-- > 0;) {
    const auto& layer = spec.layers[li];
    const auto& lc = cache.layers[li];
    const std::size_t off = offsets[li];
    const Eigen::Index batch = lc.inputs.front().cols();
    Sequence<T> dx(steps);
    if (layer.kind == LayerKind::dense) {
      const auto& W = params.tensors[off].value;
      auto& dW = r.grads.tensors[off].value;
      auto& db = r.grads.tensors[off + 1].value;
      for (std::size_t t = 0; t < steps; ++t) {
        if (grad[t].size() == 0) {
          dx[t] = Matrix<T>::Zero(lc.inputs[t].rows(), batch);
          continue;
        }
        const Matrix<T> dpre = activation_backward(layer.activation, lc.outputs[t], grad[t]);
        dW.noalias() += dpre * lc.inputs[t].transpose();
        db.col(0) += dpre.rowwise().sum();
        dx[t].noalias() = W.transpose() * dpre;
      }
    } else {
      Sequence<T> dh_f(steps), dh_b(steps);
      for (std::size_t t = 0; t < steps; ++t) {
        if (grad[t].size() == 0) continue;
        if (layer.kind == LayerKind::lstm) {
          dh_f[t] = grad[t];
        } else {
          dh_f[t] = grad[t].topRows(layer.width);
          dh_b[t] = grad[t].bottomRows(layer.width);
        }
      }
      LstmRefs<T> fwd{params.tensors[off].value, params.tensors[off + 1].value, params.tensors[off + 2].value};
      lstm_backward(fwd, lc.inputs, lc.forward_dir, dh_f, false, layer.width, r.grads.tensors[off].value,
                    r.grads.tensors[off + 1].value, r.grads.tensors[off + 2].value, dx);
      if (layer.kind == LayerKind::bilstm) {
        LstmRefs<T> bwd{params.tensors[off + 3].value, params.tensors[off + 4].value,
                        params.tensors[off + 5].value};
        lstm_backward(bwd, lc.inputs, lc.backward_dir, dh_b, true, layer.width, r.grads.tensors[off + 3].value,
                      r.grads.tensors[off + 4].value, r.grads.tensors[off + 5].value, dx);
      }
    }
    grad = std::move(dx);
  }
  r.input_grads = std::move(grad);
  return r;
}

template <typename T>
void soft_update(ParameterSet<T>& target, const ParameterSet<T>& online, double rate) {
  if (!target.same_shape(online)) throw std::invalid_argument("soft_update: shape mismatch");
  if (rate == 1.0) {
    target = online;
    return;
  }
  if (rate == 0.0) return;
  const T a = static_cast<T>(rate);
  for (std::size_t i = 0; i < target.size(); ++i)
    target.tensors[i].value = a * online.tensors[i].value + (T(1) - a) * target.tensors[i].value;
}

#define SEPT_INSTANTIATE(T)                                                                              \
  template struct ParameterSet<T>;                                                                       \
  template ParameterSet<T> init_parameters<T>(const NetworkSpec&, Rng&);                                 \
  template ParameterSet<T> zero_parameters<T>(const NetworkSpec&);                                       \
  template ForwardResult<T> forward<T>(const NetworkSpec&, const ParameterSet<T>&, const Sequence<T>&);  \
  template Sequence<T> predict<T>(const NetworkSpec&, const ParameterSet<T>&, const Sequence<T>&);       \
  template Matrix<T> predict<T>(const NetworkSpec&, const ParameterSet<T>&, const Matrix<T>&);           \
  template BackwardResult<T> backward<T>(const NetworkSpec&, const ParameterSet<T>&, const ForwardCache<T>&, \
                                         const Sequence<T>&);                                            \
  template void soft_update<T>(ParameterSet<T>&, const ParameterSet<T>&, double);

SEPT_INSTANTIATE(float)
SEPT_INSTANTIATE(double)
#undef SEPT_INSTANTIATE

}  // namespace sept::nn
