#include "sept/vae/trajectory_vae.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace sept::vae {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

template <typename T>
void fill_pair(nn::Matrix<T>& m, int row0, int col, const Trajectory& traj, int t, int action_count) {
  const auto& s = traj.states[t];
  for (std::size_t i = 0; i < s.size(); ++i) m(row0 + static_cast<int>(i), col) = static_cast<T>(s[i]);
  const int base = row0 + static_cast<int>(s.size());
  for (int a = 0; a < action_count; ++a) m(base + a, col) = a == traj.actions[t] ? T(1) : T(0);
}

int common_length(const std::vector<const Trajectory*>& batch) {
  if (batch.empty()) throw std::invalid_argument("vae: empty batch");
  const int len = batch.front()->length();
  for (const auto* t : batch)
    if (t->length() != len) throw std::invalid_argument("vae: trajectories in a batch must share a length");
  return len;
}

template <typename T>
nn::Sequence<T> decoder_inputs(const VaeSpecs& specs, const std::vector<const Trajectory*>& batch,
                               const nn::Matrix<T>& z) {
  const int len = common_length(batch);
  const int B = static_cast<int>(batch.size());
  const int K = specs.pair_dim();
  nn::Sequence<T> seq;
  for (int t = 0; t + 1 < len; ++t) {
    nn::Matrix<T> m(K + specs.latent_dim, B);
    for (int b = 0; b < B; ++b) fill_pair(m, 0, b, *batch[b], t, specs.action_count);
    m.bottomRows(specs.latent_dim) = z;
    seq.push_back(std::move(m));
  }
  return seq;
}

template <typename T>
nn::Matrix<T> pair_target(const VaeSpecs& specs, const std::vector<const Trajectory*>& batch, int t) {
  nn::Matrix<T> m(specs.pair_dim(), static_cast<int>(batch.size()));
  for (int b = 0; b < static_cast<int>(batch.size()); ++b) fill_pair(m, 0, b, *batch[b], t, specs.action_count);
  return m;
}

struct Clamped {
  double value;
  bool active;  // inside the clamp range, gradient passes
};

Clamped clamp_logvar(double lv) {
  if (lv < kDecoderLogVarMin) return {kDecoderLogVarMin, false};
  if (lv > kDecoderLogVarMax) return {kDecoderLogVarMax, false};
  return {lv, true};
}

void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw std::runtime_error("trajectory buffer: truncated stream");
  return v;
}

}  // namespace

void check_trajectory(const Trajectory& traj, int length, int state_dim, int action_count) {
  if (traj.length() != length || static_cast<int>(traj.states.size()) != length)
    throw std::invalid_argument("trajectory: expected length " + std::to_string(length) + ", got " +
                                std::to_string(traj.length()));
  for (const auto& s : traj.states)
    if (static_cast<int>(s.size()) != state_dim) throw std::invalid_argument("trajectory: state width mismatch");
  for (int a : traj.actions)
    if (a < 0 || a >= action_count) throw std::invalid_argument("trajectory: action out of range");
}

std::uint64_t trajectory_hash(const Trajectory& traj) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& s : traj.states)
    h = fnv1a64({reinterpret_cast<const char*>(s.data()), s.size() * sizeof(double)}, h);
  h = fnv1a64({reinterpret_cast<const char*>(traj.actions.data()), traj.actions.size() * sizeof(int)}, h);
  return h;
}

VaeSpecs make_vae_specs(int state_dim, int action_count, int latent_dim, int encoder_width, int decoder_width) {
  if (state_dim <= 0 || action_count <= 0 || latent_dim <= 0 || encoder_width <= 0 || decoder_width <= 0)
    throw std::invalid_argument("make_vae_specs: dimensions must be positive");
  VaeSpecs s;
  s.state_dim = state_dim;
  s.action_count = action_count;
  s.latent_dim = latent_dim;
  const int K = state_dim + action_count;
  s.encoder.input_dim = K;
  s.encoder.layers = {{nn::LayerKind::bilstm, encoder_width, nn::Activation::tanh}};
  s.head.input_dim = 2 * encoder_width;
  s.head.layers = {{nn::LayerKind::dense, 2 * latent_dim, nn::Activation::linear}};
  s.decoder.input_dim = K + latent_dim;
  s.decoder.layers = {{nn::LayerKind::lstm, decoder_width, nn::Activation::tanh},
                      {nn::LayerKind::dense, 2 * K, nn::Activation::linear}};
  s.encoder.validate();
  s.head.validate();
  s.decoder.validate();
  return s;
}

template <typename T>
VaeModel<T> init_vae(const VaeSpecs& specs, Rng& rng) {
  VaeModel<T> m;
  m.encoder = nn::init_parameters<T>(specs.encoder, rng);
  m.head = nn::init_parameters<T>(specs.head, rng);
  m.decoder = nn::init_parameters<T>(specs.decoder, rng);
  return m;
}

template <typename T>
nn::Sequence<T> encoder_inputs(const VaeSpecs& specs, const std::vector<const Trajectory*>& batch) {
  const int len = common_length(batch);
  if (len < 1) throw std::invalid_argument("vae: trajectory must have at least one step");
  for (const auto* t : batch) check_trajectory(*t, len, specs.state_dim, specs.action_count);
  nn::Sequence<T> seq;
  for (int t = 0; t < len; ++t) seq.push_back(pair_target<T>(specs, batch, t));
  return seq;
}

template <typename T>
Posterior<T> encode(const VaeSpecs& specs, const VaeModel<T>& model, const std::vector<const Trajectory*>& batch) {
  const auto outs = nn::predict(specs.encoder, model.encoder, encoder_inputs<T>(specs, batch));
  nn::Matrix<T> pooled = outs.front();
  for (std::size_t t = 1; t < outs.size(); ++t) pooled += outs[t];
  pooled /= static_cast<T>(outs.size());
  const nn::Matrix<T> h = nn::predict(specs.head, model.head, pooled);
  const int D = specs.latent_dim;
  return {h.topRows(D), h.bottomRows(D)};
}

template <typename T>
Posterior<T> encode(const VaeSpecs& specs, const VaeModel<T>& model, const Trajectory& traj) {
  return encode(specs, model, std::vector<const Trajectory*>{&traj});
}

template <typename T>
nn::Matrix<T> reparameterize(const Posterior<T>& post, const nn::Matrix<T>& eps) {
  return post.mean.array() + (post.log_variance.array() * T(0.5)).exp() * eps.array();
}

template <typename T>
nn::Matrix<T> sample_latent(const Posterior<T>& post, Rng& rng) {
  nn::Matrix<T> eps(post.mean.rows(), post.mean.cols());
  for (Eigen::Index j = 0; j < eps.cols(); ++j)
    for (Eigen::Index i = 0; i < eps.rows(); ++i) eps(i, j) = static_cast<T>(standard_normal(rng));
  return reparameterize(post, eps);
}

template <typename T>
std::vector<double> kl_to_standard_normal(const Posterior<T>& post) {
  std::vector<double> out(post.mean.cols(), 0.0);
  for (Eigen::Index j = 0; j < post.mean.cols(); ++j)
    for (Eigen::Index i = 0; i < post.mean.rows(); ++i) {
      const double mu = post.mean(i, j);
      const double lv = post.log_variance(i, j);
      out[j] += 0.5 * (std::exp(lv) + mu * mu - 1.0 - lv);
    }
  return out;
}

template <typename T>
std::vector<double> gaussian_entropy(const Posterior<T>& post) {
  const double D = static_cast<double>(post.mean.rows());
  std::vector<double> out(post.mean.cols(), 0.5 * D * kLog2Pi);
  for (Eigen::Index j = 0; j < post.mean.cols(); ++j)
    for (Eigen::Index i = 0; i < post.mean.rows(); ++i) out[j] += 0.5 * (1.0 + post.log_variance(i, j));
  return out;
}

template <typename T>
std::vector<double> decode_log_likelihood(const VaeSpecs& specs, const VaeModel<T>& model,
                                          const std::vector<const Trajectory*>& batch, const nn::Matrix<T>& z) {
  const int len = common_length(batch);
  const int B = static_cast<int>(batch.size());
  if (z.rows() != specs.latent_dim || z.cols() != B) throw std::invalid_argument("decode: z has wrong shape");
  std::vector<double> ll(B, 0.0);
  if (len < 2) return ll;
  const int K = specs.pair_dim();
  const auto outs = nn::predict(specs.decoder, model.decoder, decoder_inputs(specs, batch, z));
  for (int t = 0; t + 1 < len; ++t) {
    const nn::Matrix<T> target = pair_target<T>(specs, batch, t + 1);
    for (int b = 0; b < B; ++b)
      for (int k = 0; k < K; ++k) {
        const double lv = clamp_logvar(outs[t](K + k, b)).value;
        const double r = static_cast<double>(target(k, b)) - static_cast<double>(outs[t](k, b));
        ll[b] += -0.5 * (kLog2Pi + lv + r * r * std::exp(-lv));
      }
  }
  return ll;
}

template <typename T>
double elbo(const VaeSpecs& specs, const VaeModel<T>& model, const Trajectory& traj, double beta, Rng& rng) {
  const auto post = encode(specs, model, traj);
  const nn::Matrix<T> z = sample_latent(post, rng);
  const double ll = decode_log_likelihood(specs, model, {&traj}, z)[0];
  return -beta * kl_to_standard_normal(post)[0] + ll;
}

template <typename T>
ObjectiveTerms vae_objective(const VaeSpecs& specs, const VaeModel<T>& model,
                             const std::vector<const Trajectory*>& batch, const nn::Matrix<T>& eps, double beta,
                             double entropy_weight, VaeModel<T>* grads) {
  const int len = common_length(batch);
  const int B = static_cast<int>(batch.size());
  const int D = specs.latent_dim;
  const int K = specs.pair_dim();
  if (eps.rows() != D || eps.cols() != B) throw std::invalid_argument("vae_objective: eps has wrong shape");
  const T invB = T(1) / static_cast<T>(B);

  // Encoder forward.
  auto enc = nn::forward(specs.encoder, model.encoder, encoder_inputs<T>(specs, batch));
  nn::Matrix<T> pooled = enc.outputs.front();
  for (int t = 1; t < len; ++t) pooled += enc.outputs[t];
  pooled /= static_cast<T>(len);
  auto head = nn::forward(specs.head, model.head, nn::Sequence<T>{pooled});
  Posterior<T> post{head.outputs[0].topRows(D), head.outputs[0].bottomRows(D)};
  const nn::Matrix<T> std_dev = (post.log_variance.array() * T(0.5)).exp();
  const nn::Matrix<T> z = post.mean.array() + std_dev.array() * eps.array();

  ObjectiveTerms terms;
  const auto kl = kl_to_standard_normal(post);
  const auto ent = gaussian_entropy(post);
  for (int b = 0; b < B; ++b) {
    terms.kl += kl[b];
    terms.entropy += ent[b];
  }

  // Decoder forward and d loss / d decoder outputs.
  nn::Matrix<T> dz = nn::Matrix<T>::Zero(D, B);
  if (len >= 2) {
    auto dec = nn::forward(specs.decoder, model.decoder, decoder_inputs(specs, batch, z));
    nn::Sequence<T> dout(len - 1);
    for (int t = 0; t + 1 < len; ++t) {
      const nn::Matrix<T> target = pair_target<T>(specs, batch, t + 1);
      const auto& o = dec.outputs[t];
      dout[t] = nn::Matrix<T>::Zero(2 * K, B);
      for (int b = 0; b < B; ++b)
        for (int k = 0; k < K; ++k) {
          const Clamped c = clamp_logvar(o(K + k, b));
          const double inv_var = std::exp(-c.value);
          const double r = static_cast<double>(target(k, b)) - static_cast<double>(o(k, b));
          terms.log_likelihood += -0.5 * (kLog2Pi + c.value + r * r * inv_var);
          dout[t](k, b) = static_cast<T>(-r * inv_var) * invB;
          if (c.active) dout[t](K + k, b) = static_cast<T>(0.5 * (1.0 - r * r * inv_var)) * invB;
        }
    }
    if (grads) {
      auto back = nn::backward(specs.decoder, model.decoder, dec.cache, dout);
      grads->decoder = std::move(back.grads);
      for (auto& g : back.input_grads) dz += g.bottomRows(D);
    }
  } else if (grads) {
    grads->decoder = model.decoder.zeros_like();
  }

  terms.loss = (-(terms.log_likelihood - beta * terms.kl) + entropy_weight * terms.entropy) / B;
  terms.log_likelihood /= B;
  terms.kl /= B;
  terms.entropy /= B;
  if (!grads) return terms;

  // d loss / d (mean, log_variance).
  nn::Matrix<T> dmean = dz + static_cast<T>(beta) * invB * post.mean;
  nn::Matrix<T> dlv = (dz.array() * eps.array() * std_dev.array() * T(0.5)).matrix();
  dlv.array() += static_cast<T>(0.5 * beta) * invB * (post.log_variance.array().exp() - T(1));
  dlv.array() += static_cast<T>(0.5 * entropy_weight) * invB;

  nn::Matrix<T> dhead(2 * D, B);
  dhead.topRows(D) = dmean;
  dhead.bottomRows(D) = dlv;
  auto hb = nn::backward(specs.head, model.head, head.cache, nn::Sequence<T>{dhead});
  grads->head = std::move(hb.grads);
  const nn::Matrix<T> dpool = hb.input_grads[0] / static_cast<T>(len);
  auto eb = nn::backward(specs.encoder, model.encoder, enc.cache, nn::Sequence<T>(len, dpool));
  grads->encoder = std::move(eb.grads);
  return terms;
}

TrajectoryBuffer::TrajectoryBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("TrajectoryBuffer: capacity must be positive");
}

void TrajectoryBuffer::push(Trajectory traj) {
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(traj));
}

std::vector<const Trajectory*> TrajectoryBuffer::sample(std::size_t count, Rng& rng) const {
  if (items_.empty()) throw std::invalid_argument("TrajectoryBuffer: sample from empty buffer");
  std::vector<const Trajectory*> out;
  out.reserve(count);
  if (count <= items_.size()) {
    std::vector<std::size_t> idx(items_.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // partial Fisher-Yates
    for (std::size_t i = 0; i < count; ++i) {
      const auto j = i + static_cast<std::size_t>(uniform_index(rng, static_cast<int>(idx.size() - i)));
      std::swap(idx[i], idx[j]);
      out.push_back(&items_[idx[i]]);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i)
      out.push_back(&items_[static_cast<std::size_t>(uniform_index(rng, static_cast<int>(items_.size())))]);
  }
  return out;
}

void TrajectoryBuffer::write(std::ostream& os) const {
  os.write("SEPTTRJ1", 8);
  write_u64(os, capacity_);
  write_u64(os, items_.size());
  for (const auto& t : items_) {
    write_u64(os, t.actions.size());
    write_u64(os, t.states.empty() ? 0 : t.states.front().size());
    write_u64(os, t.truncated ? 1 : 0);
    for (const auto& s : t.states) os.write(reinterpret_cast<const char*>(s.data()), s.size() * sizeof(double));
    for (int a : t.actions) write_u64(os, static_cast<std::uint64_t>(a));
  }
}

TrajectoryBuffer TrajectoryBuffer::read(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "SEPTTRJ1", 8) != 0) throw std::runtime_error("trajectory buffer: bad magic");
  TrajectoryBuffer buf(read_u64(is));
  const auto n = read_u64(is);
  for (std::uint64_t i = 0; i < n; ++i) {
    Trajectory t;
    const auto len = read_u64(is);
    const auto width = read_u64(is);
    t.truncated = read_u64(is) != 0;
    t.states.assign(len, std::vector<double>(width));
    for (auto& s : t.states) is.read(reinterpret_cast<char*>(s.data()), width * sizeof(double));
    for (std::uint64_t k = 0; k < len; ++k) t.actions.push_back(static_cast<int>(read_u64(is)));
    if (!is) throw std::runtime_error("trajectory buffer: truncated stream");
    buf.push(std::move(t));
  }
  return buf;
}

VaeLearner make_vae_learner(const VaeSpecs& specs, const VaeConfig& config, Rng& rng) {
  if (config.tracking_rate < 0.0 || config.tracking_rate > 1.0)
    throw std::invalid_argument("vae: tracking rate must lie in [0, 1]");
  if (config.beta < 0.0 || config.entropy_weight < 0.0) throw std::invalid_argument("vae: negative weight");
  if (config.batch_size <= 0 || config.minibatches <= 0) throw std::invalid_argument("vae: bad batch settings");
  VaeLearner l;
  l.specs = specs;
  l.config = config;
  l.online = init_vae<float>(specs, rng);
  l.target = l.online;
  nn::AdamConfig ac;
  ac.learning_rate = config.learning_rate;
  l.adam_encoder = nn::make_adam(l.online.encoder, ac);
  l.adam_head = nn::make_adam(l.online.head, ac);
  l.adam_decoder = nn::make_adam(l.online.decoder, ac);
  return l;
}

double vae_train_step(VaeLearner& learner, const TrajectoryBuffer& buffer, Rng& rng) {
  if (buffer.empty()) throw std::invalid_argument("vae_train_step: empty buffer");
  const int D = learner.specs.latent_dim;
  double total = 0.0;
  for (int m = 0; m < learner.config.minibatches; ++m) {
    const auto batch = buffer.sample(static_cast<std::size_t>(learner.config.batch_size), rng);
    nn::Matrix<float> eps(D, static_cast<int>(batch.size()));
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = static_cast<float>(standard_normal(rng));
    VaeModel<float> g;
    const auto terms = vae_objective(learner.specs, learner.online, batch, eps, learner.config.beta,
                                     learner.config.entropy_weight, &g);
    nn::adam_update(learner.online.encoder, std::move(g.encoder), learner.adam_encoder);
    nn::adam_update(learner.online.head, std::move(g.head), learner.adam_head);
    nn::adam_update(learner.online.decoder, std::move(g.decoder), learner.adam_decoder);
    total += terms.loss;
  }
  return total / learner.config.minibatches;
}

void polyak_update(VaeLearner& learner) {
  const double a = learner.config.tracking_rate;
  nn::soft_update(learner.target.encoder, learner.online.encoder, a);
  nn::soft_update(learner.target.head, learner.online.head, a);
  nn::soft_update(learner.target.decoder, learner.online.decoder, a);
}

#define SEPT_VAE_INSTANTIATE(T)                                                                                   \
  template VaeModel<T> init_vae<T>(const VaeSpecs&, Rng&);                                                        \
  template nn::Sequence<T> encoder_inputs<T>(const VaeSpecs&, const std::vector<const Trajectory*>&);             \
  template Posterior<T> encode<T>(const VaeSpecs&, const VaeModel<T>&, const std::vector<const Trajectory*>&);    \
  template Posterior<T> encode<T>(const VaeSpecs&, const VaeModel<T>&, const Trajectory&);                        \
  template nn::Matrix<T> reparameterize<T>(const Posterior<T>&, const nn::Matrix<T>&);                            \
  template nn::Matrix<T> sample_latent<T>(const Posterior<T>&, Rng&);                                             \
  template std::vector<double> kl_to_standard_normal<T>(const Posterior<T>&);                                     \
  template std::vector<double> gaussian_entropy<T>(const Posterior<T>&);                                          \
  template std::vector<double> decode_log_likelihood<T>(const VaeSpecs&, const VaeModel<T>&,                      \
                                                        const std::vector<const Trajectory*>&,                    \
                                                        const nn::Matrix<T>&);                                    \
  template double elbo<T>(const VaeSpecs&, const VaeModel<T>&, const Trajectory&, double, Rng&);                  \
  template ObjectiveTerms vae_objective<T>(const VaeSpecs&, const VaeModel<T>&,                                   \
                                           const std::vector<const Trajectory*>&, const nn::Matrix<T>&, double,   \
                                           double, VaeModel<T>*);

SEPT_VAE_INSTANTIATE(float)
SEPT_VAE_INSTANTIATE(double)

}  // namespace sept::vae
