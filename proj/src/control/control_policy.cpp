#include "sept/control/control_policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sept::control {

SumTree::SumTree(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("SumTree: capacity must be positive");
  leaf_base_ = 1;
  while (leaf_base_ < capacity) leaf_base_ <<= 1;
  nodes_.assign(2 * leaf_base_, 0.0);
}

void SumTree::set(std::size_t index, double priority) {
  if (index >= capacity_) throw std::out_of_range("SumTree: index out of range");
  if (!(priority >= 0.0) || !std::isfinite(priority)) throw std::invalid_argument("SumTree: bad priority");
  std::size_t node = leaf_base_ + index;
  nodes_[node] = priority;
  // Recompute parents from children instead of adding deltas, so rounding
  // never accumulates.
  for (node >>= 1; node >= 1; node >>= 1) nodes_[node] = nodes_[2 * node] + nodes_[2 * node + 1];
}

std::size_t SumTree::find(double mass) const {
  std::size_t node = 1;
  while (node < leaf_base_) {
    const std::size_t left = 2 * node;
    if (mass < nodes_[left] || nodes_[left + 1] <= 0.0) {
      node = left;
    } else {
      mass -= nodes_[left];
      node = left + 1;
    }
  }
  std::size_t idx = node - leaf_base_;
  // Rounding can land on an empty trailing leaf; walk back to a live one.
  while (idx > 0 && (idx >= capacity_ || nodes_[leaf_base_ + idx] <= 0.0)) --idx;
  return idx;
}

ReplayBuffer::ReplayBuffer(const ReplayConfig& config) : config_(config), tree_(config.capacity) {
  items_.reserve(std::min<std::size_t>(config.capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < config_.capacity) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  tree_.set(next_, max_priority_);
  next_ = (next_ + 1) % config_.capacity;
  size_ = std::min(size_ + 1, config_.capacity);
}

ReplaySample ReplayBuffer::sample(std::size_t batch, double is_exponent, Rng& rng) const {
  if (size_ == 0) throw std::invalid_argument("ReplayBuffer: sample from empty buffer");
  ReplaySample out;
  out.indices.reserve(batch);
  out.weights.reserve(batch);
  const double total = tree_.total();
  const double segment = total / static_cast<double>(batch);
  double max_w = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const double mass = std::min(segment * (static_cast<double>(i) + uniform(rng, 0.0, 1.0)), std::nextafter(total, 0.0));
    const std::size_t idx = tree_.find(mass);
    const double p = tree_.get(idx) / total;
    const double w = std::pow(static_cast<double>(size_) * p, -is_exponent);
    out.indices.push_back(idx);
    out.weights.push_back(w);
    max_w = std::max(max_w, w);
  }
  for (auto& w : out.weights) w /= max_w;
  return out;
}

void ReplayBuffer::update_priorities(const std::vector<std::size_t>& indices, const std::vector<double>& td_errors) {
  if (indices.size() != td_errors.size()) throw std::invalid_argument("update_priorities: size mismatch");
  for (std::size_t k = 0; k < indices.size(); ++k) {
    double e = std::abs(td_errors[k]);
    if (!std::isfinite(e)) e = max_priority_;
    const double p = std::pow(e + config_.priority_floor, config_.priority_exponent);
    tree_.set(indices[k], p);
    max_priority_ = std::max(max_priority_, p);
  }
}

nn::NetworkSpec make_q_spec(int input_dim, int action_count, const std::vector<int>& hidden) {
  return nn::mlp_spec(input_dim, hidden, action_count, nn::Activation::relu, nn::Activation::linear);
}

QLearner make_q_learner(int input_dim, int action_count, const QConfig& config, Rng& rng) {
  if (config.batch_size < 1 || config.train_every < 1) throw std::invalid_argument("q: bad batch settings");
  QLearner l;
  l.config = config;
  l.spec = make_q_spec(input_dim, action_count, config.hidden);
  l.online = nn::init_parameters<float>(l.spec, rng);
  l.target = l.online;
  nn::AdamConfig ac;
  ac.learning_rate = config.learning_rate;
  ac.clip_norm = config.clip_norm;
  l.adam = nn::make_adam(l.online, ac);
  return l;
}

std::vector<float> q_input(const std::vector<double>& state, const std::vector<double>& cond) {
  std::vector<float> x;
  x.reserve(state.size() + cond.size());
  for (double v : state) x.push_back(static_cast<float>(v));
  for (double v : cond) x.push_back(static_cast<float>(v));
  return x;
}

std::vector<double> q_values(const QLearner& learner, const std::vector<float>& input) {
  const Eigen::Map<const nn::Matrix<float>> x(input.data(), static_cast<Eigen::Index>(input.size()), 1);
  const nn::Matrix<float> q = nn::predict(learner.spec, learner.online, nn::Matrix<float>(x));
  return {q.data(), q.data() + q.size()};
}

int argmax_lowest(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("argmax of empty vector");
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

int act_epsilon_greedy(const QLearner& learner, const std::vector<float>& input, double epsilon, Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("epsilon must lie in [0, 1]");
  const int n = learner.spec.output_dim();
  if (epsilon > 0.0 && uniform(rng, 0.0, 1.0) < epsilon) return uniform_index(rng, n);
  return argmax_lowest(q_values(learner, input));
}

double epsilon_schedule(long long episode, double eps_start, double eps_end, long long total_episodes) {
  if (!(eps_end > 0.0 && eps_end <= eps_start && eps_start <= 1.0))
    throw std::invalid_argument("epsilon_schedule: need 0 < eps_end <= eps_start <= 1");
  if (total_episodes <= 0) return eps_end;
  const double frac = std::clamp(static_cast<double>(episode) / static_cast<double>(total_episodes), 0.0, 1.0);
  return eps_start * std::pow(eps_end / eps_start, frac);
}

template <typename T>
std::vector<double> ddqn_targets(const nn::Matrix<T>& q_online_next, const nn::Matrix<T>& q_target_next,
                                 const std::vector<double>& rewards, const std::vector<bool>& dones, double gamma) {
  const auto B = static_cast<std::size_t>(q_online_next.cols());
  if (rewards.size() != B || dones.size() != B || q_target_next.cols() != q_online_next.cols())
    throw std::invalid_argument("ddqn_targets: shape mismatch");
  std::vector<double> y(B);
  for (std::size_t b = 0; b < B; ++b) {
    if (dones[b]) {
      y[b] = rewards[b];
      continue;
    }
    std::vector<double> col(q_online_next.rows());
    for (Eigen::Index a = 0; a < q_online_next.rows(); ++a) col[a] = q_online_next(a, b);
    const int a_star = argmax_lowest(col);
    y[b] = rewards[b] + gamma * static_cast<double>(q_target_next(a_star, b));
  }
  return y;
}

template <typename T>
QLossResult q_loss(const nn::NetworkSpec& spec, const nn::ParameterSet<T>& params, const nn::Matrix<T>& inputs,
                   const std::vector<int>& actions, const std::vector<double>& targets,
                   const std::vector<double>& weights, double huber_delta, nn::ParameterSet<T>* grads) {
  const auto B = static_cast<std::size_t>(inputs.cols());
  if (actions.size() != B || targets.size() != B || weights.size() != B)
    throw std::invalid_argument("q_loss: batch size mismatch");
  auto fwd = nn::forward(spec, params, nn::Sequence<T>{inputs});
  const auto& q = fwd.outputs[0];
  QLossResult res;
  res.td_errors.resize(B);
  nn::Matrix<T> g = nn::Matrix<T>::Zero(q.rows(), q.cols());
  for (std::size_t b = 0; b < B; ++b) {
    const double d = static_cast<double>(q(actions[b], b)) - targets[b];
    res.td_errors[b] = d;
    const double ad = std::abs(d);
    const double h = ad <= huber_delta ? 0.5 * d * d : huber_delta * (ad - 0.5 * huber_delta);
    res.loss += weights[b] * h;
    const double dh = ad <= huber_delta ? d : huber_delta * (d > 0 ? 1.0 : -1.0);
    g(actions[b], b) = static_cast<T>(weights[b] * dh / static_cast<double>(B));
  }
  res.loss /= static_cast<double>(B);
  if (grads) *grads = nn::backward(spec, params, fwd.cache, nn::Sequence<T>{g}).grads;
  return res;
}

TrainReport ddqn_train_step(QLearner& learner, ReplayBuffer& buffer, Rng& rng) {
  const auto B = static_cast<std::size_t>(learner.config.batch_size);
  if (buffer.size() < B) throw std::invalid_argument("ddqn_train_step: not enough transitions");
  const auto& rc = buffer.config();
  const double anneal =
      std::min(1.0, static_cast<double>(learner.train_steps) / static_cast<double>(std::max(1LL, learner.config.is_anneal_steps)));
  const double is_exp = rc.is_exponent_start + anneal * (rc.is_exponent_end - rc.is_exponent_start);
  auto smp = buffer.sample(B, is_exp, rng);

  const int in_dim = learner.spec.input_dim;
  nn::Matrix<float> x(in_dim, static_cast<int>(B)), xn(in_dim, static_cast<int>(B));
  std::vector<int> actions(B);
  std::vector<double> rewards(B);
  std::vector<bool> dones(B);
  for (std::size_t b = 0; b < B; ++b) {
    const auto& t = buffer[smp.indices[b]];
    for (int i = 0; i < in_dim; ++i) {
      x(i, b) = t.input[i];
      xn(i, b) = t.next_input[i];
    }
    actions[b] = t.action;
    rewards[b] = t.reward;
    dones[b] = t.done;
  }
  const auto q_on = nn::predict(learner.spec, learner.online, xn);
  const auto q_tg = nn::predict(learner.spec, learner.target, xn);
  const auto y = ddqn_targets(q_on, q_tg, rewards, dones, learner.config.gamma);

  nn::ParameterSet<float> grads;
  auto loss = q_loss(learner.spec, learner.online, x, actions, y, smp.weights, learner.config.huber_delta, &grads);
  nn::adam_update(learner.online, std::move(grads), learner.adam);
  nn::soft_update(learner.target, learner.online, learner.config.target_rate);
  buffer.update_priorities(smp.indices, loss.td_errors);
  ++learner.train_steps;
  return {loss.loss, std::move(smp.indices), std::move(loss.td_errors)};
}

bool observe(QLearner& learner, ReplayBuffer& buffer, Transition t, Rng& rng) {
  t.reward = static_cast<float>(t.reward * learner.config.reward_scale);
  buffer.push(std::move(t));
  ++learner.env_steps;
  if (learner.env_steps % learner.config.train_every != 0) return false;
  if (buffer.size() < static_cast<std::size_t>(learner.config.batch_size)) return false;
  ddqn_train_step(learner, buffer, rng);
  return true;
}

template std::vector<double> ddqn_targets<float>(const nn::Matrix<float>&, const nn::Matrix<float>&,
                                                 const std::vector<double>&, const std::vector<bool>&, double);
template std::vector<double> ddqn_targets<double>(const nn::Matrix<double>&, const nn::Matrix<double>&,
                                                  const std::vector<double>&, const std::vector<bool>&, double);
template QLossResult q_loss<float>(const nn::NetworkSpec&, const nn::ParameterSet<float>&, const nn::Matrix<float>&,
                                   const std::vector<int>&, const std::vector<double>&, const std::vector<double>&,
                                   double, nn::ParameterSet<float>*);
template QLossResult q_loss<double>(const nn::NetworkSpec&, const nn::ParameterSet<double>&,
                                    const nn::Matrix<double>&, const std::vector<int>&, const std::vector<double>&,
                                    const std::vector<double>&, double, nn::ParameterSet<double>*);

}  // namespace sept::control
