#include <doctest.h>

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <filesystem>
#include <limits>
#include <sstream>

#include "sept/nn/adam.hpp"
#include "sept/nn/checkpoint.hpp"
#include "sept/nn/network.hpp"
#include "support/gradcheck.hpp"

using namespace sept;
using nn::Matrix;
using nn::Sequence;

namespace {

Sequence<double> random_sequence(int dim, int batch, int len, Rng& rng) {
  Sequence<double> s;
  for (int t = 0; t < len; ++t) {
    Matrix<double> m(dim, batch);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -1.0, 1.0);
    s.push_back(m);
  }
  return s;
}

// Loss = sum_t <C_t, out_t> with fixed random C_t, so dLoss/dout_t = C_t.
double projected_loss(const nn::NetworkSpec& spec, const nn::ParameterSet<double>& p, const Sequence<double>& x,
                      const Sequence<double>& c) {
  const auto out = nn::predict(spec, p, x);
  double l = 0.0;
  for (std::size_t t = 0; t < out.size(); ++t) l += (out[t].array() * c[t].array()).sum();
  return l;
}

testing::GradCheckResult check_spec(const nn::NetworkSpec& spec, int len, std::uint64_t seed) {
  Rng rng(seed);
  auto p = nn::init_parameters<double>(spec, rng);
  const auto x = random_sequence(spec.input_dim, 3, len, rng);
  const auto c = random_sequence(spec.output_dim(), 3, len, rng);
  auto fwd = nn::forward(spec, p, x);
  auto back = nn::backward(spec, p, fwd.cache, c);
  return testing::check_gradient(p, back.grads, [&](const nn::ParameterSet<double>& q) {
    return projected_loss(spec, q, x, c);
  });
}

}  // namespace

TEST_CASE("dense stack gradient matches finite differences") {
  auto spec = nn::mlp_spec(4, {5, 6}, 3, nn::Activation::tanh, nn::Activation::linear);
  CHECK(check_spec(spec, 1, 1).max_rel_error < 1e-6);
  auto soft = nn::mlp_spec(4, {5}, 3, nn::Activation::tanh, nn::Activation::softmax);
  CHECK(check_spec(soft, 1, 2).max_rel_error < 1e-6);
}

TEST_CASE("lstm gradient matches finite differences") {
  nn::NetworkSpec spec{3, {{nn::LayerKind::lstm, 4, nn::Activation::tanh}, {nn::LayerKind::dense, 2, nn::Activation::linear}}};
  CHECK(check_spec(spec, 5, 3).max_rel_error < 1e-4);
}

TEST_CASE("bilstm gradient matches finite differences") {
  nn::NetworkSpec spec{3, {{nn::LayerKind::bilstm, 4, nn::Activation::tanh}}};
  CHECK(check_spec(spec, 4, 4).max_rel_error < 1e-4);
}

TEST_CASE("input gradient of a dense net") {
  auto spec = nn::mlp_spec(3, {4}, 2, nn::Activation::tanh, nn::Activation::linear);
  Rng rng(5);
  auto p = nn::init_parameters<double>(spec, rng);
  auto x = random_sequence(3, 1, 1, rng);
  auto c = random_sequence(2, 1, 1, rng);
  auto fwd = nn::forward(spec, p, x);
  auto back = nn::backward(spec, p, fwd.cache, c);
  const double h = 1e-6;
  for (int i = 0; i < 3; ++i) {
    auto up = x, dn = x;
    up[0](i, 0) += h;
    dn[0](i, 0) -= h;
    const double num = (projected_loss(spec, p, up, c) - projected_loss(spec, p, dn, c)) / (2 * h);
    CHECK(back.input_grads[0](i, 0) == doctest::Approx(num).epsilon(1e-6));
  }
}

TEST_CASE("zero lstm parameters give zero hidden states") {
  nn::NetworkSpec spec{2, {{nn::LayerKind::lstm, 3, nn::Activation::tanh}}};
  auto p = nn::zero_parameters<double>(spec);
  Rng rng(6);
  const auto out = nn::predict(spec, p, random_sequence(2, 2, 4, rng));
  for (const auto& m : out) CHECK(m.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bilstm length-1 gradient is the sum of both directions") {
  nn::NetworkSpec bi{2, {{nn::LayerKind::bilstm, 2, nn::Activation::tanh}}};
  nn::NetworkSpec uni{2, {{nn::LayerKind::lstm, 2, nn::Activation::tanh}}};
  Rng rng(7);
  auto p = nn::init_parameters<double>(bi, rng);
  const auto x = random_sequence(2, 1, 1, rng);
  const auto c = random_sequence(4, 1, 1, rng);
  auto back = nn::backward(bi, p, nn::forward(bi, p, x).cache, c);

  // Each direction on its own is a plain LSTM on the same single step.
  for (int dir = 0; dir < 2; ++dir) {
    const std::string pre = dir == 0 ? "L0.fwd." : "L0.bwd.";
    nn::ParameterSet<double> q;
    for (const char* n : {"W", "U", "b"}) q.tensors.push_back({std::string("L0.fwd.") + n, p.find(pre + n)->value});
    Sequence<double> cd{dir == 0 ? Matrix<double>(c[0].topRows(2)) : Matrix<double>(c[0].bottomRows(2))};
    auto ub = nn::backward(uni, q, nn::forward(uni, q, x).cache, cd);
    for (const char* n : {"W", "U", "b"})
      CHECK((back.grads.find(pre + n)->value - ub.grads.find(std::string("L0.fwd.") + n)->value).norm() < 1e-12);
  }
}

TEST_CASE("forward rejects malformed input") {
  auto spec = nn::mlp_spec(3, {4}, 2, nn::Activation::relu, nn::Activation::linear);
  Rng rng(8);
  auto p = nn::init_parameters<double>(spec, rng);
  CHECK_THROWS_AS(nn::forward(spec, p, Sequence<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(nn::forward(spec, p, Sequence<double>{Matrix<double>::Zero(2, 1)}), std::invalid_argument);
  Matrix<double> bad = Matrix<double>::Zero(3, 1);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(nn::forward(spec, p, Sequence<double>{bad}), std::invalid_argument);
}

TEST_CASE("parameter counts at full widths") {
  // probe: 3x32 relu + softmax over 4 actions from a 2D state
  CHECK(nn::mlp_spec(2, {32, 32, 32}, 4, nn::Activation::relu, nn::Activation::softmax).parameter_count() ==
        (2 * 32 + 32) + 2 * (32 * 32 + 32) + (32 * 4 + 4));
  // Q-net 256 then 512
  CHECK(nn::mlp_spec(8, {256, 512}, 3, nn::Activation::relu, nn::Activation::linear).parameter_count() ==
        (8 * 256 + 256) + (256 * 512 + 512) + (512 * 3 + 3));
  nn::NetworkSpec enc{9, {{nn::LayerKind::bilstm, 300, nn::Activation::tanh}}};
  CHECK(enc.parameter_count() == 2 * (4 * 300 * 9 + 4 * 300 * 300 + 4 * 300));
}

TEST_CASE("soft update endpoints and contraction") {
  auto spec = nn::mlp_spec(2, {3}, 1, nn::Activation::relu, nn::Activation::linear);
  Rng rng(9);
  auto online = nn::init_parameters<double>(spec, rng);
  auto target = nn::init_parameters<double>(spec, rng);
  auto before = target;
  nn::soft_update(target, online, 0.0);
  for (std::size_t i = 0; i < target.size(); ++i) CHECK(target.tensors[i].value == before.tensors[i].value);
  auto diff = [&] {
    double d = 0;
    for (std::size_t i = 0; i < target.size(); ++i) d += (target.tensors[i].value - online.tensors[i].value).squaredNorm();
    return d;
  };
  double last = diff();
  for (int k = 0; k < 20; ++k) {
    nn::soft_update(target, online, 0.1);
    const double d = diff();
    CHECK(d < last);
    last = d;
  }
  nn::soft_update(target, online, 1.0);
  CHECK(diff() == 0.0);
}

TEST_CASE("adam skips non-finite gradients and clips") {
  auto spec = nn::mlp_spec(2, {3}, 1, nn::Activation::relu, nn::Activation::linear);
  Rng rng(10);
  auto p = nn::init_parameters<float>(spec, rng);
  nn::AdamConfig cfg;
  cfg.clip_norm = 1.0;
  auto st = nn::make_adam(p, cfg);
  auto g = p.zeros_like();
  g.tensors[0].value(0, 0) = std::numeric_limits<float>::infinity();
  const auto before = p;
  auto rep = nn::adam_update(p, g, st);
  CHECK_FALSE(rep.applied);
  CHECK(st.skipped == 1);
  CHECK(p.tensors[0].value == before.tensors[0].value);

  auto big = p.zeros_like();
  for (auto& t : big.tensors) t.value.setConstant(10.0f);
  rep = nn::adam_update(p, big, st);
  CHECK(rep.applied);
  CHECK(rep.applied_norm == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("checkpoint round trip is bit exact") {
  nn::NetworkSpec spec{3, {{nn::LayerKind::lstm, 4, nn::Activation::tanh}, {nn::LayerKind::dense, 2, nn::Activation::linear}}};
  Rng rng(11);
  auto p = nn::init_parameters<float>(spec, rng);
  std::stringstream ss;
  nn::write_parameters(ss, p, spec.fingerprint());
  auto q = nn::read_parameters<float>(ss, spec.fingerprint());
  REQUIRE(q.size() == p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(q.tensors[i].name == p.tensors[i].name);
    CHECK(std::memcmp(q.tensors[i].value.data(), p.tensors[i].value.data(), p.tensors[i].value.size() * sizeof(float)) == 0);
  }
  std::stringstream again;
  nn::write_parameters(again, p, spec.fingerprint());
  CHECK_THROWS_AS(nn::read_parameters<float>(again, "in=3|dense:2:linear"), std::runtime_error);
  std::stringstream wide;
  nn::write_parameters(wide, p, spec.fingerprint());
  CHECK_THROWS_AS(nn::read_parameters<double>(wide), std::runtime_error);
}
