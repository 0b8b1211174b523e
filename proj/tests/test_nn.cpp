#include <cmath>
#include <random>

#include "doctest.h"
#include "gradient_check.hpp"
#include "oracles.hpp"
#include "vaerl/nn.hpp"

using namespace vaerl;
using nn::Activation;
using nn::LossKind;

namespace {

nn::DenseNet single_layer(nn::Matrix w, nn::Vector b, Activation a) {
  return nn::DenseNet({nn::Layer<float>{std::move(w), std::move(b), a}});
}

nn::Vector vec(std::initializer_list<float> v) {
  nn::Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (float x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("forward: zero weights return the bias") {
  auto net = single_layer(nn::Matrix::Zero(3, 2), vec({0.5f, -1.f, 2.f}), Activation::identity);
  auto y = net.forward(vec({7.f, -3.f}));
  CHECK(y == vec({0.5f, -1.f, 2.f}));
}

TEST_CASE("forward: identity layer passes input through") {
  auto net = single_layer(nn::Matrix::Identity(2, 2), nn::Vector::Zero(2), Activation::identity);
  CHECK(net.forward(vec({1.f, 2.f})) == vec({1.f, 2.f}));
}

TEST_CASE("forward: two-layer relu net matches hand evaluation") {
  nn::Matrix w1(2, 2);
  w1 << 1.f, 2.f, -1.f, 0.5f;
  nn::Matrix w2(1, 2);
  w2 << 3.f, -2.f;
  nn::DenseNet net({nn::Layer<float>{w1, vec({0.f, 1.f}), Activation::relu},
                    nn::Layer<float>{w2, vec({0.25f}), Activation::identity}});
  // hidden pre = (1 - 2 + 0, -1 - 0.5 + 1) = (-1, -0.5) -> relu (0, 0); out = 0.25
  CHECK(net.forward(vec({1.f, -1.f}))(0) == doctest::Approx(0.25));
  // input (2, 1): pre = (4, -2 + 0.5 + 1) = (4, -0.5) -> (4, 0); out = 12.25
  CHECK(net.forward(vec({2.f, 1.f}))(0) == doctest::Approx(12.25));
}

TEST_CASE("forward: dimension mismatch names the layer") {
  std::mt19937_64 rng(1);
  auto net = nn::DenseNet::make({3, 4, 2}, Activation::relu, Activation::identity, rng);
  CHECK(net.input_dim() == 3);
  CHECK(net.output_dim() == 2);
  try {
    net.forward(vec({1.f, 2.f}));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
  }
  CHECK_THROWS_AS(nn::DenseNet({nn::Layer<float>{nn::Matrix::Zero(2, 3), nn::Vector::Zero(2), Activation::relu},
                                nn::Layer<float>{nn::Matrix::Zero(1, 3), nn::Vector::Zero(1), Activation::relu}}),
                  DimensionError);
}

TEST_CASE("init: weights bounded by 1/sqrt(fan_in), biases zero") {
  std::mt19937_64 rng(3);
  auto net = nn::DenseNet::make({16, 8, 4}, Activation::relu, Activation::tanh, rng);
  for (const auto& l : net.layers()) {
    const float bound = 1.f / std::sqrt(static_cast<float>(l.in_dim()));
    CHECK(l.weight.cwiseAbs().maxCoeff() <= bound);
    CHECK(l.bias.isZero());
  }
  CHECK(net.layers().back().activation == Activation::tanh);
}

TEST_CASE("grad: constant network has zero gradients") {
  auto net = single_layer(nn::Matrix::Zero(2, 3), vec({0.3f, 0.7f}), Activation::identity);
  nn::Matrix x = nn::Matrix::Random(3, 4);
  nn::Matrix t = nn::Matrix::Constant(2, 4, 0.3f);
  t.row(1).setConstant(0.7f);
  auto r = nn::loss_and_gradients(net, x, LossKind::mse, t);
  CHECK(r.loss == 0.f);
  CHECK(r.grads.weight[0].isZero());
  CHECK(r.grads.bias[0].isZero());
  CHECK(r.grads.input.isZero());
}

TEST_CASE("grad: linear scalar net has input gradient equal to weights") {
  nn::Matrix w(1, 3);
  w << 0.5f, -2.f, 1.25f;
  auto net = single_layer(w, vec({0.f}), Activation::identity);
  nn::Matrix a(3, 1);
  a << 1.f, 2.f, 3.f;
  auto r = nn::loss_and_gradients(net, a, LossKind::scalar_output, nn::Matrix::Ones(1, 1));
  CHECK(r.grads.input.col(0) == w.row(0).transpose());
}

TEST_CASE("grad: bce rejects targets outside [0,1]") {
  std::mt19937_64 rng(2);
  auto net = nn::DenseNet::make({2, 2}, Activation::relu, Activation::sigmoid, rng);
  nn::Matrix t(2, 1);
  t << 0.5f, 1.5f;
  CHECK_THROWS_AS(nn::loss_and_gradients(net, nn::Matrix::Zero(2, 1), LossKind::bce, t), InvalidArgument);
}

TEST_CASE("grad: matches central finite differences on random small nets") {
  std::mt19937_64 rng(20240501);
  const Activation acts[] = {Activation::relu, Activation::tanh, Activation::sigmoid, Activation::identity};
  for (auto hidden : acts)
    for (auto head : acts)
      for (auto kind : {LossKind::mse, LossKind::scalar_output, LossKind::bce}) {
        if (kind == LossKind::bce && head != Activation::sigmoid) continue;
        auto c = oracle::random_case(rng, hidden, head, kind);
        CHECK(c.net.parameter_count() <= 60);
        auto res = oracle::check_gradients(c.net, kind, c.input, c.target);
        INFO(nn::to_string(hidden), "/", nn::to_string(head), " worst ", res.worst);
        CHECK(res.max_relative_error < 1e-4);
      }
}

TEST_CASE("grad: batch gradient is the mean of per-sample gradients") {
  std::mt19937_64 rng(9);
  auto net = nn::BasicDenseNet<double>::make({3, 5, 2}, Activation::tanh, Activation::identity, rng);
  nn::MatrixT<double> x = nn::MatrixT<double>::Random(3, 4);
  nn::MatrixT<double> t = nn::MatrixT<double>::Random(2, 4);
  auto full = nn::loss_and_gradients<double>(net, x, LossKind::mse, t);
  auto acc = net.zero_gradients();
  for (int b = 0; b < 4; ++b) {
    nn::MatrixT<double> xb = x.col(b);
    nn::MatrixT<double> tb = t.col(b);
    acc += nn::loss_and_gradients<double>(net, xb, LossKind::mse, tb).grads;
  }
  acc.scale(0.25);
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    CHECK((full.grads.weight[k] - acc.weight[k]).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((full.grads.bias[k] - acc.bias[k]).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged and counts the step") {
  std::mt19937_64 rng(4);
  auto net = nn::DenseNet::make({3, 2}, Activation::relu, Activation::identity, rng);
  const auto before = net;
  nn::AdamState state(net, {});
  nn::adam_step(net, net.zero_gradients(), state);
  CHECK(net == before);
  CHECK(state.step_count() == 1);
}

TEST_CASE("adam: first step on a scalar parameter is -lr/(1+eps)") {
  nn::BasicDenseNet<double> net({nn::Layer<double>{nn::MatrixT<double>::Zero(1, 1), nn::VectorT<double>::Zero(1),
                                                   Activation::identity}});
  nn::BasicAdamState<double> state(net, {0.001, 0.9, 0.999, 1e-8});
  auto g = net.zero_gradients();
  g.weight[0](0, 0) = 1.0;
  nn::adam_step(net, g, state);
  const double d1 = net.layer(0).weight(0, 0);
  CHECK(d1 == doctest::Approx(-0.001 / (1.0 + 1e-8)).epsilon(1e-12));
  nn::adam_step(net, g, state);
  const double d2 = net.layer(0).weight(0, 0) - d1;
  CHECK(std::abs(d2) <= std::abs(d1) * (1 + 1e-6));
  CHECK(state.step_count() == 2);
}

TEST_CASE("adam: non-finite parameters abort") {
  auto net = single_layer(nn::Matrix::Zero(1, 1), vec({0.f}), Activation::identity);
  nn::AdamState state(net, {});
  auto g = net.zero_gradients();
  g.weight[0](0, 0) = std::nanf("");
  CHECK_THROWS_AS(nn::adam_step(net, g, state), NonFiniteError);
}

TEST_CASE("adam: identical seeds give bit-identical parameters") {
  auto run = [] {
    std::mt19937_64 rng(11);
    auto net = nn::DenseNet::make({4, 8, 2}, Activation::relu, Activation::identity, rng);
    nn::AdamState st(net, {});
    std::normal_distribution<float> nd;
    for (int step = 0; step < 25; ++step) {
      nn::Matrix x(4, 8), t(2, 8);
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = nd(rng);
      st.step(net, nn::loss_and_gradients(net, x, LossKind::mse, t).grads);
    }
    return net;
  };
  CHECK(run() == run());
}

TEST_CASE("soft update with tau=1 copies the source") {
  std::mt19937_64 rng(5);
  auto a = nn::DenseNet::make({3, 4, 1}, Activation::relu, Activation::identity, rng);
  auto b = nn::DenseNet::make({3, 4, 1}, Activation::relu, Activation::identity, rng);
  b.soft_update_from(a, 1.f);
  CHECK(a == b);
}

TEST_CASE("checkpoint: round trip is bit-identical") {
  std::mt19937_64 rng(6);
  auto net = nn::DenseNet::make({5, 7, 3}, Activation::relu, Activation::sigmoid, rng);
  net.layer(0).bias(2) = -0.125f;
  auto bytes = nn::save_checkpoint(net);
  auto back = nn::load_checkpoint(bytes);
  CHECK(back == net);
  nn::Matrix x = nn::Matrix::Random(5, 3);
  nn::Matrix y1 = net.forward_batch(x), y2 = back.forward_batch(x);
  CHECK(std::memcmp(y1.data(), y2.data(), sizeof(float) * static_cast<std::size_t>(y1.size())) == 0);
  CHECK(std::string(bytes.begin(), bytes.begin() + 7) == "VAERLNN");
}

TEST_CASE("checkpoint: corruption and version errors") {
  std::mt19937_64 rng(7);
  auto net = nn::DenseNet::make({2, 3, 1}, Activation::relu, Activation::identity, rng);
  auto bytes = nn::save_checkpoint(net);

  SUBCASE("truncated") {
    bytes.resize(bytes.size() - 9);
    CHECK_THROWS_AS(nn::load_checkpoint(bytes), CorruptCheckpoint);
  }
  SUBCASE("flipped parameter bit") {
    bytes[bytes.size() - 10] ^= 0x01;
    CHECK_THROWS_AS(nn::load_checkpoint(bytes), CorruptCheckpoint);
  }
  SUBCASE("version bumped") {
    bytes[8] = static_cast<std::uint8_t>(nn::kCheckpointVersion + 1);
    CHECK_THROWS_AS(nn::load_checkpoint(bytes), VersionMismatch);
  }
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    CHECK_THROWS_AS(nn::load_checkpoint(bytes), CorruptCheckpoint);
  }
}

TEST_CASE("parameter checksum tells networks apart") {
  std::mt19937_64 a(1), b(2);
  const auto x = nn::DenseNet::make({3, 4, 2}, Activation::relu, Activation::identity, a);
  auto y = nn::DenseNet::make({3, 4, 2}, Activation::relu, Activation::identity, b);
  CHECK(nn::parameter_checksum(x) == nn::parameter_checksum(x));
  CHECK(nn::parameter_checksum(x) != nn::parameter_checksum(y));
  const auto before = nn::parameter_checksum(y);
  y.layer(0).bias(0) += 1e-3f;
  CHECK(nn::parameter_checksum(y) != before);
}
