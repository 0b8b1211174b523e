#pragma once

#include <random>
#include <string>

#include "oracles.hpp"

namespace oracle {

struct GradientCheckResult {
  double max_relative_error = 0;
  int components = 0;
  std::string worst;
};

// Compares analytic gradients from loss_and_gradients (single sample) against
// central differences of the reference forward/loss, step `h`.
inline GradientCheckResult check_gradients(vaerl::nn::BasicDenseNet<double> net, vaerl::nn::LossKind kind,
                                           const std::vector<double>& x, const std::vector<double>& target,
                                           double h = 1e-5) {
  using vaerl::nn::MatrixT;
  MatrixT<double> X(static_cast<Eigen::Index>(x.size()), 1);
  for (std::size_t i = 0; i < x.size(); ++i) X(static_cast<Eigen::Index>(i), 0) = x[i];
  MatrixT<double> T(static_cast<Eigen::Index>(target.size()), 1);
  for (std::size_t i = 0; i < target.size(); ++i) T(static_cast<Eigen::Index>(i), 0) = target[i];
  const auto analytic = vaerl::nn::loss_and_gradients<double>(net, X, kind, T);

  GradientCheckResult res;
  auto record = [&](double a, double numeric, const std::string& where) {
    const double e = relative_error(a, numeric);
    ++res.components;
    if (e > res.max_relative_error) {
      res.max_relative_error = e;
      res.worst = where + " analytic=" + std::to_string(a) + " numeric=" + std::to_string(numeric);
    }
  };
  auto eval = [&](const vaerl::nn::BasicDenseNet<double>& n, const std::vector<double>& in) {
    return loss(kind, forward(n, in), target);
  };

  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    auto& layer = net.layer(k);
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        const double orig = layer.weight(r, c);
        layer.weight(r, c) = orig + h;
        const double up = eval(net, x);
        layer.weight(r, c) = orig - h;
        const double down = eval(net, x);
        layer.weight(r, c) = orig;
        record(analytic.grads.weight[k](r, c), (up - down) / (2 * h),
               "W" + std::to_string(k) + "(" + std::to_string(r) + "," + std::to_string(c) + ")");
      }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      const double orig = layer.bias(r);
      layer.bias(r) = orig + h;
      const double up = eval(net, x);
      layer.bias(r) = orig - h;
      const double down = eval(net, x);
      layer.bias(r) = orig;
      record(analytic.grads.bias[k](r), (up - down) / (2 * h), "b" + std::to_string(k) + "(" + std::to_string(r) + ")");
    }
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto xp = x;
    xp[i] += h;
    auto xm = x;
    xm[i] -= h;
    record(analytic.grads.input(static_cast<Eigen::Index>(i), 0), (eval(net, xp) - eval(net, xm)) / (2 * h),
           "x(" + std::to_string(i) + ")");
  }
  return res;
}

struct RandomCase {
  vaerl::nn::BasicDenseNet<double> net;
  std::vector<double> input;
  std::vector<double> target;
};

// Random small network with the given hidden/head activations and a matching
// target: bce targets lie in [0, 1], scalar-output "targets" are upstream weights.
inline RandomCase random_case(std::mt19937_64& rng, vaerl::nn::Activation hidden, vaerl::nn::Activation head,
                              vaerl::nn::LossKind kind, int max_width = 4) {
  std::uniform_int_distribution<int> width(1, max_width);
  std::uniform_int_distribution<int> depth(1, 3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<int> widths{width(rng)};
  const int layers = depth(rng);
  for (int k = 0; k < layers; ++k) widths.push_back(width(rng));
  if (kind == vaerl::nn::LossKind::scalar_output) widths.back() = 1;
  for (int attempt = 0;; ++attempt) {
    auto net = vaerl::nn::BasicDenseNet<double>::make(std::span<const int>(widths), hidden, head, rng);
    for (std::size_t k = 0; k < net.layer_count(); ++k)
      for (Eigen::Index r = 0; r < net.layer(k).bias.size(); ++r) net.layer(k).bias(r) = 0.3 * u(rng);
    std::vector<double> x(static_cast<std::size_t>(widths.front()));
    for (auto& v : x) v = u(rng);
    if (min_relu_margin(net, x) < 1e-3 && attempt < 100) continue;
    std::vector<double> t(static_cast<std::size_t>(widths.back()));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& v : t) v = kind == vaerl::nn::LossKind::bce ? unit(rng) : u(rng);
    return {std::move(net), std::move(x), std::move(t)};
  }
}

}  // namespace oracle
