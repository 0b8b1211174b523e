#pragma once

// Test-only reference implementations. None of these call into the code
// paths they are used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "vaerl/graph.hpp"
#include "vaerl/nn.hpp"

namespace oracle {

// Plain-loop forward pass in double precision over the layer data.
inline std::vector<double> forward(const vaerl::nn::BasicDenseNet<double>& net, const std::vector<double>& x,
                                   std::vector<std::vector<double>>* pre_out = nullptr) {
  std::vector<double> a = x;
  for (const auto& l : net.layers()) {
    std::vector<double> z(static_cast<std::size_t>(l.weight.rows()), 0.0);
    for (int r = 0; r < l.weight.rows(); ++r) {
      double s = l.bias(r);
      for (int c = 0; c < l.weight.cols(); ++c) s += l.weight(r, c) * a[static_cast<std::size_t>(c)];
      z[static_cast<std::size_t>(r)] = s;
    }
    if (pre_out) pre_out->push_back(z);
    for (auto& v : z) {
      switch (l.activation) {
        case vaerl::nn::Activation::relu:
          v = v > 0 ? v : 0;
          break;
        case vaerl::nn::Activation::tanh:
          v = std::tanh(v);
          break;
        case vaerl::nn::Activation::sigmoid:
          v = 1.0 / (1.0 + std::exp(-v));
          break;
        case vaerl::nn::Activation::identity:
          break;
      }
    }
    a = std::move(z);
  }
  return a;
}

// Single-sample loss written out directly from its definition.
inline double loss(vaerl::nn::LossKind kind, const std::vector<double>& y, const std::vector<double>& t) {
  double s = 0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    switch (kind) {
      case vaerl::nn::LossKind::mse:
        s += (y[k] - t[k]) * (y[k] - t[k]) / static_cast<double>(y.size());
        break;
      case vaerl::nn::LossKind::bce: {
        const double p = std::clamp(y[k], 1e-7, 1 - 1e-7);
        s -= t[k] * std::log(p) + (1 - t[k]) * std::log(1 - p);
        break;
      }
      case vaerl::nn::LossKind::scalar_output:
        s += t[k] * y[k];
        break;
    }
  }
  return s;
}

inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Smallest |pre-activation| over all relu layers: used to skip inputs that sit
// on a kink where finite differences are meaningless.
inline double min_relu_margin(const vaerl::nn::BasicDenseNet<double>& net, const std::vector<double>& x) {
  std::vector<std::vector<double>> pre;
  forward(net, x, &pre);
  double m = INFINITY;
  for (std::size_t k = 0; k < pre.size(); ++k)
    if (net.layers()[k].activation == vaerl::nn::Activation::relu)
      for (double v : pre[k]) m = std::min(m, std::abs(v));
  return m;
}

// All shortest paths between s and t, each as a node sequence.
inline std::vector<std::vector<int>> all_shortest_paths(const vaerl::graph::Topology& g, int s, int t) {
  const int n = g.n();
  // Iterative deepening over simple paths: the first depth with any hit is the distance.
  for (int len = 1; len < n; ++len) {
    std::vector<std::vector<int>> found;
    std::vector<int> path{s};
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    used[static_cast<std::size_t>(s)] = true;
    std::function<void()> dfs = [&]() {
      const int u = path.back();
      if (static_cast<int>(path.size()) - 1 == len) {
        if (u == t) found.push_back(path);
        return;
      }
      for (int w = 0; w < n; ++w) {
        if (used[static_cast<std::size_t>(w)] || !g.linked(u, w)) continue;
        used[static_cast<std::size_t>(w)] = true;
        path.push_back(w);
        dfs();
        path.pop_back();
        used[static_cast<std::size_t>(w)] = false;
      }
    };
    dfs();
    if (!found.empty()) return found;
  }
  return {};
}

inline std::vector<double> brute_force_betweenness(const vaerl::graph::Topology& g) {
  const int n = g.n();
  std::vector<double> bc(static_cast<std::size_t>(n), 0.0);
  for (int s = 0; s < n; ++s)
    for (int t = s + 1; t < n; ++t) {
      const auto paths = all_shortest_paths(g, s, t);
      if (paths.empty()) continue;
      for (int v = 0; v < n; ++v) {
        int on = 0;
        for (const auto& p : paths)
          if (std::find(p.begin(), p.end(), v) != p.end()) ++on;
        bc[static_cast<std::size_t>(v)] += static_cast<double>(on) / static_cast<double>(paths.size());
      }
    }
  const double pairs = n * (n - 1) / 2.0;
  if (pairs > 0)
    for (auto& b : bc) b /= pairs;
  return bc;
}

inline std::vector<int> brute_force_degrees(const vaerl::graph::Topology& g) {
  const auto m = vaerl::graph::unflatten(g);
  std::vector<int> d(static_cast<std::size_t>(g.n()), 0);
  for (int i = 0; i < g.n(); ++i)
    for (int j = 0; j < g.n(); ++j) d[static_cast<std::size_t>(i)] += m(i, j);
  return d;
}

}  // namespace oracle
