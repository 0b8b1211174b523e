#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "vaerl/graph.hpp"

using namespace vaerl;
using graph::DensityCategory;
using graph::Topology;

namespace {

Topology star(int n, int center) {
  Topology t(n);
  for (int v = 0; v < n; ++v)
    if (v != center) t.set_link(center, v, true);
  return t;
}

}  // namespace

TEST_CASE("flatten: upper-triangle row-major ordering") {
  graph::Adjacency path{3, {0, 1, 0, 1, 0, 1, 0, 1, 0}};
  CHECK(graph::flatten(path).bits() == std::vector<std::uint8_t>{1, 0, 1});
  CHECK(graph::flatten(graph::Adjacency{4, std::vector<std::uint8_t>(16, 0)}).link_count() == 0);
  CHECK(graph::slot_index(4, 0, 1) == 0);
  CHECK(graph::slot_index(4, 2, 3) == 5);
  CHECK(graph::slot_index(4, 3, 1) == graph::slot_index(4, 1, 3));
}

TEST_CASE("flatten: rejects asymmetric or looped matrices") {
  CHECK_THROWS_AS(graph::flatten(graph::Adjacency{2, {0, 1, 0, 0}}), InvalidArgument);
  CHECK_THROWS_AS(graph::flatten(graph::Adjacency{2, {1, 0, 0, 0}}), InvalidArgument);
  CHECK_THROWS_AS(graph::flatten(graph::Adjacency{2, {0, 2, 2, 0}}), InvalidArgument);
}

TEST_CASE("flatten/unflatten bijective over all n=4 topologies") {
  auto all = graph::enumerate_all(4);
  std::set<std::vector<std::uint8_t>> seen;
  for (const auto& t : all.topologies) {
    auto m = graph::unflatten(t);
    for (int i = 0; i < 4; ++i) {
      CHECK(m(i, i) == 0);
      for (int j = 0; j < 4; ++j) CHECK(m(i, j) == m(j, i));
    }
    CHECK(graph::flatten(m) == t);
    seen.insert(m.cells);
  }
  CHECK(seen.size() == 64);
}

TEST_CASE("enumerate_all sizes and guard") {
  CHECK(graph::enumerate_all(3).topologies.size() == 8);
  CHECK(graph::enumerate_all(4).topologies.size() == 64);
  CHECK_THROWS_AS(graph::enumerate_all(10), InvalidArgument);
  auto all = graph::enumerate_all(4);
  CHECK(all.topologies.front().link_count() == 0);
  CHECK(all.topologies.back() == Topology::complete(4));
}

TEST_CASE("index encoding: 0 is empty, all-ones is complete") {
  CHECK(Topology::from_index(4, 0).link_count() == 0);
  CHECK(Topology::from_index(4, 63) == Topology::complete(4));
  for (std::uint64_t i = 0; i < 64; ++i) CHECK(Topology::from_index(4, i).index() == i);
  CHECK_THROWS_AS(Topology::from_index(4, 64), InvalidArgument);
}

TEST_CASE("sample_topologies: link-count mean, reproducibility, stratification") {
  auto ds = graph::sample_topologies(10, 1000, 42);
  double mean = 0;
  for (const auto& t : ds.topologies) mean += t.link_count();
  mean /= 1000.0;
  CHECK(mean == doctest::Approx(22.5).epsilon(1.5 / 22.5));

  auto again = graph::sample_topologies(10, 1000, 42);
  CHECK(again.topologies == ds.topologies);
  CHECK(graph::sample_topologies(10, 1000, 43).topologies != ds.topologies);

  auto big = graph::sample_topologies(10, 2000, 7);
  std::array<int, 4> counts{};
  for (const auto& t : big.topologies) ++counts[static_cast<std::size_t>(graph::density_category(t))];
  for (int c : counts) CHECK(c >= 100);

  CHECK_THROWS_AS(graph::sample_topologies(4, 0, 1), InvalidArgument);
}

TEST_CASE("split: disjoint and exhaustive") {
  auto ds = graph::enumerate_all(4);
  graph::split_dataset(ds, 0.9, 0);
  CHECK(ds.train_indices.size() == 58);
  CHECK(ds.validation_indices.size() == 6);
  std::vector<std::size_t> all = ds.train_indices;
  all.insert(all.end(), ds.validation_indices.begin(), ds.validation_indices.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 64; ++i) CHECK(all[i] == i);
}

TEST_CASE("dataset text format round trip") {
  auto ds = graph::sample_topologies(5, 20, 99);
  auto text = graph::format_dataset(ds);
  CHECK(text.rfind("n=5\nseed=99\n", 0) == 0);
  auto back = graph::parse_dataset(text);
  CHECK(back.n == 5);
  CHECK(back.seed == 99);
  CHECK(back.topologies == ds.topologies);
  CHECK_THROWS_AS(graph::parse_dataset("n=3\nseed=1\n0102\n"), InvalidArgument);
  CHECK_THROWS_AS(graph::parse_dataset("seed=1\nn=3\n"), InvalidArgument);
}

TEST_CASE("degrees") {
  CHECK(graph::degrees(Topology::complete(3)) == std::vector<int>{2, 2, 2});
  CHECK(graph::degrees(Topology(5)) == std::vector<int>(5, 0));
  CHECK(graph::degrees(star(4, 0)) == std::vector<int>{3, 1, 1, 1});
}

TEST_CASE("degree sum equals twice the link count") {
  auto ds = graph::sample_topologies(8, 1000, 5);
  for (const auto& t : ds.topologies) {
    auto d = graph::degrees(t);
    CHECK(std::accumulate(d.begin(), d.end(), 0) == 2 * t.link_count());
  }
}

TEST_CASE("betweenness: closed-form cases") {
  CHECK(graph::betweenness(Topology(4)) == std::vector<double>(4, 0.0));
  auto s = graph::betweenness(star(3, 1));
  CHECK(s[1] == doctest::Approx(1.0));
  CHECK(s[0] == doctest::Approx(2.0 / 3.0));
  CHECK(s[2] == doctest::Approx(2.0 / 3.0));
  for (double b : graph::betweenness(Topology::complete(3))) CHECK(b == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("betweenness matches brute-force path enumeration for n<=5") {
  for (int n = 2; n <= 4; ++n)
    for (const auto& t : graph::enumerate_all(n).topologies) {
      auto fast = graph::betweenness(t);
      auto slow = oracle::brute_force_betweenness(t);
      for (int v = 0; v < n; ++v) CHECK(fast[static_cast<std::size_t>(v)] == doctest::Approx(slow[static_cast<std::size_t>(v)]).epsilon(1e-12));
    }
  auto five = graph::sample_topologies(5, 200, 3);
  for (const auto& t : five.topologies) {
    auto fast = graph::betweenness(t);
    auto slow = oracle::brute_force_betweenness(t);
    for (int v = 0; v < 5; ++v) CHECK(std::abs(fast[static_cast<std::size_t>(v)] - slow[static_cast<std::size_t>(v)]) < 1e-12);
  }
}

TEST_CASE("density categories for n=10") {
  CHECK(graph::density_category(10, 8) == DensityCategory::sparse);
  CHECK(graph::density_category(10, 9) == DensityCategory::sparse);
  CHECK(graph::density_category(10, 10) == DensityCategory::mid_dense);
  CHECK(graph::density_category(10, 17) == DensityCategory::mid_dense);
  CHECK(graph::density_category(10, 18) == DensityCategory::dense);
  CHECK(graph::density_category(10, 20) == DensityCategory::dense);
  CHECK(graph::density_category(10, 26) == DensityCategory::dense);
  CHECK(graph::density_category(10, 27) == DensityCategory::very_dense);
  CHECK(graph::density_category(10, 45) == DensityCategory::very_dense);
}

TEST_CASE("density categories are monotone in link count") {
  for (int n : {3, 4, 5, 10}) {
    int prev = 0;
    for (int links = 0; links <= graph::link_slots(n); ++links) {
      const int c = static_cast<int>(graph::density_category(n, links));
      CHECK(c >= prev);
      prev = c;
    }
  }
  const auto b4 = graph::density_bounds(4);
  CHECK(b4.sparse_max == 1);
  CHECK(b4.mid_dense_max == 2);
  CHECK(b4.dense_max == 3);
}
