#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "vaerl/analysis.hpp"
#include "vaerl/errors.hpp"

using namespace vaerl;
using analysis::Episode;
using graph::Topology;

namespace {

// Synthetic episode: topology chosen per step, reward fixed.
Episode episode(int id, int n, int horizon, const std::function<Topology(int)>& topology, double reward = -1.0) {
  Episode ep;
  for (int t = 0; t < horizon; ++t) {
    env::TraceRecord r;
    r.episode = id;
    r.t = t;
    r.topology = topology(t);
    r.agent_pos.assign(static_cast<std::size_t>(n), env::Vec2::Zero());
    r.landmark_pos = r.agent_pos;
    r.cost = 0.1 * r.topology.link_count();
    r.reward = reward;
    r.performance = reward + r.cost;
    ep.push_back(r);
  }
  return ep;
}

std::vector<Episode> many(int count, int n, const std::function<Topology(int)>& topology) {
  std::vector<Episode> out;
  for (int e = 0; e < count; ++e) out.push_back(episode(e, n, 50, topology));
  return out;
}

Topology star(int n, int center) {
  Topology t(n);
  for (int v = 0; v < n; ++v)
    if (v != center) t.set_link(center, v, true);
  return t;
}

}  // namespace

TEST_CASE("group_episodes splits by episode and orders by t") {
  auto a = episode(3, 4, 5, [](int) { return Topology(4); });
  auto b = episode(1, 4, 5, [](int) { return Topology::complete(4); });
  std::vector<env::TraceRecord> mixed;
  for (int t = 4; t >= 0; --t) {
    mixed.push_back(a[static_cast<std::size_t>(t)]);
    mixed.push_back(b[static_cast<std::size_t>(t)]);
  }
  const auto eps = analysis::group_episodes(mixed);
  REQUIRE(eps.size() == 2u);
  CHECK(eps[0].front().episode == 3);
  for (const auto& ep : eps)
    for (std::size_t t = 0; t < ep.size(); ++t) CHECK(ep[t].t == static_cast<int>(t));
}

TEST_CASE("density distribution") {
  const auto empty = analysis::density_distribution(many(5, 10, [](int) { return Topology(10); }));
  REQUIRE(empty.fractions.size() == 50u);
  for (const auto& f : empty.fractions) CHECK(f == std::array<double, 4>{1, 0, 0, 0});

  const auto phased = analysis::density_distribution(
      many(7, 10, [](int t) { return t < 10 ? Topology::complete(10) : Topology(10); }));
  for (int t = 0; t < 50; ++t) {
    const auto& f = phased.fractions[static_cast<std::size_t>(t)];
    CHECK(f[0] + f[1] + f[2] + f[3] == doctest::Approx(1.0).epsilon(1e-9));
    if (t < 10) CHECK(f[3] == doctest::Approx(1.0));
    else CHECK(f[0] == doctest::Approx(1.0));
  }

  std::mt19937_64 rng(4);
  std::vector<Episode> random_eps;
  for (int e = 0; e < 30; ++e)
    random_eps.push_back(episode(e, 10, 50, [&](int) { return Topology::from_index(10, rng() & ((1ULL << 45) - 1)); }));
  for (const auto& f : analysis::density_distribution(random_eps).fractions)
    CHECK(std::abs(f[0] + f[1] + f[2] + f[3] - 1.0) <= 1e-9);

  const auto csv = phased.to_csv();
  CHECK(csv.rfind("t,frac_sparse,frac_mid,frac_dense,frac_very\n0,0,0,0,1\n", 0) == 0);

  auto mixed = many(2, 4, [](int) { return Topology(4); });
  mixed.push_back(episode(9, 5, 50, [](int) { return Topology(5); }));
  CHECK_THROWS_AS(analysis::density_distribution(mixed), InvalidArgument);
  CHECK_THROWS_AS(analysis::density_distribution({}), InvalidArgument);
}

TEST_CASE("grouped centrality series") {
  const std::vector<double> vision{2, 1, 1, 1, 0.5, 0.5, 0.5, 0, 0, 0};
  const auto empty = analysis::grouped_series(many(3, 10, [](int) { return Topology(10); }), vision);
  CHECK(empty.group_visions == std::vector<double>{2, 1, 0.5, 0});
  CHECK(empty.group_sizes == std::vector<int>{1, 3, 3, 3});
  for (const auto& row : empty.points)
    for (const auto& p : row) {
      CHECK(p.mean_degree == 0.0);
      CHECK(p.mean_betweenness == 0.0);
    }

  const auto full = analysis::grouped_series(many(3, 10, [](int) { return Topology::complete(10); }), vision);
  for (const auto& row : full.points)
    for (const auto& p : row) CHECK(p.mean_degree == doctest::Approx(9.0));

  const auto hub = analysis::grouped_series(many(3, 10, [](int) { return star(10, 0); }), vision);
  for (const auto& row : hub.points) {
    CHECK(row[0].mean_degree == doctest::Approx(9.0));
    for (std::size_t g = 1; g < row.size(); ++g) CHECK(row[g].mean_degree == doctest::Approx(1.0));
    for (const auto& p : row) CHECK(p.mean_betweenness <= 1.0);
  }

  const auto homogeneous = analysis::grouped_series(many(2, 4, [](int) { return star(4, 1); }), {1, 1, 1, 1});
  CHECK(homogeneous.group_visions.size() == 1u);
  CHECK(homogeneous.points[0][0].mean_degree == doctest::Approx(1.5));
  CHECK(homogeneous.to_csv().rfind("t,group_vision,mean_degree,mean_betweenness\n0,1,1.5,", 0) == 0);

  CHECK_THROWS_AS(analysis::grouped_series(many(1, 4, [](int) { return Topology(4); }), {1, 1, 1}), InvalidArgument);
}

TEST_CASE("welch test against a textbook computation") {
  const std::vector<double> a{27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1, 21.9, 22.6, 23.1, 19.6, 19.0, 21.7, 21.4};
  const std::vector<double> b{27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0, 24.8, 20.2, 21.9, 22.1, 22.9, 20.5, 24.4};
  // Direct formulas: t = (ma - mb) / sqrt(va/na + vb/nb), Welch-Satterthwaite dof.
  auto stats = [](const std::vector<double>& x) {
    double m = 0;
    for (double v : x) m += v;
    m /= x.size();
    double s = 0;
    for (double v : x) s += (v - m) * (v - m);
    return std::pair{m, s / (x.size() - 1)};
  };
  const auto [ma, va] = stats(a);
  const auto [mb, vb] = stats(b);
  const double se = std::sqrt(va / 15 + vb / 15);
  const double dof = std::pow(va / 15 + vb / 15, 2) / (std::pow(va / 15, 2) / 14 + std::pow(vb / 15, 2) / 14);
  const auto r = analysis::welch_test(a, b);
  CHECK(r.t_statistic == doctest::Approx((ma - mb) / se));
  CHECK(r.dof == doctest::Approx(dof));
  CHECK(r.t_statistic == doctest::Approx(-2.46).epsilon(0.01));
  CHECK(r.p_value == doctest::Approx(0.021).epsilon(0.05));
  CHECK(analysis::welch_test({1, 1, 1}, {1, 1}).p_value == 1.0);
  CHECK(analysis::welch_test({2, 2, 2}, {1, 1}).p_value == 0.0);
  CHECK_THROWS_AS(analysis::welch_test({1}, {1, 2}), InvalidArgument);
}

TEST_CASE("phase contrast") {
  const auto constant = analysis::phase_contrast(many(20, 4, [](int) { return star(4, 0); }));
  CHECK(constant.difference == 0.0);
  CHECK_FALSE(constant.significant);
  CHECK(constant.early_end == 10);
  CHECK(constant.late_begin == 40);

  std::mt19937_64 rng(2);
  std::vector<Episode> phased, reversed;
  for (int e = 0; e < 20; ++e) {
    phased.push_back(episode(e, 4, 50, [&](int t) {
      return t < 10 ? Topology::from_index(4, 48 + rng() % 16) : Topology::from_index(4, rng() % 4);
    }));
    reversed.push_back(episode(e, 4, 50, [&](int t) {
      return t >= 40 ? Topology::from_index(4, 48 + rng() % 16) : Topology::from_index(4, rng() % 4);
    }));
  }
  const auto p = analysis::phase_contrast(phased);
  CHECK(p.early_mean > p.late_mean);
  CHECK(p.significant);
  const auto r = analysis::phase_contrast(reversed);
  CHECK(r.early_mean < r.late_mean);
  CHECK(r.difference < 0);

  std::vector<Episode> short_eps;
  for (int e = 0; e < 3; ++e) short_eps.push_back(episode(e, 4, 20, [](int) { return Topology(4); }));
  const auto s = analysis::phase_contrast(short_eps);
  CHECK(s.early_end == 4);
  CHECK(s.late_begin == 16);
  CHECK_THROWS_AS(analysis::phase_contrast(short_eps, 0, 10, 15, 25), InvalidArgument);
}

TEST_CASE("summaries") {
  const auto row = analysis::summarize("random", "n4_v1", many(100, 4, [](int) { return Topology(4); }));
  CHECK(row.mean_return == doctest::Approx(-50.0));
  CHECK(row.stderr_return == 0.0);
  CHECK(row.mean_cost == 0.0);
  const auto csv = analysis::summary_csv({row});
  CHECK(csv.rfind("method,scenario,mean_return,stderr,mean_perf,mean_cost\nrandom,n4_v1,-50,0,-50,0\n", 0) == 0);

  // Standard error halves when the episode count quadruples.
  std::mt19937_64 rng(6);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto noisy = [&](int count) {
    std::vector<Episode> out;
    for (int e = 0; e < count; ++e) out.push_back(episode(e, 4, 50, [](int) { return Topology(4); }, noise(rng)));
    return out;
  };
  double ratio = 0;
  const int reps = 40;
  for (int k = 0; k < reps; ++k)
    ratio += analysis::summarize("m", "s", noisy(400)).stderr_return / analysis::summarize("m", "s", noisy(100)).stderr_return;
  CHECK(ratio / reps == doctest::Approx(0.5).epsilon(0.05));
  CHECK_THROWS_AS(analysis::summarize("m", "s", {}), InvalidArgument);
}

TEST_CASE("snapshots pick the requested steps") {
  const auto ep = episode(0, 4, 50, [](int t) { return Topology::from_index(4, static_cast<std::uint64_t>(t % 64)); });
  const auto snaps = analysis::snapshots(ep, {0, 5, 10, 15, 20, 99});
  REQUIRE(snaps.size() == 5u);
  CHECK(snaps[2].t == 10);
  CHECK(snaps[2].topology.index() == 10u);
}

TEST_CASE("analysis is a pure function of the records") {
  std::mt19937_64 rng(9);
  std::vector<Episode> eps;
  for (int e = 0; e < 10; ++e) eps.push_back(episode(e, 4, 50, [&](int) { return Topology::from_index(4, rng() % 64); }));
  CHECK(analysis::density_distribution(eps).to_csv() == analysis::density_distribution(eps).to_csv());
  CHECK(analysis::grouped_series(eps, {1, 1, 1, 1}).to_csv() == analysis::grouped_series(eps, {1, 1, 1, 1}).to_csv());
}
