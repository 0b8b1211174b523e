#include "vaerl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "vaerl/errors.hpp"
#include "vaerl/graph.hpp"

namespace vaerl::analysis {

namespace {

std::ostringstream csv_stream() {
  std::ostringstream s;
  s.precision(17);
  return s;
}

void check_uniform(const std::vector<Episode>& episodes) {
  if (episodes.empty()) throw InvalidArgument("no episodes to analyze");
  const auto& first = episodes.front();
  if (first.empty()) throw InvalidArgument("episode without steps");
  for (const auto& ep : episodes) {
    if (ep.size() != first.size())
      throw InvalidArgument("episodes have different lengths (" + std::to_string(ep.size()) + " vs " +
                            std::to_string(first.size()) + ")");
    for (const auto& r : ep)
      if (r.topology.n() != first.front().topology.n())
        throw InvalidArgument("episodes mix n=" + std::to_string(r.topology.n()) + " and n=" +
                              std::to_string(first.front().topology.n()));
  }
}

double mean_of(const std::vector<double>& xs) {
  double s = 0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double variance_of(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

}  // namespace

std::vector<Episode> group_episodes(const std::vector<env::TraceRecord>& records) {
  std::vector<Episode> out;
  std::map<int, std::size_t> slot;
  for (const auto& r : records) {
    auto [it, fresh] = slot.emplace(r.episode, out.size());
    if (fresh) out.emplace_back();
    out[it->second].push_back(r);
  }
  for (auto& ep : out)
    std::stable_sort(ep.begin(), ep.end(), [](const env::TraceRecord& a, const env::TraceRecord& b) { return a.t < b.t; });
  return out;
}

std::vector<Episode> group_episodes(const std::vector<env::EpisodeTrace>& traces) {
  std::vector<Episode> out;
  for (const auto& tr : traces) {
    Episode ep;
    for (const auto& s : tr.steps) ep.push_back(s.record);
    out.push_back(std::move(ep));
  }
  return out;
}

std::string DensitySeries::to_csv() const {
  auto s = csv_stream();
  s << "t,frac_sparse,frac_mid,frac_dense,frac_very\n";
  for (std::size_t t = 0; t < fractions.size(); ++t)
    s << t << ',' << fractions[t][0] << ',' << fractions[t][1] << ',' << fractions[t][2] << ',' << fractions[t][3]
      << '\n';
  return s.str();
}

DensitySeries density_distribution(const std::vector<Episode>& episodes) {
  check_uniform(episodes);
  DensitySeries d;
  d.n = episodes.front().front().topology.n();
  const std::size_t steps = episodes.front().size();
  d.fractions.assign(steps, {0, 0, 0, 0});
  for (const auto& ep : episodes)
    for (std::size_t t = 0; t < steps; ++t)
      d.fractions[t][static_cast<std::size_t>(graph::density_category(ep[t].topology))] += 1;
  const double count = static_cast<double>(episodes.size());
  for (auto& f : d.fractions)
    for (auto& v : f) v /= count;
  return d;
}

std::string GroupedCentralitySeries::to_csv() const {
  auto s = csv_stream();
  s << "t,group_vision,mean_degree,mean_betweenness\n";
  for (std::size_t t = 0; t < points.size(); ++t)
    for (std::size_t g = 0; g < group_visions.size(); ++g)
      s << t << ',' << group_visions[g] << ',' << points[t][g].mean_degree << ',' << points[t][g].mean_betweenness
        << '\n';
  return s.str();
}

GroupedCentralitySeries grouped_series(const std::vector<Episode>& episodes, const std::vector<double>& vision_ranges) {
  check_uniform(episodes);
  const int n = episodes.front().front().topology.n();
  if (static_cast<int>(vision_ranges.size()) != n)
    throw InvalidArgument("vision grouping covers " + std::to_string(vision_ranges.size()) + " agents, traces have " +
                          std::to_string(n));
  GroupedCentralitySeries g;
  g.group_visions = vision_ranges;
  std::sort(g.group_visions.rbegin(), g.group_visions.rend());
  g.group_visions.erase(std::unique(g.group_visions.begin(), g.group_visions.end()), g.group_visions.end());
  std::vector<std::size_t> group_of(static_cast<std::size_t>(n));
  g.group_sizes.assign(g.group_visions.size(), 0);
  for (int i = 0; i < n; ++i) {
    const auto it = std::find(g.group_visions.begin(), g.group_visions.end(), vision_ranges[static_cast<std::size_t>(i)]);
    group_of[static_cast<std::size_t>(i)] = static_cast<std::size_t>(it - g.group_visions.begin());
    ++g.group_sizes[group_of[static_cast<std::size_t>(i)]];
  }
  const std::size_t steps = episodes.front().size();
  g.points.assign(steps, std::vector<GroupPoint>(g.group_visions.size()));
  for (const auto& ep : episodes)
    for (std::size_t t = 0; t < steps; ++t) {
      const auto deg = graph::degrees(ep[t].topology);
      const auto btw = graph::betweenness(ep[t].topology);
      for (int i = 0; i < n; ++i) {
        auto& p = g.points[t][group_of[static_cast<std::size_t>(i)]];
        p.mean_degree += deg[static_cast<std::size_t>(i)];
        p.mean_betweenness += btw[static_cast<std::size_t>(i)];
      }
    }
  for (auto& row : g.points)
    for (std::size_t k = 0; k < row.size(); ++k) {
      const double denom = static_cast<double>(episodes.size()) * g.group_sizes[k];
      row[k].mean_degree /= denom;
      row[k].mean_betweenness /= denom;
    }
  return g;
}

WelchResult welch_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw InvalidArgument("Welch test needs at least two samples per group");
  WelchResult r;
  r.mean_a = mean_of(a);
  r.mean_b = mean_of(b);
  const double va = variance_of(a, r.mean_a) / static_cast<double>(a.size());
  const double vb = variance_of(b, r.mean_b) / static_cast<double>(b.size());
  const double se2 = va + vb;
  const double diff = r.mean_a - r.mean_b;
  if (se2 == 0) {
    r.t_statistic = diff == 0 ? 0.0 : std::copysign(INFINITY, diff);
    r.dof = static_cast<double>(a.size() + b.size() - 2);
    r.p_value = diff == 0 ? 1.0 : 0.0;
    return r;
  }
  r.t_statistic = diff / std::sqrt(se2);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  r.dof = se2 * se2 / (va * va / (na - 1) + vb * vb / (nb - 1));
  const boost::math::students_t dist(r.dof);
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t_statistic)));
  return r;
}

PhaseContrast phase_contrast(const std::vector<Episode>& episodes, double alpha) {
  check_uniform(episodes);
  const int h = static_cast<int>(episodes.front().size());
  if (h >= 50) return phase_contrast(episodes, 0, 10, 40, 50, alpha);
  const int w = std::max(1, h / 5);
  return phase_contrast(episodes, 0, w, h - w, h, alpha);
}

PhaseContrast phase_contrast(const std::vector<Episode>& episodes, int early_begin, int early_end, int late_begin,
                             int late_end, double alpha) {
  check_uniform(episodes);
  const int h = static_cast<int>(episodes.front().size());
  if (!(0 <= early_begin && early_begin < early_end && early_end <= h && 0 <= late_begin && late_begin < late_end &&
        late_end <= h))
    throw InvalidArgument("phase windows must lie inside [0, " + std::to_string(h) + ")");
  PhaseContrast c;
  c.early_begin = early_begin;
  c.early_end = early_end;
  c.late_begin = late_begin;
  c.late_end = late_end;
  auto window_means = [&](int b, int e) {
    std::vector<double> out;
    for (const auto& ep : episodes) {
      double s = 0;
      for (int t = b; t < e; ++t) s += ep[static_cast<std::size_t>(t)].topology.link_count();
      out.push_back(s / (e - b));
    }
    return out;
  };
  const auto early = window_means(early_begin, early_end);
  const auto late = window_means(late_begin, late_end);
  c.early_mean = mean_of(early);
  c.late_mean = mean_of(late);
  c.difference = c.early_mean - c.late_mean;
  if (episodes.size() >= 2) {
    c.test = welch_test(early, late);
    c.significant = c.test.p_value < alpha;
  }
  return c;
}

SummaryRow summarize(const std::string& method, const std::string& scenario, const std::vector<Episode>& episodes) {
  if (episodes.empty()) throw InvalidArgument("no episodes to summarize");
  std::vector<double> ret, perf, cost;
  for (const auto& ep : episodes) {
    double r = 0, p = 0, c = 0;
    for (const auto& s : ep) {
      r += s.reward;
      p += s.performance;
      c += s.cost;
    }
    ret.push_back(r);
    perf.push_back(p);
    cost.push_back(c);
  }
  SummaryRow row;
  row.method = method;
  row.scenario = scenario;
  row.mean_return = mean_of(ret);
  row.stderr_return = std::sqrt(variance_of(ret, row.mean_return) / static_cast<double>(ret.size()));
  row.mean_performance = mean_of(perf);
  row.mean_cost = mean_of(cost);
  return row;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  auto s = csv_stream();
  s << "method,scenario,mean_return,stderr,mean_perf,mean_cost\n";
  for (const auto& r : rows)
    s << r.method << ',' << r.scenario << ',' << r.mean_return << ',' << r.stderr_return << ',' << r.mean_performance
      << ',' << r.mean_cost << '\n';
  return s.str();
}

std::vector<env::TraceRecord> snapshots(const Episode& episode, const std::vector<int>& steps) {
  std::vector<env::TraceRecord> out;
  for (int t : steps)
    for (const auto& r : episode)
      if (r.t == t) {
        out.push_back(r);
        break;
      }
  return out;
}

}  // namespace vaerl::analysis
