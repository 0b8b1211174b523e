#include "vaerl/toy.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vaerl/errors.hpp"

namespace vaerl::toy {

namespace {

constexpr double kTieTolerance = 1e-9;

std::vector<double> helper_abilities(const ToyConfig& cfg, const graph::Topology& t) {
  std::vector<double> h;
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      if (t.linked(i, j)) h.push_back(std::max(cfg.abilities[static_cast<std::size_t>(i)], cfg.abilities[static_cast<std::size_t>(j)]));
  std::sort(h.rbegin(), h.rend());
  return h;
}

std::array<int, 3> rank_of(const Triple& v) {
  std::array<int, 3> idx{0, 1, 2};
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v[static_cast<std::size_t>(a)] > v[static_cast<std::size_t>(b)]; });
  return idx;
}

std::string fmt(double v, const char* spec = "%.4g") {
  char buf[32];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

void ToyConfig::validate() const {
  if (!(abilities[0] > abilities[1] && abilities[1] > abilities[2]))
    throw InvalidArgument("toy abilities must be strictly decreasing");
  if (!(link_cost < task_reward)) throw InvalidArgument("toy link cost must be below the task reward");
  if (!(boost >= 0) || !(link_cost >= 0)) throw InvalidArgument("toy boost and link cost must be non-negative");
  if (requirements.empty()) throw InvalidArgument("toy model needs at least one requirement");
}

Triple boosted_abilities(const ToyConfig& cfg, const graph::Topology& t) {
  if (t.n() != 3) throw InvalidArgument("toy model topologies have 3 nodes");
  Triple total = cfg.abilities;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j && t.linked(i, j)) total[static_cast<std::size_t>(i)] += cfg.boost * cfg.abilities[static_cast<std::size_t>(j)];
  return total;
}

double system_value(const ToyConfig& cfg, const graph::Topology& t, double requirement) {
  const auto total = boosted_abilities(cfg, t);
  const auto ok = std::count_if(total.begin(), total.end(), [&](double a) { return a >= requirement; });
  return cfg.task_reward * static_cast<double>(ok) - cfg.link_cost * t.link_count();
}

graph::Topology optimal_network(const ToyConfig& cfg, double requirement) {
  cfg.validate();
  graph::Topology best(3);
  double best_value = system_value(cfg, best, requirement);
  for (std::uint64_t k = 1; k < 8; ++k) {
    const auto t = graph::Topology::from_index(3, k);
    const double v = system_value(cfg, t, requirement);
    const bool better = v > best_value + kTieTolerance;
    const bool tie = std::abs(v - best_value) <= kTieTolerance;
    if (better || (tie && helper_abilities(cfg, t) > helper_abilities(cfg, best))) {
      best = t;
      best_value = v;
    }
  }
  return best;
}

std::string agent_label(const ToyConfig& cfg, int i) {
  return "agent" + fmt(cfg.abilities.at(static_cast<std::size_t>(i)), "%g");
}

FlippingRankReport flipping_rank_report(const ToyConfig& cfg) {
  cfg.validate();
  FlippingRankReport r;
  for (int i = 0; i < 3; ++i) r.labels[static_cast<std::size_t>(i)] = agent_label(cfg, i);
  for (double req : cfg.requirements) {
    Scenario s;
    s.requirement = req;
    s.network = optimal_network(cfg, req);
    s.boosted = boosted_abilities(cfg, s.network);
    s.value = system_value(cfg, s.network, req);
    const auto deg = graph::degrees(s.network);
    const auto btw = graph::betweenness(s.network);
    for (std::size_t i = 0; i < 3; ++i) {
      s.degree[i] = deg[i];
      s.betweenness[i] = btw[i];
      r.average_degree[i] += deg[i];
      r.average_betweenness[i] += btw[i];
    }
    r.scenarios.push_back(s);
  }
  const double k = static_cast<double>(cfg.requirements.size());
  for (std::size_t i = 0; i < 3; ++i) {
    r.average_degree[i] /= k;
    r.average_betweenness[i] /= k;
  }
  r.degree_rank = rank_of(r.average_degree);
  r.betweenness_rank = rank_of(r.average_betweenness);
  return r;
}

std::string FlippingRankReport::to_json() const {
  nlohmann::ordered_json j;
  j["agents"] = labels;
  j["scenarios"] = nlohmann::ordered_json::array();
  for (const auto& s : scenarios) {
    nlohmann::ordered_json e;
    e["requirement"] = s.requirement;
    e["topology_bits"] = s.network.to_string();
    e["links"] = s.network.link_count();
    e["boosted_abilities"] = s.boosted;
    e["value"] = s.value;
    e["degree"] = s.degree;
    e["betweenness"] = s.betweenness;
    j["scenarios"].push_back(e);
  }
  j["average_degree"] = average_degree;
  j["average_betweenness"] = average_betweenness;
  j["degree_rank"] = degree_rank;
  j["betweenness_rank"] = betweenness_rank;
  return j.dump(2) + "\n";
}

std::string FlippingRankReport::to_text() const {
  std::ostringstream o;
  auto edges = [](const graph::Topology& t) {
    std::string s;
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j)
        if (t.linked(i, j)) s += (s.empty() ? "" : " ") + std::to_string(i) + "-" + std::to_string(j);
    return s.empty() ? std::string("(none)") : s;
  };
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %-14s %-22s %s\n", "requirement", "links", "boosted abilities", "value");
  o << line;
  for (const auto& s : scenarios) {
    const std::string boosted = fmt(s.boosted[0]) + ", " + fmt(s.boosted[1]) + ", " + fmt(s.boosted[2]);
    std::snprintf(line, sizeof line, "%-12s %-14s %-22s %s\n", fmt(s.requirement).c_str(), edges(s.network).c_str(),
                  boosted.c_str(), fmt(s.value).c_str());
    o << line;
  }
  o << "\n";
  std::snprintf(line, sizeof line, "%-16s %10s %10s %10s\n", "average", labels[0].c_str(),
                labels[1].c_str(), labels[2].c_str());
  o << line;
  std::snprintf(line, sizeof line, "%-16s %10.4g %10.4g %10.4g\n", "degree", average_degree[0], average_degree[1],
                average_degree[2]);
  o << line;
  std::snprintf(line, sizeof line, "%-16s %10.4f %10.4f %10.4f\n", "betweenness", average_betweenness[0],
                average_betweenness[1], average_betweenness[2]);
  o << line;
  auto rank = [&](const std::array<int, 3>& r) {
    return labels[static_cast<std::size_t>(r[0])] + " > " + labels[static_cast<std::size_t>(r[1])] + " > " + labels[static_cast<std::size_t>(r[2])];
  };
  o << "degree rank:      " << rank(degree_rank) << "\n";
  o << "betweenness rank: " << rank(betweenness_rank) << "\n";
  return o.str();
}

}  // namespace vaerl::toy
