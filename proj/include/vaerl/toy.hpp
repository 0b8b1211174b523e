#pragma once

// Three-agent "flipping rank" model: agents with abilities (2, 1, 0.5) gain
// half of each neighbour's ability; an agent succeeds when its boosted
// ability meets the task requirement. The optimal network for each requirement
// is found by exhaustive search over the 8 topologies.

#include <array>
#include <string>
#include <vector>

#include "vaerl/graph.hpp"

namespace vaerl::toy {

struct ToyConfig {
  std::array<double, 3> abilities{2.0, 1.0, 0.5};  // strictly decreasing
  double boost = 0.5;
  double task_reward = 1.0;
  double link_cost = 0.1;
  std::vector<double> requirements{0.5, 1.0, 1.5, 2.0};

  void validate() const;  // throws InvalidArgument
};

using Triple = std::array<double, 3>;

// total_i = ability_i + boost * sum of adjacent abilities
Triple boosted_abilities(const ToyConfig& cfg, const graph::Topology& t);

// task_reward * #{i : total_i >= requirement} - link_cost * links
double system_value(const ToyConfig& cfg, const graph::Topology& t, double requirement);

// Exhaustive argmax of system_value. Ties go to the topology whose helpers
// (the higher-ability endpoint of each link), sorted by ability in descending
// order, are lexicographically larger.
graph::Topology optimal_network(const ToyConfig& cfg, double requirement);

struct Scenario {
  double requirement = 0;
  graph::Topology network;
  Triple boosted{};
  double value = 0;
  Triple degree{};
  Triple betweenness{};
};

struct FlippingRankReport {
  std::array<std::string, 3> labels;
  std::vector<Scenario> scenarios;
  Triple average_degree{};
  Triple average_betweenness{};
  std::array<int, 3> degree_rank{};       // agent indices, highest first
  std::array<int, 3> betweenness_rank{};

  std::string to_json() const;
  std::string to_text() const;
};

// Scenarios weighted uniformly.
FlippingRankReport flipping_rank_report(const ToyConfig& cfg);

// Label used in reports: "agent2", "agent1", "agent0.5" for the default abilities.
std::string agent_label(const ToyConfig& cfg, int i);

}  // namespace vaerl::toy
