#pragma once

// Statistics over evaluation traces: network density over time, degree and
// betweenness grouped by vision range, early/late link contrasts and
// per-method summaries. Every function is a pure function of its input.

#include <array>
#include <string>
#include <vector>

#include "vaerl/env.hpp"

namespace vaerl::analysis {

// Records of one episode, ordered by t.
using Episode = std::vector<env::TraceRecord>;

// Splits records into episodes by their episode field (first-appearance
// order) and sorts each by t.
std::vector<Episode> group_episodes(const std::vector<env::TraceRecord>& records);
std::vector<Episode> group_episodes(const std::vector<env::EpisodeTrace>& traces);

struct DensitySeries {
  int n = 0;
  // Per t: fraction of episodes whose topology is sparse, mid, dense, very dense.
  std::vector<std::array<double, 4>> fractions;
  // t,frac_sparse,frac_mid,frac_dense,frac_very
  std::string to_csv() const;
};

// Throws InvalidArgument on an empty input or mixed n / horizon.
DensitySeries density_distribution(const std::vector<Episode>& episodes);

struct GroupPoint {
  double mean_degree = 0;
  double mean_betweenness = 0;
};

struct GroupedCentralitySeries {
  std::vector<double> group_visions;  // descending
  std::vector<int> group_sizes;
  std::vector<std::vector<GroupPoint>> points;  // [t][group]
  // t,group_vision,mean_degree,mean_betweenness
  std::string to_csv() const;
};

// Agents are grouped by equal vision range. Throws InvalidArgument when
// `vision_ranges` does not cover every agent.
GroupedCentralitySeries grouped_series(const std::vector<Episode>& episodes, const std::vector<double>& vision_ranges);

struct WelchResult {
  double mean_a = 0, mean_b = 0;
  double t_statistic = 0;
  double dof = 0;
  double p_value = 1;  // two-sided
};

// Two-sample Welch t-test. Two zero-variance samples give p = 1 when the
// means agree and p = 0 otherwise.
WelchResult welch_test(const std::vector<double>& a, const std::vector<double>& b);

struct PhaseContrast {
  int early_begin = 0, early_end = 0, late_begin = 0, late_end = 0;
  double early_mean = 0;  // mean links per step in the early window
  double late_mean = 0;
  double difference = 0;  // early - late
  WelchResult test;
  bool significant = false;  // p < alpha
};

// Windows default to [0, 10) and [40, 50); shorter horizons scale them to
// the first and last fifth.
PhaseContrast phase_contrast(const std::vector<Episode>& episodes, double alpha = 0.05);
PhaseContrast phase_contrast(const std::vector<Episode>& episodes, int early_begin, int early_end, int late_begin,
                             int late_end, double alpha = 0.05);

struct SummaryRow {
  std::string method;
  std::string scenario;
  double mean_return = 0;
  double stderr_return = 0;
  double mean_performance = 0;
  double mean_cost = 0;
};

SummaryRow summarize(const std::string& method, const std::string& scenario, const std::vector<Episode>& episodes);
// method,scenario,mean_return,stderr,mean_perf,mean_cost
std::string summary_csv(const std::vector<SummaryRow>& rows);

// Records of one episode at the requested steps (missing steps are skipped).
std::vector<env::TraceRecord> snapshots(const Episode& episode, const std::vector<int>& steps);

}  // namespace vaerl::analysis
