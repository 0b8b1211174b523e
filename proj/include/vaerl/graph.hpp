#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace vaerl::graph {

// Symmetric 0/1 adjacency matrix, row-major n x n.
struct Adjacency {
  int n = 0;
  std::vector<std::uint8_t> cells;

  std::uint8_t operator()(int i, int j) const { return cells[static_cast<std::size_t>(i * n + j)]; }
  std::uint8_t& operator()(int i, int j) { return cells[static_cast<std::size_t>(i * n + j)]; }
  friend bool operator==(const Adjacency&, const Adjacency&) = default;
};

inline constexpr int link_slots(int n) { return n * (n - 1) / 2; }

// Undirected simple graph stored as the strict upper triangle of its
// adjacency matrix in row-major order: (0,1), (0,2), ..., (n-2,n-1).
class Topology {
 public:
  Topology() = default;
  explicit Topology(int n);                                 // empty graph
  Topology(int n, std::vector<std::uint8_t> bits);          // validates length and values
  static Topology complete(int n);
  static Topology from_string(int n, std::string_view bits);  // "0101..."
  // Bit k of `index` is link slot k. Requires link_slots(n) <= 63.
  static Topology from_index(int n, std::uint64_t index);

  int n() const { return n_; }
  int slots() const { return static_cast<int>(bits_.size()); }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  bool linked(int i, int j) const;
  void set_link(int i, int j, bool on);
  int link_count() const;
  std::uint64_t index() const;
  std::string to_string() const;

  friend bool operator==(const Topology&, const Topology&) = default;
  friend auto operator<=>(const Topology&, const Topology&) = default;

 private:
  int n_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Position of the pair (i, j), i != j, in the upper-triangle ordering.
int slot_index(int n, int i, int j);

Topology flatten(const Adjacency& m);
Adjacency unflatten(const Topology& t);

struct TopologyDataset {
  int n = 0;
  std::uint64_t seed = 0;
  std::string scheme;  // "enumerate" or "sample"
  std::vector<Topology> topologies;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> validation_indices;
};

inline constexpr int kMaxEnumerableSlots = 20;

// Every topology on n nodes, ordered by index(). Refuses n with more than 20 link slots.
TopologyDataset enumerate_all(int n);

// Density-stratified sampling: per sample draw p ~ U[0,1], then each link ~ Bernoulli(p).
TopologyDataset sample_topologies(int n, std::size_t count, std::uint64_t seed);

// Seeded shuffle, first ceil(train_fraction * size) go to training. A dataset
// with a single topology uses it for both sides.
void split_dataset(TopologyDataset& ds, double train_fraction, std::uint64_t seed);

// Text format: "n=<int>", "seed=<int>", then one topology per line as a 0/1 string.
std::string format_dataset(const TopologyDataset& ds);
TopologyDataset parse_dataset(std::string_view text);

std::vector<int> degrees(const Topology& t);

// Endpoint-inclusive betweenness: for every connected unordered pair {s, t}
// a node v scores sigma_st(v) / sigma_st, with endpoints scoring 1. The sum is
// divided by n(n-1)/2.
std::vector<double> betweenness(const Topology& t);

enum class DensityCategory { sparse = 0, mid_dense = 1, dense = 2, very_dense = 3 };

std::string_view to_string(DensityCategory c);

struct DensityBounds {
  int sparse_max;     // links <= sparse_max -> sparse
  int mid_dense_max;  // <= mid_dense_max -> mid_dense
  int dense_max;      // <= dense_max -> dense, otherwise very_dense
};

// n = 10: 9 / 17 / 26. Other n scale the bounds by L/45, rounded down.
DensityBounds density_bounds(int n);
DensityCategory density_category(int n, int link_count);
DensityCategory density_category(const Topology& t);

}  // namespace vaerl::graph
