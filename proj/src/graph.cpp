#include "vaerl/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <queue>
#include <sstream>

#include "vaerl/errors.hpp"

namespace vaerl::graph {

namespace {

void check_n(int n) {
  if (n < 1) throw InvalidArgument("topology needs at least one node, got n=" + std::to_string(n));
}

}  // namespace

int slot_index(int n, int i, int j) {
  if (i == j || i < 0 || j < 0 || i >= n || j >= n)
    throw InvalidArgument("invalid node pair (" + std::to_string(i) + "," + std::to_string(j) + ") for n=" +
                          std::to_string(n));
  if (i > j) std::swap(i, j);
  // rows 0..i-1 contribute (n-1) + (n-2) + ... + (n-i) slots
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

Topology::Topology(int n) : n_(n) {
  check_n(n);
  bits_.assign(static_cast<std::size_t>(link_slots(n)), 0);
}

Topology::Topology(int n, std::vector<std::uint8_t> bits) : n_(n), bits_(std::move(bits)) {
  check_n(n);
  if (static_cast<int>(bits_.size()) != link_slots(n))
    throw InvalidArgument("topology on " + std::to_string(n) + " nodes needs " + std::to_string(link_slots(n)) +
                          " bits, got " + std::to_string(bits_.size()));
  for (auto b : bits_)
    if (b > 1) throw InvalidArgument("topology bits must be 0 or 1");
}

Topology Topology::complete(int n) {
  Topology t(n);
  std::fill(t.bits_.begin(), t.bits_.end(), 1);
  return t;
}

Topology Topology::from_string(int n, std::string_view s) {
  std::vector<std::uint8_t> bits;
  bits.reserve(s.size());
  for (char c : s) {
    if (c != '0' && c != '1') throw InvalidArgument("topology string may contain only '0' and '1'");
    bits.push_back(static_cast<std::uint8_t>(c - '0'));
  }
  return Topology(n, std::move(bits));
}

Topology Topology::from_index(int n, std::uint64_t index) {
  Topology t(n);
  if (t.slots() > 63) throw InvalidArgument("index encoding supports at most 63 link slots");
  if (t.slots() < 64 && (index >> t.slots()) != 0)
    throw InvalidArgument("topology index " + std::to_string(index) + " out of range for n=" + std::to_string(n));
  for (int k = 0; k < t.slots(); ++k) t.bits_[static_cast<std::size_t>(k)] = (index >> k) & 1U;
  return t;
}

bool Topology::linked(int i, int j) const {
  if (i == j) return false;
  return bits_[static_cast<std::size_t>(slot_index(n_, i, j))] != 0;
}

void Topology::set_link(int i, int j, bool on) {
  bits_[static_cast<std::size_t>(slot_index(n_, i, j))] = on ? 1 : 0;
}

int Topology::link_count() const { return static_cast<int>(std::count(bits_.begin(), bits_.end(), 1)); }

std::uint64_t Topology::index() const {
  if (slots() > 63) throw InvalidArgument("index encoding supports at most 63 link slots");
  std::uint64_t idx = 0;
  for (int k = 0; k < slots(); ++k)
    if (bits_[static_cast<std::size_t>(k)]) idx |= (std::uint64_t{1} << k);
  return idx;
}

std::string Topology::to_string() const {
  std::string s;
  s.reserve(bits_.size());
  for (auto b : bits_) s.push_back(b ? '1' : '0');
  return s;
}

Topology flatten(const Adjacency& m) {
  check_n(m.n);
  if (m.cells.size() != static_cast<std::size_t>(m.n * m.n)) throw InvalidArgument("adjacency matrix is not n x n");
  Topology t(m.n);
  for (int i = 0; i < m.n; ++i) {
    if (m(i, i) != 0) throw InvalidArgument("adjacency diagonal must be zero (node " + std::to_string(i) + ")");
    for (int j = i + 1; j < m.n; ++j) {
      if (m(i, j) > 1 || m(j, i) > 1) throw InvalidArgument("adjacency entries must be 0 or 1");
      if (m(i, j) != m(j, i))
        throw InvalidArgument("adjacency not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      t.set_link(i, j, m(i, j) != 0);
    }
  }
  return t;
}

Adjacency unflatten(const Topology& t) {
  Adjacency m{t.n(), std::vector<std::uint8_t>(static_cast<std::size_t>(t.n() * t.n()), 0)};
  for (int i = 0; i < t.n(); ++i)
    for (int j = i + 1; j < t.n(); ++j) m(i, j) = m(j, i) = t.linked(i, j) ? 1 : 0;
  return m;
}

TopologyDataset enumerate_all(int n) {
  check_n(n);
  const int slots = link_slots(n);
  if (slots > kMaxEnumerableSlots)
    throw InvalidArgument("enumerating all topologies for n=" + std::to_string(n) + " needs 2^" +
                          std::to_string(slots) + " entries; use sample_topologies instead");
  TopologyDataset ds;
  ds.n = n;
  ds.scheme = "enumerate";
  const std::uint64_t total = std::uint64_t{1} << slots;
  ds.topologies.reserve(total);
  for (std::uint64_t idx = 0; idx < total; ++idx) ds.topologies.push_back(Topology::from_index(n, idx));
  return ds;
}

TopologyDataset sample_topologies(int n, std::size_t count, std::uint64_t seed) {
  check_n(n);
  if (count == 0) throw InvalidArgument("sample count must be at least 1");
  TopologyDataset ds;
  ds.n = n;
  ds.seed = seed;
  ds.scheme = "sample";
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ds.topologies.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    const double p = unit(rng);
    Topology t(n);
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(t.slots()));
    for (auto& b : bits) b = unit(rng) < p ? 1 : 0;
    ds.topologies.emplace_back(n, std::move(bits));
  }
  return ds;
}

void split_dataset(TopologyDataset& ds, double train_fraction, std::uint64_t seed) {
  if (ds.topologies.empty()) throw InvalidArgument("cannot split an empty dataset");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw InvalidArgument("train fraction must be in (0, 1]");
  std::vector<std::size_t> order(ds.topologies.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  ds.train_indices.clear();
  ds.validation_indices.clear();
  if (order.size() == 1) {
    ds.train_indices = order;
    ds.validation_indices = order;
    return;
  }
  auto n_train = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(order.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, order.size() - 1);
  ds.train_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  ds.validation_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
}

std::string format_dataset(const TopologyDataset& ds) {
  std::string out = "n=" + std::to_string(ds.n) + "\nseed=" + std::to_string(ds.seed) + "\n";
  for (const auto& t : ds.topologies) {
    out += t.to_string();
    out += '\n';
  }
  return out;
}

namespace {

template <typename Int>
Int parse_field(std::string_view line, std::string_view key) {
  if (line.substr(0, key.size()) != key || line.size() <= key.size() || line[key.size()] != '=')
    throw InvalidArgument("dataset header: expected '" + std::string(key) + "=<int>', got '" + std::string(line) + "'");
  auto value = line.substr(key.size() + 1);
  Int v{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw InvalidArgument("dataset header: bad integer in '" + std::string(line) + "'");
  return v;
}

}  // namespace

TopologyDataset parse_dataset(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() < 2) throw InvalidArgument("dataset file needs 'n=' and 'seed=' header lines");
  TopologyDataset ds;
  ds.n = parse_field<int>(lines[0], "n");
  ds.seed = parse_field<std::uint64_t>(lines[1], "seed");
  ds.scheme = "file";
  for (std::size_t i = 2; i < lines.size(); ++i) ds.topologies.push_back(Topology::from_string(ds.n, lines[i]));
  return ds;
}

std::vector<int> degrees(const Topology& t) {
  std::vector<int> d(static_cast<std::size_t>(t.n()), 0);
  for (int i = 0; i < t.n(); ++i)
    for (int j = i + 1; j < t.n(); ++j)
      if (t.linked(i, j)) {
        ++d[static_cast<std::size_t>(i)];
        ++d[static_cast<std::size_t>(j)];
      }
  return d;
}

std::vector<double> betweenness(const Topology& t) {
  const int n = t.n();
  const auto N = static_cast<std::size_t>(n);
  std::vector<double> bc(N, 0.0);
  if (n < 2) return bc;

  std::vector<std::vector<int>> adj(N);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (t.linked(i, j)) adj[static_cast<std::size_t>(i)].push_back(j);

  // dist[s][v] (-1 = unreachable) and sigma[s][v] = number of shortest s-v paths
  std::vector<std::vector<int>> dist(N, std::vector<int>(N, -1));
  std::vector<std::vector<double>> sigma(N, std::vector<double>(N, 0.0));
  for (int s = 0; s < n; ++s) {
    auto& d = dist[static_cast<std::size_t>(s)];
    auto& sg = sigma[static_cast<std::size_t>(s)];
    std::queue<int> q;
    d[static_cast<std::size_t>(s)] = 0;
    sg[static_cast<std::size_t>(s)] = 1.0;
    q.push(s);
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int w : adj[static_cast<std::size_t>(u)]) {
        auto& dw = d[static_cast<std::size_t>(w)];
        if (dw < 0) {
          dw = d[static_cast<std::size_t>(u)] + 1;
          q.push(w);
        }
        if (dw == d[static_cast<std::size_t>(u)] + 1) sg[static_cast<std::size_t>(w)] += sg[static_cast<std::size_t>(u)];
      }
    }
  }

  for (int s = 0; s < n; ++s)
    for (int e = s + 1; e < n; ++e) {
      const int dse = dist[static_cast<std::size_t>(s)][static_cast<std::size_t>(e)];
      if (dse < 0) continue;
      const double total = sigma[static_cast<std::size_t>(s)][static_cast<std::size_t>(e)];
      for (int v = 0; v < n; ++v) {
        if (v == s || v == e) {
          bc[static_cast<std::size_t>(v)] += 1.0;
          continue;
        }
        const int dsv = dist[static_cast<std::size_t>(s)][static_cast<std::size_t>(v)];
        const int dve = dist[static_cast<std::size_t>(v)][static_cast<std::size_t>(e)];
        if (dsv < 0 || dve < 0 || dsv + dve != dse) continue;
        bc[static_cast<std::size_t>(v)] += sigma[static_cast<std::size_t>(s)][static_cast<std::size_t>(v)] *
                                           sigma[static_cast<std::size_t>(v)][static_cast<std::size_t>(e)] / total;
      }
    }
  const double pairs = static_cast<double>(link_slots(n));
  for (auto& b : bc) b /= pairs;
  return bc;
}

std::string_view to_string(DensityCategory c) {
  switch (c) {
    case DensityCategory::sparse:
      return "sparse";
    case DensityCategory::mid_dense:
      return "mid_dense";
    case DensityCategory::dense:
      return "dense";
    case DensityCategory::very_dense:
      return "very_dense";
  }
  return "sparse";
}

DensityBounds density_bounds(int n) {
  check_n(n);
  const int slots = link_slots(n);
  auto scale = [slots](int bound) { return static_cast<int>((static_cast<long>(bound) * slots) / 45); };
  return DensityBounds{scale(9), scale(17), scale(26)};
}

DensityCategory density_category(int n, int link_count) {
  const auto b = density_bounds(n);
  if (link_count <= b.sparse_max) return DensityCategory::sparse;
  if (link_count <= b.mid_dense_max) return DensityCategory::mid_dense;
  if (link_count <= b.dense_max) return DensityCategory::dense;
  return DensityCategory::very_dense;
}

DensityCategory density_category(const Topology& t) { return density_category(t.n(), t.link_count()); }

}  // namespace vaerl::graph
