#include "droplab/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "droplab/rng.hpp"

namespace droplab {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    case Split::kNone: break;
  }
  return "none";
}

std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  if (s == "none") return Split::kNone;
  return std::nullopt;
}

namespace {

std::uint64_t pair_key(std::int32_t u, std::int32_t v) {
  if (u > v) std::swap(u, v);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) |
         static_cast<std::uint32_t>(v);
}

// Builds the symmetric row arrays from canonical (u < v) pairs, plus one
// loop per node when requested.
Graph build(std::size_t n, std::vector<Edge> canon, bool loops) {
  struct Row {
    std::int32_t s, d;
    bool loop;
  };
  std::vector<Row> rows;
  rows.reserve(canon.size() * 2 + (loops ? n : 0));
  for (auto [u, v] : canon) {
    rows.push_back({u, v, false});
    rows.push_back({v, u, false});
  }
  if (loops)
    for (std::size_t i = 0; i < n; ++i)
      rows.push_back({static_cast<std::int32_t>(i), static_cast<std::int32_t>(i), true});
  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.s != b.s ? a.s < b.s : a.d < b.d; });

  Graph g;
  g.n = n;
  g.src.resize(rows.size());
  g.dst.resize(rows.size());
  g.self_loop.resize(rows.size());
  g.offsets.assign(n + 1, 0);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    g.src[j] = rows[j].s;
    g.dst[j] = rows[j].d;
    g.self_loop[j] = rows[j].loop ? 1 : 0;
    ++g.offsets[rows[j].s + 1];
  }
  for (std::size_t i = 0; i < n; ++i) g.offsets[i + 1] += g.offsets[i];

  // Rows are sorted by (src, dst) and pairs are unique, so the twin of
  // u->v is found by binary search in v's slice.
  g.twin.resize(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const auto v = g.dst[j];
    const auto first = g.dst.begin() + g.offsets[v];
    const auto last = g.dst.begin() + g.offsets[v + 1];
    const auto it = std::lower_bound(first, last, g.src[j]);
    g.twin[j] = static_cast<std::int32_t>(it - g.dst.begin());
  }
  return g;
}

std::vector<Edge> canonicalize(std::size_t n, std::span<const Edge> edges) {
  std::vector<Edge> canon;
  canon.reserve(edges.size());
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n)
      throw std::out_of_range("edge (" + std::to_string(u) + "," + std::to_string(v) +
                              ") out of range for n=" + std::to_string(n));
    if (u == v) throw std::invalid_argument("self-loop (" + std::to_string(u) + "," + std::to_string(v) + ")");
    canon.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(canon.begin(), canon.end());
  const auto dup = std::adjacent_find(canon.begin(), canon.end());
  if (dup != canon.end())
    throw std::invalid_argument("duplicate undirected edge (" + std::to_string(dup->first) + "," +
                                std::to_string(dup->second) + ")");
  return canon;
}

Graph with_node_data(Graph g, const Graph& from) {
  g.features = from.features;
  g.labels = from.labels;
  g.split = from.split;
  return g;
}

// Uniform sample of `count` pairs absent from `present`, distinct from each
// other. Dense requests enumerate the complement; sparse ones reject.
std::vector<Edge> sample_absent_pairs(std::size_t n, const std::unordered_set<std::uint64_t>& present,
                                      std::size_t count, Rng& rng) {
  const std::size_t total = n < 2 ? 0 : n * (n - 1) / 2;
  const std::size_t capacity = total - present.size();
  if (count > capacity)
    throw std::invalid_argument("requested " + std::to_string(count) + " new edges but only " +
                                std::to_string(capacity) + " absent pairs exist");
  std::vector<Edge> out;
  if (count == 0) return out;
  if (count * 4 > capacity) {
    std::vector<Edge> pool;
    pool.reserve(capacity);
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t v = u + 1; v < n; ++v) {
        const auto a = static_cast<std::int32_t>(u), b = static_cast<std::int32_t>(v);
        if (!present.count(pair_key(a, b))) pool.emplace_back(a, b);
      }
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + rng.below(pool.size() - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }
  std::unordered_set<std::uint64_t> taken;
  while (out.size() < count) {
    const auto u = static_cast<std::int32_t>(rng.below(n));
    const auto v = static_cast<std::int32_t>(rng.below(n));
    if (u == v) continue;
    const auto key = pair_key(u, v);
    if (present.count(key) || taken.count(key)) continue;
    taken.insert(key);
    out.emplace_back(std::min(u, v), std::max(u, v));
  }
  return out;
}

std::unordered_set<std::uint64_t> key_set(const std::vector<Edge>& edges) {
  std::unordered_set<std::uint64_t> s;
  s.reserve(edges.size() * 2);
  for (auto [u, v] : edges) s.insert(pair_key(u, v));
  return s;
}

void require_loop_free(const Graph& g, const char* op) {
  if (g.has_self_loops())
    throw std::invalid_argument(std::string(op) + ": expects a graph without self-loops");
}

}  // namespace

Graph Graph::from_edges(std::size_t n, std::span<const Edge> edges) {
  if (n > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max()))
    throw std::invalid_argument("node count too large");
  return build(n, canonicalize(n, edges), false);
}

std::size_t Graph::num_self_loops() const {
  return static_cast<std::size_t>(std::count(self_loop.begin(), self_loop.end(), 1));
}

std::size_t Graph::num_undirected() const { return (num_directed() - num_self_loops()) / 2; }

std::vector<Edge> Graph::undirected_edges() const {
  std::vector<Edge> out;
  out.reserve(num_undirected());
  for (std::size_t j = 0; j < src.size(); ++j)
    if (src[j] < dst[j]) out.emplace_back(src[j], dst[j]);
  return out;
}

bool Graph::has_edge(std::int32_t u, std::int32_t v) const {
  const auto first = dst.begin() + offsets[u];
  const auto last = dst.begin() + offsets[u + 1];
  return std::binary_search(first, last, v);
}

std::size_t Graph::num_classes() const {
  int mx = -1;
  for (int l : labels) mx = std::max(mx, l);
  return static_cast<std::size_t>(mx + 1);
}

std::vector<std::uint8_t> Graph::split_mask(Split s) const {
  std::vector<std::uint8_t> m(n, 0);
  for (std::size_t i = 0; i < split.size(); ++i) m[i] = split[i] == s ? 1 : 0;
  return m;
}

void Graph::validate() const {
  auto fail = [](const std::string& msg) { throw std::logic_error("invalid graph: " + msg); };
  const std::size_t k = src.size();
  if (dst.size() != k || twin.size() != k || self_loop.size() != k) fail("row array lengths differ");
  if (offsets.size() != n + 1 || offsets.front() != 0 || static_cast<std::size_t>(offsets.back()) != k)
    fail("bad offsets");
  for (std::size_t i = 0; i < n; ++i)
    if (offsets[i] > offsets[i + 1]) fail("offsets not monotone");
  for (std::size_t j = 0; j < k; ++j) {
    if (src[j] < 0 || dst[j] < 0 || static_cast<std::size_t>(src[j]) >= n ||
        static_cast<std::size_t>(dst[j]) >= n)
      fail("endpoint out of range at row " + std::to_string(j));
    if (j < static_cast<std::size_t>(offsets[src[j]]) || j >= static_cast<std::size_t>(offsets[src[j] + 1]))
      fail("row outside its CSR slice");
    const auto t = static_cast<std::size_t>(twin[j]);
    if (t >= k || src[t] != dst[j] || dst[t] != src[j] || static_cast<std::size_t>(twin[t]) != j)
      fail("twin is not an involution at row " + std::to_string(j));
    if ((src[j] == dst[j]) != (self_loop[j] != 0)) fail("self-loop flag mismatch");
    if (j > 0 && src[j] == src[j - 1] && dst[j] <= dst[j - 1]) fail("duplicate or unsorted row");
  }
  if (features && features->rows != n) fail("feature row count != n");
  if (!labels.empty() && labels.size() != n) fail("label count != n");
  if (!split.empty() && split.size() != n) fail("split count != n");
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] != Split::kNone && (labels.empty() || labels[i] < 0)) fail("split tag on unlabeled node");
}

std::vector<std::size_t> degrees(const Graph& g) {
  std::vector<std::size_t> d(g.n);
  for (std::size_t i = 0; i < g.n; ++i) d[i] = static_cast<std::size_t>(g.offsets[i + 1] - g.offsets[i]);
  return d;
}

Graph add_self_loops(const Graph& g) {
  require_loop_free(g, "add_self_loops");
  return with_node_data(build(g.n, g.undirected_edges(), true), g);
}

std::vector<double> sym_norm_coeffs(const Graph& g) {
  const auto deg = degrees(g);
  for (std::size_t i = 0; i < g.n; ++i)
    if (deg[i] == 0) throw std::invalid_argument("sym_norm_coeffs: node " + std::to_string(i) + " has degree 0");
  std::vector<double> c(g.num_directed());
  for (std::size_t j = 0; j < c.size(); ++j)
    c[j] = 1.0 / std::sqrt(static_cast<double>(deg[g.src[j]]) * static_cast<double>(deg[g.dst[j]]));
  return c;
}

Graph make_regular_graph(std::size_t n, std::size_t d, std::uint64_t seed) {
  if ((n * d) % 2 != 0) throw std::invalid_argument("make_regular_graph: n*d must be even");
  if (d >= n && !(n == 0 && d == 0)) throw std::invalid_argument("make_regular_graph: need d < n");
  constexpr int kRestarts = 1000;
  Rng rng(seed);
  std::vector<std::int32_t> stubs;
  for (int attempt = 0; attempt < kRestarts; ++attempt) {
    stubs.clear();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) stubs.push_back(static_cast<std::int32_t>(i));
    std::shuffle(stubs.begin(), stubs.end(), rng.engine());
    std::unordered_set<std::uint64_t> seen;
    std::vector<Edge> edges;
    bool ok = true;
    for (std::size_t i = 0; i + 1 < stubs.size(); i += 2) {
      const auto u = stubs[i], v = stubs[i + 1];
      if (u == v || !seen.insert(pair_key(u, v)).second) {
        ok = false;
        break;
      }
      edges.emplace_back(std::min(u, v), std::max(u, v));
    }
    if (ok) return Graph::from_edges(n, edges);
  }
  throw std::runtime_error("make_regular_graph: retry budget exhausted for n=" + std::to_string(n) +
                           ", d=" + std::to_string(d));
}

Graph make_sbm(const SbmParams& p, std::uint64_t seed) {
  if (!(p.p_out >= 0.0 && p.p_out <= p.p_in && p.p_in <= 1.0))
    throw std::invalid_argument("make_sbm: need 0 <= p_out <= p_in <= 1");
  if (p.num_blocks == 0 || p.n % p.num_blocks != 0)
    throw std::invalid_argument("make_sbm: n must be divisible by num_blocks");
  if (p.feature_dim == 0) throw std::invalid_argument("make_sbm: feature_dim must be positive");
  if (p.feature_noise_sigma < 0.0) throw std::invalid_argument("make_sbm: negative noise sigma");

  const std::size_t block_size = p.n / p.num_blocks;
  Rng edge_rng(derive_seed(seed, "sbm-edges"));
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < p.n; ++u)
    for (std::size_t v = u + 1; v < p.n; ++v) {
      const double prob = (u / block_size == v / block_size) ? p.p_in : p.p_out;
      if (edge_rng.uniform() < prob) edges.emplace_back(static_cast<std::int32_t>(u), static_cast<std::int32_t>(v));
    }
  Graph g = Graph::from_edges(p.n, edges);

  Rng feat_rng(derive_seed(seed, "sbm-features"));
  Tensor x(p.n, p.feature_dim);
  for (std::size_t i = 0; i < p.n; ++i) {
    const std::size_t b = i / block_size;
    for (std::size_t l = 0; l < p.feature_dim; ++l) {
      const double mean = (l % p.num_blocks == b) ? 1.0 : 0.0;
      x(i, l) = p.feature_noise_sigma > 0.0 ? mean + feat_rng.normal(0.0, p.feature_noise_sigma) : mean;
    }
  }
  g.features = std::move(x);
  g.labels.resize(p.n);
  g.split.resize(p.n);
  for (std::size_t i = 0; i < p.n; ++i) {
    g.labels[i] = static_cast<int>(i / block_size);
    const std::size_t slot = (i % block_size) % 10;
    g.split[i] = slot == 0 ? Split::kTrain : (slot <= 2 ? Split::kVal : Split::kTest);
  }
  return g;
}

Graph perturb_add_edges(const Graph& g, double ratio, std::uint64_t seed) {
  require_loop_free(g, "perturb_add_edges");
  if (!(ratio >= 0.0)) throw std::invalid_argument("perturb_add_edges: ratio must be >= 0");
  auto edges = g.undirected_edges();
  const auto count = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(edges.size())));
  Rng rng(derive_seed(seed, "perturb-add"));
  const auto added = sample_absent_pairs(g.n, key_set(edges), count, rng);
  edges.insert(edges.end(), added.begin(), added.end());
  return with_node_data(Graph::from_edges(g.n, edges), g);
}

Graph rewire(const Graph& g, double ratio, std::uint64_t seed) {
  require_loop_free(g, "rewire");
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw std::invalid_argument("rewire: ratio must be in [0, 1]");
  auto edges = g.undirected_edges();
  const auto count = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(edges.size())));
  Rng rng(derive_seed(seed, "rewire"));
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.below(edges.size() - i);
    std::swap(edges[i], edges[j]);
  }
  std::vector<Edge> kept(edges.begin() + static_cast<std::ptrdiff_t>(count), edges.end());
  const auto added = sample_absent_pairs(g.n, key_set(kept), count, rng);
  kept.insert(kept.end(), added.begin(), added.end());
  return with_node_data(Graph::from_edges(g.n, kept), g);
}

std::size_t PairClasses::pair_index(std::size_t n, std::size_t i, std::size_t j) {
  if (i > j) std::swap(i, j);
  // Row-major upper triangle without the diagonal.
  return i * n - i * (i + 1) / 2 + (j - i - 1);
}

PairTag PairClasses::tag(std::size_t i, std::size_t j) const {
  if (i == j) throw std::invalid_argument("PairClasses::tag: i == j");
  return tags_[pair_index(n_, i, j)];
}

std::size_t PairClasses::count(PairTag t) const {
  return static_cast<std::size_t>(std::count(tags_.begin(), tags_.end(), t));
}

PairClasses hop_distance_classes(const Graph& g, std::size_t near_max, std::size_t far_min) {
  if (near_max >= far_min) throw std::invalid_argument("hop_distance_classes: need near_max < far_min");
  const std::size_t n = g.n;
  std::vector<PairTag> tags(n < 2 ? 0 : n * (n - 1) / 2, PairTag::kFar);
  constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(n);
  std::queue<std::int32_t> frontier;
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), kUnreached);
    dist[s] = 0;
    frontier.push(static_cast<std::int32_t>(s));
    while (!frontier.empty()) {
      const auto u = frontier.front();
      frontier.pop();
      // Nothing beyond far_min changes a tag.
      if (dist[u] >= far_min) continue;
      for (auto j = g.offsets[u]; j < g.offsets[u + 1]; ++j) {
        const auto v = g.dst[j];
        if (dist[v] == kUnreached) {
          dist[v] = dist[u] + 1;
          frontier.push(v);
        }
      }
    }
    for (std::size_t t = s + 1; t < n; ++t) {
      PairTag tag = PairTag::kFar;
      if (dist[t] <= near_max) tag = PairTag::kNear;
      else if (dist[t] < far_min) tag = PairTag::kNeither;
      tags[PairClasses::pair_index(n, s, t)] = tag;
    }
  }
  return PairClasses(n, std::move(tags));
}

}  // namespace droplab
