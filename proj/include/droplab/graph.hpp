#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "droplab/tensor.hpp"

namespace droplab {

enum class Split : std::uint8_t { kNone, kTrain, kVal, kTest };

std::string_view to_string(Split s);
std::optional<Split> parse_split(std::string_view s);

using Edge = std::pair<std::int32_t, std::int32_t>;

/// Undirected graph stored as symmetric directed rows sorted by (src, dst).
///
/// Every undirected edge {u, v} appears as rows u->v and v->u; twin[j] is
/// the row index of the reverse of row j (self-loops map to themselves).
/// Self-loops only enter through add_self_loops() and are flagged so the
/// structural samplers can exempt them.
struct Graph {
  std::size_t n = 0;
  std::vector<std::int32_t> src;
  std::vector<std::int32_t> dst;
  std::vector<std::int64_t> offsets;  // n + 1 entries, CSR over src
  std::vector<std::int32_t> twin;
  std::vector<std::uint8_t> self_loop;

  std::optional<Tensor> features;  // n x c
  std::vector<int> labels;         // empty or n entries, -1 = unknown
  std::vector<Split> split;        // empty or n entries

  /// Builds from canonical-or-not undirected pairs. Rejects self-loops,
  /// duplicate pairs and out-of-range endpoints.
  static Graph from_edges(std::size_t n, std::span<const Edge> edges);

  std::size_t num_directed() const { return src.size(); }
  std::size_t num_undirected() const;
  std::size_t num_self_loops() const;
  bool has_self_loops() const { return num_self_loops() > 0; }
  /// Non-loop edges as (u, v) with u < v, sorted.
  std::vector<Edge> undirected_edges() const;
  bool has_edge(std::int32_t u, std::int32_t v) const;
  /// 1 + max label, 0 when unlabeled.
  std::size_t num_classes() const;
  std::size_t feature_dim() const { return features ? features->cols : 0; }
  std::vector<std::uint8_t> split_mask(Split s) const;

  /// Checks every structural invariant; throws std::logic_error on failure.
  void validate() const;
};

std::vector<std::size_t> degrees(const Graph& g);

/// Appends one flagged self-loop per node. Rejects graphs that already have loops.
Graph add_self_loops(const Graph& g);

/// coeff(u->v) = 1/sqrt(deg(u) deg(v)) with loop-inclusive degrees.
std::vector<double> sym_norm_coeffs(const Graph& g_with_loops);

/// Simple d-regular graph by the pairing model with full restart on
/// collision (budget: 1000 restarts).
Graph make_regular_graph(std::size_t n, std::size_t d, std::uint64_t seed);

struct SbmParams {
  std::size_t n = 300;
  std::size_t num_blocks = 3;
  double p_in = 0.03;
  double p_out = 0.005;
  std::size_t feature_dim = 32;
  double feature_noise_sigma = 1.0;
};

/// Stochastic block model with contiguous equal blocks. Features are block
/// indicator vectors (column l belongs to block l mod num_blocks) plus
/// Gaussian noise; labels are block ids; within each block positions are
/// split round-robin 1 train : 2 val : 7 test.
Graph make_sbm(const SbmParams& p, std::uint64_t seed);

/// Adds round(ratio * E) undirected edges drawn uniformly among absent
/// non-self pairs. Node data is carried over.
Graph perturb_add_edges(const Graph& g, double ratio, std::uint64_t seed);

/// Removes round(ratio * E) edges uniformly, then adds as many pairs drawn
/// uniformly among those absent after the removal.
Graph rewire(const Graph& g, double ratio, std::uint64_t seed);

enum class PairTag : std::uint8_t { kNeither, kNear, kFar };

/// Hop-distance class of every pair i < j (disconnected pairs are far).
class PairClasses {
 public:
  PairClasses() = default;
  PairClasses(std::size_t n, std::vector<PairTag> tags) : n_(n), tags_(std::move(tags)) {}

  std::size_t n() const { return n_; }
  PairTag tag(std::size_t i, std::size_t j) const;
  std::size_t count(PairTag t) const;
  const std::vector<PairTag>& tags() const { return tags_; }

  static std::size_t pair_index(std::size_t n, std::size_t i, std::size_t j);

 private:
  std::size_t n_ = 0;
  std::vector<PairTag> tags_;
};

PairClasses hop_distance_classes(const Graph& g, std::size_t near_max = 3, std::size_t far_min = 8);

}  // namespace droplab
