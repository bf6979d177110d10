#pragma once

// Unified random dropping on the message matrix.
//
// Row j of the message matrix M carries coeff[j] * h[src[j]] along the
// directed edge src[j] -> dst[j]. Dropout, DropEdge, DropNode and
// DropMessage are all realized as Bernoulli keep-masks over M with a
// per-row rescaling 1/(1 - rate) so that E[masked M] = M:
//
//   dropout      one draw per (source node, column), shared by every row
//                leaving that node
//   dropedge     one draw per undirected non-loop edge, shared by its two
//                rows; self-loop rows are always kept and never rescaled
//   dropnode     one draw per node, masking every row it sources
//   dropmessage  one independent draw per element; the nodewise variant
//                uses the rate of the row's source node

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "droplab/graph.hpp"
#include "droplab/rng.hpp"
#include "droplab/tape.hpp"
#include "droplab/tensor.hpp"

namespace droplab {

enum class DropKind { kNone, kDropout, kDropEdge, kDropNode, kDropMessage };

std::string_view to_string(DropKind k);
std::optional<DropKind> parse_drop_kind(std::string_view s);
inline constexpr DropKind kDroppingKinds[] = {DropKind::kDropout, DropKind::kDropEdge,
                                              DropKind::kDropNode, DropKind::kDropMessage};

struct DropSpec {
  DropKind kind = DropKind::kNone;
  double rate = 0.0;
  /// Per-node rates; only legal for dropmessage. Empty means use `rate`.
  std::vector<double> node_rates;
  std::uint64_t stream = 0;

  bool nodewise() const { return !node_rates.empty(); }
  /// Throws std::invalid_argument on rates outside [0, 1) or misuse of node_rates.
  void validate(std::size_t n) const;
};

/// Row structure of the message matrix for one graph.
struct MessageLayout {
  std::size_t n = 0;
  std::vector<std::int32_t> src;
  std::vector<std::int32_t> dst;
  std::vector<std::int32_t> twin;
  std::vector<std::uint8_t> self_loop;
  std::vector<double> coeff;

  std::size_t k() const { return src.size(); }

  /// GCN-normalized rows; the graph must already carry self-loops.
  static MessageLayout normalized(const Graph& g_with_loops);
  /// Unit coefficients, any graph (used by the counting analyses).
  static MessageLayout unit(const Graph& g);
};

/// Message matrix recorded on a tape, tied to its layout.
struct MessageFrame {
  const MessageLayout* layout = nullptr;
  Var values;
};

struct DropMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> keep;  // rows x cols
  std::vector<double> scale;       // per row

  bool kept(std::size_t j, std::size_t l) const { return keep[j * cols + l] != 0; }
  std::size_t kept_count() const;
  std::size_t masked_count() const { return rows * cols - kept_count(); }
  /// keep * scale as a dense constant for hadamard_const.
  Tensor factor() const;

  static DropMask all_keep(std::size_t rows, std::size_t cols);
};

Tensor build_messages(const MessageLayout& layout, const Tensor& h);
MessageFrame build_messages(const MessageLayout& layout, Var h);

/// Draws a mask of the DropSpec kind over a k x cols message matrix.
DropMask sample_mask(const DropSpec& spec, const MessageLayout& layout, std::size_t cols, Rng& rng);
/// Same, with the generator seeded from spec.stream.
DropMask sample_mask(const DropSpec& spec, const MessageLayout& layout, std::size_t cols);

/// Unscaled variant used by the counting analyses (scale fixed at 1).
DropMask sample_unscaled_mask(const DropSpec& spec, const MessageLayout& layout, std::size_t cols, Rng& rng);

Tensor apply_mask(const Tensor& values, const DropMask& mask);
MessageFrame apply_mask(const MessageFrame& frame, const DropMask& mask);

Tensor aggregate(const MessageLayout& layout, const Tensor& values);
Var aggregate(const MessageFrame& frame);

/// Input-level draw for dropout / dropnode on an n x cols feature matrix,
/// consuming the generator exactly like sample_mask does for that kind.
/// Returns keep (0/1) scaled by `scaled ? 1/(1-rate) : 1`.
Tensor sample_input_factor(DropKind kind, double rate, std::size_t n, std::size_t cols, Rng& rng,
                           bool scaled = true);

/// Per-node DropMessage rate bound 1 - max(1/d_i, 1/c) using loop-free
/// out-degrees. Isolated nodes get 0 and are reported in `isolated`.
std::vector<double> diversity_rate_bound(const Graph& loop_free, std::size_t c,
                                         std::vector<std::size_t>* isolated = nullptr);

/// The two routes to the same perturbed message matrix for dropout and
/// dropnode: masking M directly, and masking the features before building M.
struct EquivalenceWitness {
  Tensor message_path;
  Tensor input_path;
};
EquivalenceWitness equivalence_witness(const MessageLayout& layout, const Tensor& h, DropKind kind,
                                       double rate, std::uint64_t seed);

}  // namespace droplab
