#pragma once

// Executable checks of the analytical results on random dropping: sample
// variance of each method, the second-order regularization identity,
// information diversity, message entropy, and MADGap.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "droplab/drop.hpp"
#include "droplab/graph.hpp"
#include "droplab/tensor.hpp"

namespace droplab {

// ---- sample variance -------------------------------------------------------

/// Variance of the kept-element count of an all-ones n*d x c message matrix
/// on a loop-free d-regular graph with unscaled masks:
///   dropout      (1-δ)δ n c d²
///   dropedge     2(1-δ)δ n c² d
///   dropnode     (1-δ)δ n c² d²
///   dropmessage  (1-δ)δ n c d
double variance_closed_form(DropKind method, std::size_t n, std::size_t c, std::size_t d, double delta);

struct VarianceReport {
  DropKind method = DropKind::kNone;
  std::size_t n = 0, c = 0, d = 0;
  double delta = 0.0;
  double closed_form = 0.0;
  double mc_estimate = 0.0;
  std::size_t mc_trials = 0;
  double mc_std_error = 0.0;  // standard error of mc_estimate
};

/// Sample variance of the kept-element count over `trials` unscaled masks.
/// `g` must be loop-free and regular.
VarianceReport variance_monte_carlo(DropKind method, const Graph& g, std::size_t c, double delta,
                                    std::size_t trials, std::uint64_t seed);

// ---- regularization identity ------------------------------------------------

/// One-layer binary model h = aggregate(M) W with sigmoid output.
struct RegFixture {
  Graph graph;         // loop-free; self-loops are added for propagation
  Tensor features;     // n x c
  std::vector<int> labels;  // 0/1
  Tensor weights;      // c x 1
};

/// Complete graph on 12 nodes with c = 16 alternating-sign features and
/// alternating-sign weights of magnitude `w`, so every clean logit is 0.
RegFixture regularization_fixture(double w = 0.5);

enum class VarSource { kMonteCarlo, kClosedForm };
std::string_view to_string(VarSource s);

struct RegCheckReport {
  DropKind method = DropKind::kNone;
  double delta = 0.0;
  std::size_t trials = 0;
  double base_loss = 0.0;         // clean sum-form BCE
  double mc_expected_loss = 0.0;  // mean perturbed loss
  double mc_std_error = 0.0;
  /// E[L~] - L estimated with the first-order term as a control variate
  /// (its expectation is zero for unbiased masks).
  double gap = 0.0;
  double gap_std_error = 0.0;
  double taylor_term = 0.0;       // Σ ½ z(1-z) Var(h~_i)
  VarSource var_source = VarSource::kMonteCarlo;
  /// Mean of the per-draw remainder L~ - L - Σ f' Δ - Σ ½ f'' Δ².
  double residual = 0.0;
  double residual_std_error = 0.0;
  std::vector<double> var_mc;       // per node, mean of Δ²
  std::vector<double> var_mc_std_error;
  std::vector<double> var_closed;   // per node, dropmessage only (else empty)

  double relative_residual() const { return taylor_term > 0.0 ? residual / taylor_term : 0.0; }
};

/// Closed-form Var(h~_i) for dropmessage: Σ_{j: dst=i} δ_j/(1-δ_j) Σ_l (M_jl W_l)².
std::vector<double> dropmessage_logit_variance(const MessageLayout& layout, const Tensor& messages,
                                               const Tensor& weights, const DropSpec& spec);

RegCheckReport regularization_check(const RegFixture& fixture, const DropSpec& drop, std::size_t trials,
                                    std::uint64_t seed, VarSource source = VarSource::kMonteCarlo);

// ---- information diversity --------------------------------------------------

/// (node, column) pairs with at least one kept element among the node's rows.
std::size_t feature_diversity(const MessageLayout& layout, const DropMask& mask);
/// Rows with at least one kept element.
std::size_t topology_diversity(const DropMask& mask);

struct DiversityCheck {
  std::size_t trials = 0;
  std::vector<double> row_mean;   // kept elements per row
  std::vector<double> row_std_error;
  std::vector<std::int32_t> cell_node;  // node of each (node, column) entity
  std::vector<double> cell_mean;  // kept messages per (node, column), nodes with rows only
  std::vector<double> cell_std_error;
  /// Entities whose mean falls below 1 - 3 standard errors.
  std::size_t violations = 0;
  /// Entities whose mean falls below 1.
  std::size_t below_one = 0;
  double min_mean = 0.0;

  bool holds() const { return violations == 0; }
};

/// Mean preserved counts under nodewise unscaled dropmessage with `rates`.
DiversityCheck diversity_expectation_check(const Graph& loop_free, std::size_t c, std::span<const double> rates,
                                           std::size_t trials, std::uint64_t seed);

// ---- entropy ----------------------------------------------------------------

struct EntropyInputs {
  std::vector<double> p;             // message-type proportions
  std::vector<double> senders;       // n_i
  std::vector<double> deliveries;    // t_i >= n_i
  double msg_dim = 1.0;              // message dimension
  double delta = 0.0;

  void validate() const;
};

/// Natural-log entropies.
double entropy_clean(const EntropyInputs& in);
double entropy_expected(DropKind method, const EntropyInputs& in);

struct EntropyScanRow {
  double delta = 0.0;
  double clean = 0.0;
  double dropout = 0.0;
  double dropedge = 0.0;
  double dropnode = 0.0;
  double dropmessage = 0.0;

  bool dm_ge_dropout() const { return dropmessage >= dropout; }
  bool dm_ge_dropedge() const { return dropmessage >= dropedge; }
  bool dm_ge_dropnode() const { return dropmessage >= dropnode; }
  bool all_ge_clean() const {
    return dropout >= clean && dropedge >= clean && dropnode >= clean && dropmessage >= clean;
  }
};

std::vector<EntropyScanRow> entropy_ordering_scan(EntropyInputs in, std::span<const double> grid);

// ---- over-smoothing ---------------------------------------------------------

/// Mean cosine distance over far pairs minus mean over near pairs. Zero-norm
/// rows are left out. Throws when either class has no usable pair.
double madgap(const Tensor& h, const PairClasses& pairs);

}  // namespace droplab
