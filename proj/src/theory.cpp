#include "droplab/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "droplab/rng.hpp"
#include "droplab/stats.hpp"
#include "droplab/tape.hpp"

namespace droplab {

double variance_closed_form(DropKind method, std::size_t n_, std::size_t c_, std::size_t d_, double delta) {
  const double n = static_cast<double>(n_), c = static_cast<double>(c_), d = static_cast<double>(d_);
  const double q = (1.0 - delta) * delta;
  switch (method) {
    case DropKind::kDropout: return q * n * c * d * d;
    case DropKind::kDropEdge: return 2.0 * q * n * c * c * d;
    case DropKind::kDropNode: return q * n * c * c * d * d;
    case DropKind::kDropMessage: return q * n * c * d;
    case DropKind::kNone: break;
  }
  return 0.0;
}

VarianceReport variance_monte_carlo(DropKind method, const Graph& g, std::size_t c, double delta,
                                    std::size_t trials, std::uint64_t seed) {
  if (trials < 2) throw std::invalid_argument("variance_monte_carlo: need at least 2 trials");
  if (g.has_self_loops()) throw std::invalid_argument("variance_monte_carlo: graph must be loop-free");
  const auto deg = degrees(g);
  if (deg.empty() || std::any_of(deg.begin(), deg.end(), [&](std::size_t x) { return x != deg[0]; }))
    throw std::invalid_argument("variance_monte_carlo: graph must be regular");

  const MessageLayout layout = MessageLayout::unit(g);
  const DropSpec spec{method, delta, {}, seed};
  Rng rng(seed);
  std::vector<double> counts(trials);
  for (auto& s : counts) s = static_cast<double>(sample_unscaled_mask(spec, layout, c, rng).kept_count());
  const Moments m = moments(counts);

  VarianceReport r;
  r.method = method;
  r.n = g.n;
  r.c = c;
  r.d = deg[0];
  r.delta = delta;
  r.closed_form = variance_closed_form(method, g.n, c, deg[0], delta);
  r.mc_estimate = m.variance;
  r.mc_trials = trials;
  r.mc_std_error = m.variance_std_error();
  return r;
}

RegFixture regularization_fixture(double w) {
  constexpr std::size_t n = 12, c = 16;
  std::vector<Edge> edges;
  for (std::int32_t u = 0; u < static_cast<std::int32_t>(n); ++u)
    for (std::int32_t v = u + 1; v < static_cast<std::int32_t>(n); ++v) edges.emplace_back(u, v);
  RegFixture f;
  f.graph = Graph::from_edges(n, edges);
  f.features = Tensor(n, c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < c; ++l) f.features(i, l) = (i + l) % 2 == 0 ? 1.0 : -1.0;
  f.weights = Tensor(c, 1);
  for (std::size_t l = 0; l < c; ++l) f.weights(l, 0) = l % 2 == 0 ? w : -w;
  f.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) f.labels[i] = static_cast<int>(i % 2);
  return f;
}

std::string_view to_string(VarSource s) { return s == VarSource::kClosedForm ? "closed_form" : "mc"; }

std::vector<double> dropmessage_logit_variance(const MessageLayout& layout, const Tensor& messages,
                                               const Tensor& weights, const DropSpec& spec) {
  if (spec.kind != DropKind::kDropMessage && spec.kind != DropKind::kNone)
    throw std::invalid_argument("dropmessage_logit_variance: closed form exists for dropmessage only");
  if (weights.cols != 1 || weights.rows != messages.cols) shape_error("dropmessage_logit_variance", messages, weights);
  std::vector<double> var(layout.n, 0.0);
  if (spec.kind == DropKind::kNone) return var;
  for (std::size_t j = 0; j < layout.k(); ++j) {
    const double rate = spec.nodewise() ? spec.node_rates[layout.src[j]] : spec.rate;
    const double ratio = rate / (1.0 - rate);
    double s = 0.0;
    for (std::size_t l = 0; l < messages.cols; ++l) {
      const double t = messages(j, l) * weights(l, 0);
      s += t * t;
    }
    var[layout.dst[j]] += ratio * s;
  }
  return var;
}

namespace {

double bce(double h, int y) { return y == 1 ? softplus(-h) : softplus(h); }

}  // namespace

RegCheckReport regularization_check(const RegFixture& fx, const DropSpec& drop, std::size_t trials,
                                    std::uint64_t seed, VarSource source) {
  if (trials < 100) throw std::invalid_argument("regularization_check: need at least 100 trials");
  const std::size_t n = fx.graph.n;
  if (fx.labels.size() != n) throw std::invalid_argument("regularization_check: label count mismatch");
  for (int y : fx.labels)
    if (y != 0 && y != 1) throw std::invalid_argument("regularization_check: labels must be binary");
  if (fx.features.rows != n || fx.weights.rows != fx.features.cols || fx.weights.cols != 1)
    shape_error("regularization_check", fx.features, fx.weights);
  if (source == VarSource::kClosedForm && drop.kind != DropKind::kDropMessage && drop.kind != DropKind::kNone)
    throw std::invalid_argument("regularization_check: closed-form variance exists for dropmessage only");

  const Graph looped = add_self_loops(fx.graph);
  const MessageLayout layout = MessageLayout::normalized(looped);
  const Tensor messages = build_messages(layout, fx.features);
  const std::size_t k = layout.k(), c = messages.cols;
  // contrib(j, l) = M_jl W_l; the logit of node i sums the rows it receives.
  Tensor contrib(k, c);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t l = 0; l < c; ++l) contrib(j, l) = messages(j, l) * fx.weights(l, 0);
  const Tensor h = matmul(aggregate(layout, messages), fx.weights);

  std::vector<double> d1(n), d2(n);
  double base = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = logistic(h.data[i]);
    d1[i] = z - fx.labels[i];
    d2[i] = z * (1.0 - z);
    base += bce(h.data[i], fx.labels[i]);
  }

  Rng rng(seed);
  std::vector<double> losses(trials), gaps(trials), rems(trials);
  std::vector<std::vector<double>> sq(n, std::vector<double>(trials));
  std::vector<double> ht(n);
  for (std::size_t t = 0; t < trials; ++t) {
    const DropMask mask = sample_mask(drop, layout, c, rng);
    std::fill(ht.begin(), ht.end(), 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < c; ++l)
        if (mask.keep[j * c + l]) s += contrib(j, l);
      ht[layout.dst[j]] += mask.scale[j] * s;
    }
    double loss = 0.0, first = 0.0, second = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double delta = ht[i] - h.data[i];
      loss += bce(ht[i], fx.labels[i]);
      first += d1[i] * delta;
      second += 0.5 * d2[i] * delta * delta;
      sq[i][t] = delta * delta;
    }
    losses[t] = loss;
    gaps[t] = loss - base - first;
    rems[t] = gaps[t] - second;
  }

  RegCheckReport r;
  r.method = drop.kind;
  r.delta = drop.rate;
  r.trials = trials;
  r.base_loss = base;
  const Moments ml = moments(losses), mg = moments(gaps), mr = moments(rems);
  r.mc_expected_loss = ml.mean;
  r.mc_std_error = ml.mean_std_error();
  r.gap = mg.mean;
  r.gap_std_error = mg.mean_std_error();
  r.var_source = source;
  for (std::size_t i = 0; i < n; ++i) {
    const Moments mv = moments(sq[i]);
    r.var_mc.push_back(mv.mean);
    r.var_mc_std_error.push_back(mv.mean_std_error());
  }
  if (drop.kind == DropKind::kDropMessage || drop.kind == DropKind::kNone)
    r.var_closed = dropmessage_logit_variance(layout, messages, fx.weights, drop);

  const std::vector<double>& var = source == VarSource::kClosedForm ? r.var_closed : r.var_mc;
  std::vector<double> terms(n);
  for (std::size_t i = 0; i < n; ++i) terms[i] = 0.5 * d2[i] * var[i];
  r.taylor_term = pairwise_sum(terms);
  if (source == VarSource::kMonteCarlo) {
    r.residual = mr.mean;
    r.residual_std_error = mr.mean_std_error();
  } else {
    r.residual = r.gap - r.taylor_term;
    r.residual_std_error = r.gap_std_error;
  }
  return r;
}

std::size_t feature_diversity(const MessageLayout& layout, const DropMask& mask) {
  std::vector<std::uint8_t> seen(layout.n * mask.cols, 0);
  for (std::size_t j = 0; j < mask.rows; ++j)
    for (std::size_t l = 0; l < mask.cols; ++l)
      if (mask.keep[j * mask.cols + l]) seen[static_cast<std::size_t>(layout.src[j]) * mask.cols + l] = 1;
  return static_cast<std::size_t>(std::count(seen.begin(), seen.end(), 1));
}

std::size_t topology_diversity(const DropMask& mask) {
  std::size_t td = 0;
  for (std::size_t j = 0; j < mask.rows; ++j) {
    const auto* row = mask.keep.data() + j * mask.cols;
    if (std::any_of(row, row + mask.cols, [](std::uint8_t b) { return b != 0; })) ++td;
  }
  return td;
}

namespace {

struct Accumulator {
  double sum = 0.0;
  double sum_sq = 0.0;
  void add(double x) {
    sum += x;
    sum_sq += x * x;
  }
  double mean(std::size_t t) const { return sum / static_cast<double>(t); }
  double std_error(std::size_t t) const {
    const double tt = static_cast<double>(t);
    const double mu = sum / tt;
    const double var = std::max(0.0, (sum_sq - tt * mu * mu) / (tt - 1.0));
    return std::sqrt(var / tt);
  }
};

}  // namespace

DiversityCheck diversity_expectation_check(const Graph& g, std::size_t c, std::span<const double> rates,
                                           std::size_t trials, std::uint64_t seed) {
  if (g.has_self_loops()) throw std::invalid_argument("diversity_expectation_check: graph must be loop-free");
  if (trials < 2) throw std::invalid_argument("diversity_expectation_check: need at least 2 trials");
  const MessageLayout layout = MessageLayout::unit(g);
  const DropSpec spec{DropKind::kDropMessage, 0.0, std::vector<double>(rates.begin(), rates.end()), seed};
  spec.validate(g.n);

  const std::size_t k = layout.k();
  std::vector<Accumulator> rows(k), cells(g.n * c);
  std::vector<std::size_t> cell_count(g.n * c);
  Rng rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    const DropMask mask = sample_unscaled_mask(spec, layout, c, rng);
    std::fill(cell_count.begin(), cell_count.end(), 0);
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t kept = 0;
      for (std::size_t l = 0; l < c; ++l) {
        if (!mask.keep[j * c + l]) continue;
        ++kept;
        ++cell_count[static_cast<std::size_t>(layout.src[j]) * c + l];
      }
      rows[j].add(static_cast<double>(kept));
    }
    for (std::size_t e = 0; e < cells.size(); ++e) cells[e].add(static_cast<double>(cell_count[e]));
  }

  DiversityCheck r;
  r.trials = trials;
  r.min_mean = std::numeric_limits<double>::infinity();
  auto judge = [&](double mean, double se) {
    if (mean < 1.0 - 3.0 * se) ++r.violations;
    if (mean < 1.0) ++r.below_one;
    r.min_mean = std::min(r.min_mean, mean);
  };
  for (std::size_t j = 0; j < k; ++j) {
    r.row_mean.push_back(rows[j].mean(trials));
    r.row_std_error.push_back(rows[j].std_error(trials));
    judge(r.row_mean.back(), r.row_std_error.back());
  }
  const auto deg = degrees(g);
  for (std::size_t i = 0; i < g.n; ++i) {
    if (deg[i] == 0) continue;
    for (std::size_t l = 0; l < c; ++l) {
      r.cell_node.push_back(static_cast<std::int32_t>(i));
      r.cell_mean.push_back(cells[i * c + l].mean(trials));
      r.cell_std_error.push_back(cells[i * c + l].std_error(trials));
      judge(r.cell_mean.back(), r.cell_std_error.back());
    }
  }
  return r;
}

void EntropyInputs::validate() const {
  if (p.empty()) throw std::invalid_argument("entropy: no message types");
  if (senders.size() != p.size() || deliveries.size() != p.size())
    throw std::invalid_argument("entropy: p, senders and deliveries must have equal length");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0)) throw std::invalid_argument("entropy: negative proportion");
    if (!(senders[i] >= 1.0) || !(deliveries[i] >= senders[i]))
      throw std::invalid_argument("entropy: need deliveries >= senders >= 1 for type " + std::to_string(i));
    total += p[i];
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("entropy: proportions must sum to 1");
  if (!(msg_dim >= 1.0)) throw std::invalid_argument("entropy: message dimension must be >= 1");
  if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("entropy: delta must lie in [0, 1)");
}

namespace {

double xlogy_neg(double x, double y) { return x > 0.0 ? -x * std::log(y) : 0.0; }

// Σ -p log((1-δ) p)
double kept_term(const EntropyInputs& in) {
  double s = 0.0;
  for (double p : in.p) s += xlogy_neg(p, (1.0 - in.delta) * p);
  return s;
}

// Σ -p log(p / min{d, m_i})
double spread_term(const EntropyInputs& in, const std::vector<double>& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < in.p.size(); ++i) s += xlogy_neg(in.p[i], in.p[i] / std::min(in.msg_dim, m[i]));
  return s;
}

}  // namespace

double entropy_clean(const EntropyInputs& in) {
  in.validate();
  double s = 0.0;
  for (double p : in.p) s += xlogy_neg(p, p);
  return s;
}

double entropy_expected(DropKind method, const EntropyInputs& in) {
  in.validate();
  const double d = in.delta;
  switch (method) {
    case DropKind::kNone: return entropy_clean(in);
    case DropKind::kDropEdge:
    case DropKind::kDropNode: return xlogy_neg(d, d) + (1.0 - d) * kept_term(in);
    case DropKind::kDropout: return d * spread_term(in, in.senders) + (1.0 - d) * kept_term(in);
    case DropKind::kDropMessage: return d * spread_term(in, in.deliveries) + (1.0 - d) * kept_term(in);
  }
  return 0.0;
}

std::vector<EntropyScanRow> entropy_ordering_scan(EntropyInputs in, std::span<const double> grid) {
  std::vector<EntropyScanRow> rows;
  for (double d : grid) {
    in.delta = d;
    EntropyScanRow r;
    r.delta = d;
    r.clean = entropy_clean(in);
    r.dropout = entropy_expected(DropKind::kDropout, in);
    r.dropedge = entropy_expected(DropKind::kDropEdge, in);
    r.dropnode = entropy_expected(DropKind::kDropNode, in);
    r.dropmessage = entropy_expected(DropKind::kDropMessage, in);
    rows.push_back(r);
  }
  return rows;
}

double madgap(const Tensor& h, const PairClasses& pairs) {
  if (pairs.n() != h.rows) throw std::invalid_argument("madgap: pair classes do not match representation rows");
  std::vector<double> norm(h.rows);
  for (std::size_t i = 0; i < h.rows; ++i) {
    double s = 0.0;
    for (std::size_t l = 0; l < h.cols; ++l) s += h(i, l) * h(i, l);
    norm[i] = std::sqrt(s);
  }
  std::vector<double> near, far;
  for (std::size_t i = 0; i < h.rows; ++i) {
    if (norm[i] == 0.0) continue;
    for (std::size_t j = i + 1; j < h.rows; ++j) {
      const PairTag tag = pairs.tag(i, j);
      if (tag == PairTag::kNeither || norm[j] == 0.0) continue;
      double dot = 0.0;
      for (std::size_t l = 0; l < h.cols; ++l) dot += h(i, l) * h(j, l);
      const double dist = 1.0 - dot / (norm[i] * norm[j]);
      (tag == PairTag::kNear ? near : far).push_back(dist);
    }
  }
  if (near.empty() || far.empty()) throw std::invalid_argument("madgap: need at least one near and one far pair");
  return mean(far) - mean(near);
}

}  // namespace droplab
