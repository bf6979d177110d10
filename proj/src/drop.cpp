#include "droplab/drop.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace droplab {

std::string_view to_string(DropKind k) {
  switch (k) {
    case DropKind::kDropout: return "dropout";
    case DropKind::kDropEdge: return "dropedge";
    case DropKind::kDropNode: return "dropnode";
    case DropKind::kDropMessage: return "dropmessage";
    case DropKind::kNone: break;
  }
  return "none";
}

std::optional<DropKind> parse_drop_kind(std::string_view s) {
  for (DropKind k : {DropKind::kNone, DropKind::kDropout, DropKind::kDropEdge, DropKind::kDropNode,
                     DropKind::kDropMessage})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

namespace {

void check_rate(double r, const char* what) {
  if (!(r >= 0.0 && r < 1.0))
    throw std::invalid_argument(std::string(what) + " must lie in [0, 1), got " + std::to_string(r));
}

double inv_keep(double rate) { return 1.0 / (1.0 - rate); }

}  // namespace

void DropSpec::validate(std::size_t n) const {
  if (nodewise()) {
    if (kind != DropKind::kDropMessage)
      throw std::invalid_argument("nodewise rates are only defined for dropmessage, not " +
                                  std::string(to_string(kind)));
    if (node_rates.size() != n)
      throw std::invalid_argument("nodewise rate vector has " + std::to_string(node_rates.size()) +
                                  " entries for " + std::to_string(n) + " nodes");
    for (double r : node_rates) check_rate(r, "nodewise drop rate");
  } else {
    check_rate(rate, "drop rate");
  }
}

MessageLayout MessageLayout::normalized(const Graph& g) {
  if (g.num_self_loops() != g.n)
    throw std::invalid_argument("MessageLayout::normalized: graph needs one self-loop per node");
  MessageLayout l = unit(g);
  l.coeff = sym_norm_coeffs(g);
  return l;
}

MessageLayout MessageLayout::unit(const Graph& g) {
  MessageLayout l;
  l.n = g.n;
  l.src = g.src;
  l.dst = g.dst;
  l.twin = g.twin;
  l.self_loop = g.self_loop;
  l.coeff.assign(g.num_directed(), 1.0);
  return l;
}

std::size_t DropMask::kept_count() const {
  return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), 1));
}

Tensor DropMask::factor() const {
  Tensor f(rows, cols);
  for (std::size_t j = 0; j < rows; ++j)
    for (std::size_t l = 0; l < cols; ++l) f(j, l) = keep[j * cols + l] ? scale[j] : 0.0;
  return f;
}

DropMask DropMask::all_keep(std::size_t rows, std::size_t cols) {
  DropMask m;
  m.rows = rows;
  m.cols = cols;
  m.keep.assign(rows * cols, 1);
  m.scale.assign(rows, 1.0);
  return m;
}

Tensor build_messages(const MessageLayout& layout, const Tensor& h) {
  if (h.rows != layout.n)
    throw std::invalid_argument("build_messages: representation has " + std::to_string(h.rows) +
                                " rows for " + std::to_string(layout.n) + " nodes");
  Tensor m(layout.k(), h.cols);
  for (std::size_t j = 0; j < layout.k(); ++j) {
    const double* s = h.row(layout.src[j]);
    double* o = m.row(j);
    for (std::size_t l = 0; l < h.cols; ++l) o[l] = layout.coeff[j] * s[l];
  }
  return m;
}

MessageFrame build_messages(const MessageLayout& layout, Var h) {
  if (h.rows() != layout.n)
    throw std::invalid_argument("build_messages: representation has " + std::to_string(h.rows()) +
                                " rows for " + std::to_string(layout.n) + " nodes");
  Var gathered = gather_rows(h, layout.src);
  return MessageFrame{&layout, scale_rows(gathered, layout.coeff)};
}

namespace {

// Dropout draws: one keep bit per (node, column), node-major.
std::vector<std::uint8_t> draw_feature_bits(double rate, std::size_t n, std::size_t cols, Rng& rng) {
  std::vector<std::uint8_t> bits(n * cols);
  for (auto& b : bits) b = rng.keep(rate) ? 1 : 0;
  return bits;
}

std::vector<std::uint8_t> draw_node_bits(double rate, std::size_t n, Rng& rng) {
  std::vector<std::uint8_t> bits(n);
  for (auto& b : bits) b = rng.keep(rate) ? 1 : 0;
  return bits;
}

DropMask sample_impl(const DropSpec& spec, const MessageLayout& layout, std::size_t cols, Rng& rng,
                     bool scaled) {
  spec.validate(layout.n);
  const std::size_t k = layout.k();
  DropMask m;
  m.rows = k;
  m.cols = cols;
  m.keep.assign(k * cols, 1);
  m.scale.assign(k, 1.0);
  const double s = scaled ? inv_keep(spec.rate) : 1.0;

  switch (spec.kind) {
    case DropKind::kNone:
      break;
    case DropKind::kDropout: {
      const auto bits = draw_feature_bits(spec.rate, layout.n, cols, rng);
      for (std::size_t j = 0; j < k; ++j) {
        const std::uint8_t* b = bits.data() + static_cast<std::size_t>(layout.src[j]) * cols;
        std::copy_n(b, cols, m.keep.data() + j * cols);
        m.scale[j] = s;
      }
      break;
    }
    case DropKind::kDropNode: {
      const auto bits = draw_node_bits(spec.rate, layout.n, rng);
      for (std::size_t j = 0; j < k; ++j) {
        if (!bits[layout.src[j]]) std::fill_n(m.keep.data() + j * cols, cols, 0);
        m.scale[j] = s;
      }
      break;
    }
    case DropKind::kDropEdge: {
      std::vector<std::uint8_t> row_keep(k, 1);
      for (std::size_t j = 0; j < k; ++j) {
        if (layout.self_loop[j] || layout.src[j] > layout.dst[j]) continue;
        const std::uint8_t b = rng.keep(spec.rate) ? 1 : 0;
        row_keep[j] = b;
        row_keep[layout.twin[j]] = b;
      }
      for (std::size_t j = 0; j < k; ++j) {
        if (layout.self_loop[j]) continue;
        if (!row_keep[j]) std::fill_n(m.keep.data() + j * cols, cols, 0);
        m.scale[j] = s;
      }
      break;
    }
    case DropKind::kDropMessage: {
      for (std::size_t j = 0; j < k; ++j) {
        const double rate = spec.nodewise() ? spec.node_rates[layout.src[j]] : spec.rate;
        std::uint8_t* row = m.keep.data() + j * cols;
        for (std::size_t l = 0; l < cols; ++l) row[l] = rng.keep(rate) ? 1 : 0;
        m.scale[j] = scaled ? inv_keep(rate) : 1.0;
      }
      break;
    }
  }
  return m;
}

}  // namespace

DropMask sample_mask(const DropSpec& spec, const MessageLayout& layout, std::size_t cols, Rng& rng) {
  return sample_impl(spec, layout, cols, rng, true);
}

DropMask sample_mask(const DropSpec& spec, const MessageLayout& layout, std::size_t cols) {
  Rng rng(spec.stream);
  return sample_impl(spec, layout, cols, rng, true);
}

DropMask sample_unscaled_mask(const DropSpec& spec, const MessageLayout& layout, std::size_t cols, Rng& rng) {
  return sample_impl(spec, layout, cols, rng, false);
}

Tensor apply_mask(const Tensor& values, const DropMask& mask) {
  if (values.rows != mask.rows || values.cols != mask.cols)
    shape_error("apply_mask", values, Tensor(mask.rows, mask.cols));
  Tensor out(values.rows, values.cols);
  for (std::size_t j = 0; j < values.rows; ++j)
    for (std::size_t l = 0; l < values.cols; ++l)
      out(j, l) = mask.keep[j * mask.cols + l] ? values(j, l) * mask.scale[j] : 0.0;
  return out;
}

MessageFrame apply_mask(const MessageFrame& frame, const DropMask& mask) {
  return MessageFrame{frame.layout, hadamard_const(frame.values, mask.factor())};
}

Tensor aggregate(const MessageLayout& layout, const Tensor& values) {
  if (values.rows != layout.k())
    throw std::invalid_argument("aggregate: frame has " + std::to_string(values.rows) + " rows, layout " +
                                std::to_string(layout.k()));
  Tensor out(layout.n, values.cols);
  for (std::size_t j = 0; j < layout.k(); ++j) {
    double* o = out.row(layout.dst[j]);
    const double* r = values.row(j);
    for (std::size_t l = 0; l < values.cols; ++l) o[l] += r[l];
  }
  return out;
}

Var aggregate(const MessageFrame& frame) {
  return segment_sum(frame.values, frame.layout->dst, frame.layout->n);
}

Tensor sample_input_factor(DropKind kind, double rate, std::size_t n, std::size_t cols, Rng& rng, bool scaled) {
  check_rate(rate, "drop rate");
  const double s = scaled ? inv_keep(rate) : 1.0;
  Tensor f(n, cols);
  if (kind == DropKind::kDropout) {
    const auto bits = draw_feature_bits(rate, n, cols, rng);
    for (std::size_t i = 0; i < bits.size(); ++i) f.data[i] = bits[i] ? s : 0.0;
  } else if (kind == DropKind::kDropNode) {
    const auto bits = draw_node_bits(rate, n, rng);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < cols; ++l) f(i, l) = bits[i] ? s : 0.0;
  } else {
    throw std::invalid_argument("sample_input_factor: no feature-level form for " + std::string(to_string(kind)));
  }
  return f;
}

std::vector<double> diversity_rate_bound(const Graph& g, std::size_t c, std::vector<std::size_t>* isolated) {
  if (g.has_self_loops()) throw std::invalid_argument("diversity_rate_bound: expects the loop-free graph");
  if (c == 0) throw std::invalid_argument("diversity_rate_bound: feature dimension must be positive");
  const auto deg = degrees(g);
  std::vector<double> bound(g.n, 0.0);
  for (std::size_t i = 0; i < g.n; ++i) {
    if (deg[i] == 0) {
      if (isolated) isolated->push_back(i);
      continue;
    }
    // Each row keeps >= 1 of c elements and each (node, column) keeps >= 1
    // of d_i messages, in expectation.
    bound[i] = 1.0 - std::max(1.0 / static_cast<double>(deg[i]), 1.0 / static_cast<double>(c));
  }
  return bound;
}

EquivalenceWitness equivalence_witness(const MessageLayout& layout, const Tensor& h, DropKind kind, double rate,
                                       std::uint64_t seed) {
  if (kind != DropKind::kDropout && kind != DropKind::kDropNode)
    throw std::invalid_argument("equivalence_witness: only dropout and dropnode have a feature-level form");
  DropSpec spec{kind, rate, {}, seed};
  Rng a(seed);
  const DropMask mask = sample_unscaled_mask(spec, layout, h.cols, a);
  EquivalenceWitness w;
  w.message_path = apply_mask(build_messages(layout, h), mask);

  Rng b(seed);
  const Tensor f = sample_input_factor(kind, rate, layout.n, h.cols, b, /*scaled=*/false);
  Tensor masked_h = h;
  for (std::size_t i = 0; i < masked_h.size(); ++i) masked_h.data[i] *= f.data[i];
  w.input_path = build_messages(layout, masked_h);
  return w;
}

}  // namespace droplab
