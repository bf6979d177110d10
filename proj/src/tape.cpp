#include "droplab/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace droplab {

const Tensor& Var::value() const { return tape->value(id); }
const Tensor& Var::grad() const { return tape->grad(id); }

Var Tape::constant(Tensor value) { return record(std::move(value), false, nullptr); }

Var Tape::variable(Tensor value) { return record(std::move(value), true, nullptr); }

Var Tape::record(Tensor value, bool needs_grad, BackwardFn fn) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = needs_grad;
  if (needs_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad_accumulator(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.rows, n.value.cols);
    n.has_grad = true;
  }
  return n.grad;
}

const Tensor& Tape::grad(std::size_t id) { return grad_accumulator(id); }

void Tape::backward(Var loss) {
  if (loss.tape != this) throw std::invalid_argument("backward: variable from another tape");
  const Tensor& v = value(loss.id);
  if (v.rows != 1 || v.cols != 1)
    throw std::invalid_argument("backward: loss must be 1x1, got " + v.shape_str());
  grad_accumulator(loss.id).data[0] += 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    // The closure may allocate adjoints of earlier nodes; nodes_ is not
    // resized during backward so the reference stays valid.
    n.backward(*this, n.grad);
  }
}

namespace {

void same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw std::invalid_argument("operands recorded on different tapes");
}

void accumulate(Tape& t, std::size_t id, const Tensor& g) {
  if (!t.needs_grad(id)) return;
  Tensor& acc = t.grad_accumulator(id);
  for (std::size_t i = 0; i < g.size(); ++i) acc.data[i] += g.data[i];
}

}  // namespace

Var matmul(Var a, Var b) {
  same_tape(a, b);
  Tape& t = *a.tape;
  Tensor out = droplab::matmul(a.value(), b.value());
  const bool ng = t.needs_grad(a.id) || t.needs_grad(b.id);
  const std::size_t ia = a.id, ib = b.id;
  return t.record(std::move(out), ng, [ia, ib](Tape& tp, const Tensor& g) {
    if (tp.needs_grad(ia)) accumulate(tp, ia, droplab::matmul(g, transpose(tp.value(ib))));
    if (tp.needs_grad(ib)) accumulate(tp, ib, droplab::matmul(transpose(tp.value(ia)), g));
  });
}

Var add(Var a, Var b) {
  same_tape(a, b);
  if (!a.value().same_shape(b.value())) shape_error("add", a.value(), b.value());
  Tape& t = *a.tape;
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.value().data[i];
  const std::size_t ia = a.id, ib = b.id;
  return t.record(std::move(out), t.needs_grad(ia) || t.needs_grad(ib),
                  [ia, ib](Tape& tp, const Tensor& g) {
                    accumulate(tp, ia, g);
                    accumulate(tp, ib, g);
                  });
}

Var add_rowvec(Var a, Var bias) {
  same_tape(a, bias);
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  if (bv.rows != 1 || bv.cols != av.cols) shape_error("add_rowvec", av, bv);
  Tape& t = *a.tape;
  Tensor out = av;
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += bv.data[j];
  const std::size_t ia = a.id, ib = bias.id;
  return t.record(std::move(out), t.needs_grad(ia) || t.needs_grad(ib),
                  [ia, ib](Tape& tp, const Tensor& g) {
                    accumulate(tp, ia, g);
                    if (tp.needs_grad(ib)) {
                      Tensor gb(1, g.cols);
                      for (std::size_t i = 0; i < g.rows; ++i)
                        for (std::size_t j = 0; j < g.cols; ++j) gb.data[j] += g(i, j);
                      accumulate(tp, ib, gb);
                    }
                  });
}

Var relu(Var a) {
  Tape& t = *a.tape;
  Tensor out = a.value();
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  const std::size_t ia = a.id;
  return t.record(std::move(out), t.needs_grad(ia), [ia](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value(ia);
    Tensor gi(g.rows, g.cols);
    for (std::size_t i = 0; i < g.size(); ++i) gi.data[i] = x.data[i] > 0.0 ? g.data[i] : 0.0;
    accumulate(tp, ia, gi);
  });
}

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

Var sigmoid(Var a) {
  Tape& t = *a.tape;
  Tensor out = a.value();
  for (double& v : out.data) v = logistic(v);
  const std::size_t ia = a.id;
  const std::size_t self = t.size();
  return t.record(std::move(out), t.needs_grad(ia), [ia, self](Tape& tp, const Tensor& g) {
    const Tensor& s = tp.value(self);
    Tensor gi(g.rows, g.cols);
    for (std::size_t i = 0; i < g.size(); ++i) gi.data[i] = g.data[i] * s.data[i] * (1.0 - s.data[i]);
    accumulate(tp, ia, gi);
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  Tensor out = a.value();
  for (double& v : out.data) v *= s;
  const std::size_t ia = a.id;
  return t.record(std::move(out), t.needs_grad(ia), [ia, s](Tape& tp, const Tensor& g) {
    Tensor gi = g;
    for (double& v : gi.data) v *= s;
    accumulate(tp, ia, gi);
  });
}

Var hadamard_const(Var a, const Tensor& mask) {
  if (!a.value().same_shape(mask)) shape_error("hadamard_const", a.value(), mask);
  Tape& t = *a.tape;
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= mask.data[i];
  const std::size_t ia = a.id;
  return t.record(std::move(out), t.needs_grad(ia), [ia, mask](Tape& tp, const Tensor& g) {
    Tensor gi = g;
    for (std::size_t i = 0; i < gi.size(); ++i) gi.data[i] *= mask.data[i];
    accumulate(tp, ia, gi);
  });
}

Var scale_rows(Var a, std::span<const double> factors) {
  const Tensor& av = a.value();
  if (factors.size() != av.rows)
    throw std::invalid_argument("scale_rows: " + std::to_string(factors.size()) +
                                " factors for " + av.shape_str());
  Tape& t = *a.tape;
  Tensor out = av;
  for (std::size_t i = 0; i < out.rows; ++i) {
    double* r = out.row(i);
    for (std::size_t j = 0; j < out.cols; ++j) r[j] *= factors[i];
  }
  std::vector<double> f(factors.begin(), factors.end());
  const std::size_t ia = a.id;
  return t.record(std::move(out), t.needs_grad(ia), [ia, f = std::move(f)](Tape& tp, const Tensor& g) {
    Tensor gi = g;
    for (std::size_t i = 0; i < gi.rows; ++i) {
      double* r = gi.row(i);
      for (std::size_t j = 0; j < gi.cols; ++j) r[j] *= f[i];
    }
    accumulate(tp, ia, gi);
  });
}

Var gather_rows(Var h, std::span<const std::int32_t> index) {
  const Tensor& hv = h.value();
  Tensor out(index.size(), hv.cols);
  for (std::size_t j = 0; j < index.size(); ++j) {
    const auto src = index[j];
    if (src < 0 || static_cast<std::size_t>(src) >= hv.rows)
      throw std::out_of_range("gather_rows: index " + std::to_string(src) + " out of range for " +
                              hv.shape_str());
    std::copy_n(hv.row(src), hv.cols, out.row(j));
  }
  Tape& t = *h.tape;
  std::vector<std::int32_t> idx(index.begin(), index.end());
  const std::size_t ih = h.id;
  return t.record(std::move(out), t.needs_grad(ih), [ih, idx = std::move(idx)](Tape& tp, const Tensor& g) {
    if (!tp.needs_grad(ih)) return;
    Tensor& acc = tp.grad_accumulator(ih);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      double* dst = acc.row(idx[j]);
      const double* src = g.row(j);
      for (std::size_t c = 0; c < g.cols; ++c) dst[c] += src[c];
    }
  });
}

Var segment_sum(Var m, std::span<const std::int32_t> dst, std::size_t n) {
  const Tensor& mv = m.value();
  if (dst.size() != mv.rows)
    throw std::invalid_argument("segment_sum: " + std::to_string(dst.size()) +
                                " destinations for " + mv.shape_str());
  Tensor out(n, mv.cols);
  for (std::size_t j = 0; j < dst.size(); ++j) {
    const auto v = dst[j];
    if (v < 0 || static_cast<std::size_t>(v) >= n)
      throw std::out_of_range("segment_sum: destination " + std::to_string(v) +
                              " out of range for n=" + std::to_string(n));
    double* o = out.row(v);
    const double* r = mv.row(j);
    for (std::size_t c = 0; c < mv.cols; ++c) o[c] += r[c];
  }
  Tape& t = *m.tape;
  std::vector<std::int32_t> d(dst.begin(), dst.end());
  const std::size_t im = m.id;
  return t.record(std::move(out), t.needs_grad(im), [im, d = std::move(d)](Tape& tp, const Tensor& g) {
    if (!tp.needs_grad(im)) return;
    Tensor& acc = tp.grad_accumulator(im);
    for (std::size_t j = 0; j < d.size(); ++j) {
      double* a = acc.row(j);
      const double* r = g.row(d[j]);
      for (std::size_t c = 0; c < g.cols; ++c) a[c] += r[c];
    }
  });
}

Var sum(Var a) {
  Tape& t = *a.tape;
  double s = 0.0;
  for (double v : a.value().data) s += v;
  Tensor out(1, 1, s);
  const std::size_t ia = a.id;
  return t.record(std::move(out), t.needs_grad(ia), [ia](Tape& tp, const Tensor& g) {
    const Tensor& x = tp.value(ia);
    accumulate(tp, ia, Tensor(x.rows, x.cols, g.data[0]));
  });
}

namespace {

std::size_t count_mask(std::span<const std::uint8_t> mask, std::size_t n, const char* op) {
  if (mask.size() != n)
    throw std::invalid_argument(std::string(op) + ": mask length " + std::to_string(mask.size()) +
                                " != " + std::to_string(n));
  std::size_t count = 0;
  for (auto m : mask) count += m ? 1 : 0;
  if (count == 0) throw std::invalid_argument(std::string(op) + ": empty mask");
  return count;
}

}  // namespace

Var masked_softmax_ce(Var logits, std::span<const int> labels, std::span<const std::uint8_t> mask) {
  const Tensor& z = logits.value();
  const std::size_t count = count_mask(mask, z.rows, "masked_softmax_ce");
  if (labels.size() != z.rows) throw std::invalid_argument("masked_softmax_ce: label count mismatch");
  Tensor probs(z.rows, z.cols);
  double loss = 0.0;
  for (std::size_t i = 0; i < z.rows; ++i) {
    if (!mask[i]) continue;
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= z.cols)
      throw std::invalid_argument("masked_softmax_ce: invalid label " + std::to_string(y) +
                                  " on masked node " + std::to_string(i));
    const double* r = z.row(i);
    const double mx = *std::max_element(r, r + z.cols);
    double se = 0.0;
    for (std::size_t c = 0; c < z.cols; ++c) se += std::exp(r[c] - mx);
    const double lse = mx + std::log(se);
    loss += lse - r[y];
    for (std::size_t c = 0; c < z.cols; ++c) probs(i, c) = std::exp(r[c] - lse);
  }
  const double inv = 1.0 / static_cast<double>(count);
  Tape& t = *logits.tape;
  std::vector<int> y(labels.begin(), labels.end());
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  const std::size_t il = logits.id;
  return t.record(Tensor(1, 1, loss * inv), t.needs_grad(il),
                  [il, inv, probs = std::move(probs), y = std::move(y), m = std::move(m)](
                      Tape& tp, const Tensor& g) {
                    Tensor gi(probs.rows, probs.cols);
                    const double s = g.data[0] * inv;
                    for (std::size_t i = 0; i < probs.rows; ++i) {
                      if (!m[i]) continue;
                      for (std::size_t c = 0; c < probs.cols; ++c) gi(i, c) = s * probs(i, c);
                      gi(i, y[i]) -= s;
                    }
                    accumulate(tp, il, gi);
                  });
}

Var masked_binary_ce(Var logits, std::span<const int> labels, std::span<const std::uint8_t> mask,
                     Reduction reduction) {
  const Tensor& h = logits.value();
  if (h.cols != 1) throw std::invalid_argument("masked_binary_ce: logits must be n x 1, got " + h.shape_str());
  const std::size_t count = count_mask(mask, h.rows, "masked_binary_ce");
  if (labels.size() != h.rows) throw std::invalid_argument("masked_binary_ce: label count mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < h.rows; ++i) {
    if (!mask[i]) continue;
    if (labels[i] != 0 && labels[i] != 1)
      throw std::invalid_argument("masked_binary_ce: non-binary label " + std::to_string(labels[i]));
    loss += labels[i] == 1 ? softplus(-h.data[i]) : softplus(h.data[i]);
  }
  const double norm = reduction == Reduction::kMean ? 1.0 / static_cast<double>(count) : 1.0;
  Tape& t = *logits.tape;
  std::vector<int> y(labels.begin(), labels.end());
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  const std::size_t il = logits.id;
  return t.record(Tensor(1, 1, loss * norm), t.needs_grad(il),
                  [il, norm, y = std::move(y), m = std::move(m)](Tape& tp, const Tensor& g) {
                    const Tensor& hv = tp.value(il);
                    Tensor gi(hv.rows, 1);
                    for (std::size_t i = 0; i < hv.rows; ++i) {
                      if (!m[i]) continue;
                      gi.data[i] = g.data[0] * norm * (logistic(hv.data[i]) - (y[i] == 1 ? 1.0 : 0.0));
                    }
                    accumulate(tp, il, gi);
                  });
}

}  // namespace droplab
