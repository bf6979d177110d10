#pragma once

// Reverse-mode differentiation over dense matrices.
//
// A Tape records every primitive applied during a forward pass. Each record
// owns its value and a closure that pushes the record's adjoint into the
// adjoints of its inputs. backward() walks the records in exact reverse
// creation order; adjoints accumulate additively at fan-out.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "droplab/tensor.hpp"

namespace droplab {

class Tape;

struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives gradients.
  Var constant(Tensor value);
  /// Leaf whose adjoint is accumulated by backward().
  Var variable(Tensor value);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  /// Adjoint of a record; zeros if nothing flowed into it.
  const Tensor& grad(std::size_t id);
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  /// Seeds d(loss)/d(loss) = 1 and propagates. loss must be 1x1.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Used by primitives.
  Var record(Tensor value, bool needs_grad, BackwardFn fn);
  Tensor& grad_accumulator(std::size_t id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
/// a (n x c) + bias (1 x c) broadcast over rows.
Var add_rowvec(Var a, Var bias);
Var relu(Var a);
Var sigmoid(Var a);
Var scale(Var a, double s);
/// Elementwise product with a constant; the constant receives no gradient.
Var hadamard_const(Var a, const Tensor& mask);
/// Row j multiplied by the constant factors[j].
Var scale_rows(Var a, std::span<const double> factors);
/// Row j of the result is row index[j] of h; backward scatter-adds.
Var gather_rows(Var h, std::span<const std::int32_t> index);
/// out[v] = sum of rows j with dst[j] == v; nodes with no rows get zeros.
Var segment_sum(Var m, std::span<const std::int32_t> dst, std::size_t n);
/// Sum of all entries as a 1x1 value.
Var sum(Var a);

/// Mean over masked rows of -log softmax(logits)[label].
Var masked_softmax_ce(Var logits, std::span<const int> labels,
                      std::span<const std::uint8_t> mask);

enum class Reduction { kMean, kSum };

/// Binary cross-entropy on n x 1 logits in softplus form:
/// y=1 contributes log(1+e^-h), y=0 contributes log(1+e^h).
Var masked_binary_ce(Var logits, std::span<const int> labels,
                     std::span<const std::uint8_t> mask,
                     Reduction reduction = Reduction::kMean);

/// Numerically stable log(1 + e^x).
double softplus(double x);
double logistic(double x);

}  // namespace droplab
