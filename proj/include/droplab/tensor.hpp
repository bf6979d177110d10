#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace droplab {

/// Dense row-major matrix of doubles.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static Tensor zeros(std::size_t r, std::size_t c) { return Tensor(r, c); }
  static Tensor identity(std::size_t n);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;

  std::string shape_str() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Throws std::invalid_argument naming both shapes.
[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b);

// Plain (non-differentiable) kernels shared by the tape and the analysis code.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace droplab
