#include "droplab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace droplab {

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Tensor t;
  t.rows = rows.size();
  t.cols = rows.size() ? rows.begin()->size() : 0;
  t.data.reserve(t.rows * t.cols);
  for (const auto& r : rows) {
    if (r.size() != t.cols) throw std::invalid_argument("Tensor::from_rows: ragged rows");
    t.data.insert(t.data.end(), r.begin(), r.end());
  }
  return t;
}

bool Tensor::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_str() const {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() +
                              " vs " + b.shape_str());
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols != b.rows) shape_error("matmul", a, b);
  Tensor out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* o = out.row(i);
    const double* ar = a.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double s = ar[k];
      if (s == 0.0) continue;
      const double* br = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) o[j] += s * br[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  Tensor t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_error("max_abs_diff", a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace droplab
