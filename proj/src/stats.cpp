#include "droplab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace droplab {

double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

double mean(std::span<const double> xs) {
  return xs.empty() ? 0.0 : pairwise_sum(xs) / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = mean(xs);
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - mu) * (xs[i] - mu);
  return std::sqrt(pairwise_sum(sq) / static_cast<double>(xs.size() - 1));
}

double Moments::mean_std_error() const {
  return count == 0 ? 0.0 : std::sqrt(variance / static_cast<double>(count));
}

double Moments::variance_std_error() const {
  if (count == 0) return 0.0;
  const double n = static_cast<double>(count);
  const double pop_var = variance * (n - 1.0) / n;
  return std::sqrt(std::max(0.0, m4 - pop_var * pop_var) / n);
}

Moments moments(std::span<const double> xs) {
  Moments m;
  m.count = xs.size();
  if (xs.empty()) return m;
  m.mean = mean(xs);
  std::vector<double> d2(xs.size()), d4(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - m.mean;
    d2[i] = d * d;
    d4[i] = d2[i] * d2[i];
  }
  const double n = static_cast<double>(xs.size());
  m.variance = xs.size() < 2 ? 0.0 : pairwise_sum(d2) / (n - 1.0);
  m.m4 = pairwise_sum(d4) / n;
  return m;
}

double chi_square_1dof_p(double statistic) {
  if (statistic <= 0.0) return 1.0;
  return std::erfc(std::sqrt(statistic / 2.0));
}

double independence_p_value(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  const double n = static_cast<double>(a + b + c + d);
  const double r0 = static_cast<double>(a + b), r1 = static_cast<double>(c + d);
  const double c0 = static_cast<double>(a + c), c1 = static_cast<double>(b + d);
  if (r0 == 0 || r1 == 0 || c0 == 0 || c1 == 0) return 1.0;
  const double diff = static_cast<double>(a) * static_cast<double>(d) - static_cast<double>(b) * static_cast<double>(c);
  return chi_square_1dof_p(n * diff * diff / (r0 * r1 * c0 * c1));
}

}  // namespace droplab
