#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace droplab {

/// Pairwise (cascade) summation: deterministic and order-stable.
double pairwise_sum(std::span<const double> xs);
double mean(std::span<const double> xs);
/// Sample standard deviation with the n-1 denominator; 0 for fewer than 2 values.
double sample_std(std::span<const double> xs);

/// Streaming moments of a scalar statistic (count, mean, central moments up to 4).
struct Moments {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // sample variance, n-1 denominator
  double m4 = 0.0;        // central fourth moment, n denominator
  double mean_std_error() const;
  /// Normal-approximation standard error of the sample variance:
  /// sqrt((m4 - sigma^4) / count).
  double variance_std_error() const;
};
Moments moments(std::span<const double> xs);

/// Upper tail of the chi-square distribution with one degree of freedom.
double chi_square_1dof_p(double statistic);

/// Pearson chi-square test of independence on a 2x2 table of counts
/// [a b; c d]; returns the p-value (1 when a margin is empty).
double independence_p_value(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d);

}  // namespace droplab
