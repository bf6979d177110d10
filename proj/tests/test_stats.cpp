#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "droplab/rng.hpp"
#include "droplab/stats.hpp"

using namespace droplab;

TEST_CASE("sums and moments") {
  const std::vector<double> xs = {1, 2, 3, 4};
  CHECK(pairwise_sum(xs) == 10.0);
  CHECK(mean(xs) == 2.5);
  CHECK(sample_std(xs) == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
  CHECK(sample_std(std::vector<double>{7.0}) == 0.0);

  const Moments m = moments(xs);
  CHECK(m.count == 4);
  CHECK(m.mean == 2.5);
  CHECK(m.variance == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  // Central fourth moment with the n denominator: (1.5^4 * 2 + 0.5^4 * 2) / 4.
  CHECK(m.m4 == doctest::Approx((2 * std::pow(1.5, 4) + 2 * std::pow(0.5, 4)) / 4).epsilon(1e-15));
  CHECK(m.mean_std_error() == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)).epsilon(1e-15));
  const double pop = 1.25;
  CHECK(m.variance_std_error() == doctest::Approx(std::sqrt((m.m4 - pop * pop) / 4.0)).epsilon(1e-15));
}

TEST_CASE("pairwise summation is accurate on many small terms") {
  std::vector<double> xs(1 << 20, 0.1);
  CHECK(std::abs(pairwise_sum(xs) - 0.1 * (1 << 20)) < 1e-7);
}

TEST_CASE("variance standard error matches its sampling spread") {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> dist(0.0, 2.0);
  std::vector<double> vars;
  double predicted = 0.0;
  for (int rep = 0; rep < 400; ++rep) {
    std::vector<double> xs(500);
    for (double& x : xs) x = dist(gen);
    const Moments m = moments(xs);
    vars.push_back(m.variance);
    predicted += m.variance_std_error() / 400.0;
  }
  // Normal data: sd of the sample variance is sigma^2 sqrt(2 / n).
  CHECK(sample_std(vars) == doctest::Approx(4.0 * std::sqrt(2.0 / 500.0)).epsilon(0.1));
  CHECK(predicted == doctest::Approx(4.0 * std::sqrt(2.0 / 500.0)).epsilon(0.05));
}

TEST_CASE("chi-square tail and independence test") {
  CHECK(chi_square_1dof_p(0.0) == 1.0);
  CHECK(chi_square_1dof_p(3.841458820694124) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(chi_square_1dof_p(6.634896601021214) == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(independence_p_value(250, 250, 250, 250) == 1.0);
  CHECK(independence_p_value(500, 0, 0, 500) < 1e-100);
  CHECK(independence_p_value(0, 0, 10, 20) == 1.0);
}

TEST_CASE("seed derivation") {
  CHECK(derive_seed(1, "init", 0) == derive_seed(1, "init", 0));
  CHECK(derive_seed(1, "init", 0) != derive_seed(1, "init", 1));
  CHECK(derive_seed(1, "init", 0) != derive_seed(2, "init", 0));
  CHECK(derive_seed(1, "init", 0) != derive_seed(1, "drop", 0));
  CHECK(derive_seed(1, "mask", 1, 2) != derive_seed(1, "mask", 2, 1));
  Rng a(5), b(5);
  for (int i = 0; i < 10; ++i) CHECK(a.uniform() == b.uniform());
  Rng r(3);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
