#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace droplab {

/// Mixes a root seed with a purpose label and up to three integer
/// coordinates (layer, epoch, trial, ...) into an independent stream seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                          std::uint64_t a = 0, std::uint64_t b = 0,
                          std::uint64_t c = 0);

inline constexpr std::string_view kGeneratorName = "mt19937_64";

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Bernoulli(1 - drop_rate): true means the element is kept.
  bool keep(double drop_rate) { return uniform() >= drop_rate; }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    std::uniform_int_distribution<std::uint64_t> dist(0, bound - 1);
    return dist(engine_);
  }

  double normal(double mean, double stddev) {
    std::normal_distribution<double> dist(mean, stddev);
    return dist(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace droplab
