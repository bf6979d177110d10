#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "droplab/tensor.hpp"

namespace droplab {

struct Parameter {
  std::string name;
  Tensor value;
};

/// Uniform on +-sqrt(6 / (rows + cols)).
Tensor glorot_init(std::size_t rows, std::size_t cols, std::uint64_t seed);

struct AdamConfig {
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;  // added to the gradient (classic L2)
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(const std::string& param)
      : std::runtime_error("non-finite gradient for parameter '" + param + "'"), param_(param) {}
  const std::string& parameter() const { return param_; }

 private:
  std::string param_;
};

/// One bias-corrected Adam update. State is lazily sized on first use.
void adam_step(std::span<Parameter> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& cfg);

/// Loss function for gradient checking: returns the scalar loss at params and,
/// when grads is non-null, fills it with the analytic gradient.
using LossWithGrad = std::function<double(const std::vector<Tensor>& params, std::vector<Tensor>* grads)>;

/// Max over all parameter entries of |analytic - numeric| /
/// max(1e-8, |analytic| + |numeric|), numeric by central differences.
double grad_check(const LossWithGrad& fn, std::vector<Tensor> params, double epsilon = 1e-5);

}  // namespace droplab
