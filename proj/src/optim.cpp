#include "droplab/optim.hpp"

#include <algorithm>
#include <cmath>

#include "droplab/rng.hpp"

namespace droplab {

Tensor glorot_init(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("glorot_init: dimensions must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Rng rng(seed);
  Tensor t(rows, cols);
  for (double& v : t.data) v = (2.0 * rng.uniform() - 1.0) * bound;
  return t;
}

void adam_step(std::span<Parameter> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& cfg) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.value.rows, p.value.cols);
      state.v.emplace_back(p.value.rows, p.value.cols);
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].value.same_shape(grads[i])) shape_error("adam_step", params[i].value, grads[i]);
    if (!grads[i].all_finite()) throw NonFiniteGradient(params[i].name);
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& w = params[i].value;
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g.data[j] + cfg.weight_decay * w.data[j];
      m.data[j] = cfg.beta1 * m.data[j] + (1.0 - cfg.beta1) * gj;
      v.data[j] = cfg.beta2 * v.data[j] + (1.0 - cfg.beta2) * gj * gj;
      const double mhat = m.data[j] / bc1;
      const double vhat = v.data[j] / bc2;
      w.data[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

double grad_check(const LossWithGrad& fn, std::vector<Tensor> params, double epsilon) {
  std::vector<Tensor> analytic;
  const double base = fn(params, &analytic);
  if (!std::isfinite(base)) throw std::runtime_error("grad_check: non-finite loss");
  if (analytic.size() != params.size()) throw std::invalid_argument("grad_check: gradient count mismatch");

  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t j = 0; j < params[p].size(); ++j) {
      const double orig = params[p].data[j];
      params[p].data[j] = orig + epsilon;
      const double up = fn(params, nullptr);
      params[p].data[j] = orig - epsilon;
      const double down = fn(params, nullptr);
      params[p].data[j] = orig;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw std::runtime_error("grad_check: non-finite evaluation");
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[p].data[j];
      const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace droplab
