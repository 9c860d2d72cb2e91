#include "hit/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hit {

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& cfg) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  }
  if (cfg.lr <= 0.0) throw std::invalid_argument("adam_step: lr must be positive");
  for (size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads[i])) {
      throw std::invalid_argument("adam_step: shape mismatch at parameter " + std::to_string(i));
    }
    if (!grads[i].all_finite()) {
      throw std::runtime_error("adam_step: non-finite gradient at parameter " + std::to_string(i));
    }
  }
  if (state.m.empty()) {
    for (size_t i = 0; i < params.size(); ++i) {
      state.m.emplace_back(params[i]->shape());
      state.v.emplace_back(params[i]->shape());
    }
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: state sized for a different parameter set");
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (int64_t j = 0; j < p.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace hit
