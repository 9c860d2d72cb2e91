#pragma once

#include <span>

#include "hit/tensor.hpp"

namespace hit {

/// First/second-moment accumulators, allocated lazily on the first step so
/// their shapes always mirror the parameters.
struct AdamState {
  std::vector<Tensor> m, v;
  int64_t step = 0;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double eps = 1e-8;
};

/// One Adam update with bias correction. Rejects non-finite gradients.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& cfg);

}  // namespace hit
