#pragma once

#include "hit/tape.hpp"

namespace hit {

enum class NormKind { batch, layer };
enum class NormMode { train, eval };

/// Running statistics for batch normalization, one entry per channel.
/// Empty tensors mean "never populated"; eval mode rejects that state.
struct NormState {
  Tensor running_mean, running_var;
  double momentum = 0.99;

  bool initialized() const { return running_mean.size() > 0; }
  void init_identity(int64_t channels) {
    running_mean = Tensor(Shape{channels});
    running_var = Tensor::full(Shape{channels}, 1.0);
  }
};

/// Standardize-and-affine over the last (channel) axis.
///   batch: statistics over every non-channel axis, per channel; train mode
///          uses batch moments (biased variance) and updates the running
///          stats by exponential moving average; eval mode uses the stored
///          running stats.
///   layer: statistics over the channel axis, per position; stateless.
/// gamma/beta are the learned per-channel scale and shift.
Var normalize(Var x, NormKind kind, Var gamma, Var beta, NormState* state, NormMode mode,
              double eps = 1e-5);

/// x @ w + b applied over the last axis; leading axes are flattened and
/// restored. w: [in, out], b: [out].
Var affine(Var x, Var w, Var b);

/// Two-layer position-wise network: max(0, x W1 + b1) W2 + b2.
Var mlp_forward(Var x, Var w1, Var b1, Var w2, Var b2);

/// Adds a trailing-shape tensor (e.g. a positional embedding of shape
/// [d0,...,dk]) to x of shape [batch,...,d0,...,dk], broadcasting over the
/// leading axes.
Var add_broadcast(Var x, Var tail);

}  // namespace hit
