#include "hit/nn.hpp"

#include <stdexcept>

namespace hit {

namespace {

Shape ones_like_except(const Shape& shape, int keep_axis) {
  Shape s(shape.size(), 1);
  s[static_cast<size_t>(keep_axis)] = shape[static_cast<size_t>(keep_axis)];
  return s;
}

}  // namespace

Var normalize(Var x, NormKind kind, Var gamma, Var beta, NormState* state, NormMode mode,
              double eps) {
  const Tensor& t = x.value();
  const int rank = t.rank();
  if (rank < 2) throw std::invalid_argument("normalize: rank must be >= 2");
  const int ch_axis = rank - 1;
  const int64_t channels = t.extent(ch_axis);
  if (gamma.value().size() != channels || beta.value().size() != channels) {
    throw std::invalid_argument("normalize: scale/shift must have one entry per channel");
  }
  Tape& tape = *x.tape;

  Var xhat;
  if (kind == NormKind::layer) {
    uint32_t mask = 1u << ch_axis;
    Var mu = mean_axes(x, mask, true);
    Var centered = sub(x, broadcast_to(mu, t.shape()));
    Var var = mean_axes(mul(centered, centered), mask, true);
    Var denom = sqrt(add_scalar(var, eps));
    xhat = div(centered, broadcast_to(denom, t.shape()));
  } else {
    uint32_t mask = 0;
    for (int i = 0; i < ch_axis; ++i) mask |= 1u << i;
    if (mode == NormMode::train) {
      Var mu = mean_axes(x, mask, true);
      Var centered = sub(x, broadcast_to(mu, t.shape()));
      Var var = mean_axes(mul(centered, centered), mask, true);
      Var denom = sqrt(add_scalar(var, eps));
      xhat = div(centered, broadcast_to(denom, t.shape()));
      if (state != nullptr) {
        // running-stat update is bookkeeping, detached from the graph
        if (!state->initialized()) state->init_identity(channels);
        const Tensor mu_v = mu.value().reshaped(Shape{channels});
        const Tensor var_v = var.value().reshaped(Shape{channels});
        const double m = state->momentum;
        for (int64_t c = 0; c < channels; ++c) {
          state->running_mean[c] = m * state->running_mean[c] + (1.0 - m) * mu_v[c];
          state->running_var[c] = m * state->running_var[c] + (1.0 - m) * var_v[c];
        }
      }
    } else {
      if (state == nullptr || !state->initialized()) {
        throw std::logic_error("normalize: eval-mode batch norm requires populated running stats");
      }
      Shape stat_shape = ones_like_except(t.shape(), ch_axis);
      Var mu = reshape(tape.constant(state->running_mean), stat_shape);
      Var var = reshape(tape.constant(state->running_var), stat_shape);
      Var denom = sqrt(add_scalar(var, eps));
      xhat = div(sub(x, broadcast_to(mu, t.shape())), broadcast_to(denom, t.shape()));
    }
  }

  Shape ch_shape = ones_like_except(t.shape(), ch_axis);
  Var g = broadcast_to(reshape(gamma, ch_shape), t.shape());
  Var b = broadcast_to(reshape(beta, ch_shape), t.shape());
  return add(mul(xhat, g), b);
}

Var affine(Var x, Var w, Var b) {
  const Tensor& t = x.value();
  if (t.rank() < 1) throw std::invalid_argument("affine: input must have a channel axis");
  const int64_t in_dim = t.extent(t.rank() - 1);
  if (w.value().rank() != 2 || w.value().extent(0) != in_dim) {
    throw std::invalid_argument("affine: weight shape " + shape_str(w.value().shape()) +
                                " incompatible with input " + shape_str(t.shape()));
  }
  const int64_t out_dim = w.value().extent(1);
  if (b.value().size() != out_dim) throw std::invalid_argument("affine: bias length mismatch");

  const int64_t rows = t.size() / in_dim;
  Var flat = reshape(x, Shape{rows, in_dim});
  Var y = contract("pd,dh->ph", flat, w);
  y = add(y, broadcast_to(reshape(b, Shape{1, out_dim}), Shape{rows, out_dim}));
  Shape out_shape = t.shape();
  out_shape.back() = out_dim;
  return reshape(y, out_shape);
}

Var mlp_forward(Var x, Var w1, Var b1, Var w2, Var b2) {
  return affine(relu(affine(x, w1, b1)), w2, b2);
}

Var add_broadcast(Var x, Var tail) {
  const Shape& xs = x.value().shape();
  const Shape& ts = tail.value().shape();
  if (ts.size() > xs.size()) throw std::invalid_argument("add_broadcast: tail rank exceeds input");
  for (size_t i = 0; i < ts.size(); ++i) {
    if (ts[ts.size() - 1 - i] != xs[xs.size() - 1 - i]) {
      throw std::invalid_argument("add_broadcast: trailing shape mismatch");
    }
  }
  Shape padded(xs.size(), 1);
  for (size_t i = 0; i < ts.size(); ++i) {
    padded[xs.size() - ts.size() + i] = ts[i];
  }
  return add(x, broadcast_to(reshape(tail, padded), xs));
}

}  // namespace hit
