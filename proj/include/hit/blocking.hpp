#pragma once

#include "hit/tape.hpp"
#include "hit/tensor.hpp"

namespace hit {

/// A gather map: output flat index -> input flat index, plus the output shape.
struct GatherMap {
  Shape out_shape;
  std::shared_ptr<const std::vector<int64_t>> map;
};

/// out[b, i, j, (di*p + dj)*d + c] = in[b, i*p + di, j*p + dj, c].
/// Row-major over (di, dj), channel fastest; this ordering is normative.
GatherMap space_to_depth_map(const Shape& in, int64_t p);
/// Exact inverse of space_to_depth with the same ordering convention.
GatherMap depth_to_space_map(const Shape& in, int64_t p);
/// out[b, i, j, c] = in[b, i/2, j/2, c].
GatherMap nearest_upsample_map(const Shape& in);

template <class S>
TensorT<S> apply_gather(const GatherMap& gm, const TensorT<S>& x) {
  TensorT<S> out(gm.out_shape);
  const auto& map = *gm.map;
  for (size_t i = 0; i < map.size(); ++i) out[static_cast<int64_t>(i)] = x[map[i]];
  return out;
}

/// Rank-4 view of a feature map as [batch, patches m, within-patch n, d],
/// carrying enough origin metadata to invert the blocking without external
/// bookkeeping.
template <class T>
struct Blocked {
  T data;  // [b, m, n, d]
  int64_t patch_size = 1;
  int64_t src_h = 0, src_w = 0;
  double aspect_ratio = 1.0;  // w / h
};

using BlockedTensor = Blocked<Tensor>;
using BlockedVar = Blocked<Var>;

// Tensor-level ops.
Tensor space_to_depth(const Tensor& x, int64_t p);
Tensor depth_to_space(const Tensor& x, int64_t p);
Tensor32 space_to_depth(const Tensor32& x, int64_t p);
Tensor32 depth_to_space(const Tensor32& x, int64_t p);
Tensor pixel_shuffle(const Tensor& x);      // depth_to_space, p = 2
Tensor nearest_upsample(const Tensor& x);   // 2x nearest neighbour
BlockedTensor block(const Tensor& x, int64_t p);
Tensor unblock(const BlockedTensor& y);
/// Inversion from raw [b,m,n,d] data and an aspect ratio, per the published
/// reshape recipe (n must be a perfect square, m/aspect a perfect square).
Tensor unblock(const Tensor& y, double aspect_ratio);

// Tape-level ops (identical index semantics; linear, hence exactly
// differentiable).
Var space_to_depth(Var x, int64_t p);
Var depth_to_space(Var x, int64_t p);
Var pixel_shuffle(Var x);
Var nearest_upsample(Var x);
BlockedVar block(Var x, int64_t p);
Var unblock(const BlockedVar& y);

}  // namespace hit
