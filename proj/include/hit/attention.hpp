#pragma once

#include <functional>
#include <string_view>

#include "hit/blocking.hpp"
#include "hit/nn.hpp"
#include "hit/tape.hpp"

namespace hit {

/// Attention variants. multi_axis splits heads between the dilated (across
/// patches, fixed within-patch offset) and regional (within patch) paths;
/// interleaved alternates regional/dilated across consecutive blocks and is
/// realized at the stage level; axial runs on the unblocked map with rows as
/// the patch axis; full is the all-pairs baseline.
enum class AttentionMode { multi_axis, regional_only, dilated_only, interleaved, axial, full };

const char* attention_mode_name(AttentionMode mode);
AttentionMode attention_mode_from_name(std::string_view name);

/// Multi-query projection set: per-head queries and output, a single shared
/// key/value projection.
///   wq: [h, d, k]   wk: [d_kv_in, k]   wv: [d_kv_in, v]   wo: [h, d, v]
template <class T>
struct AttentionWeightsT {
  T wq, wk, wv, wo;
};

using AttentionWeights = AttentionWeightsT<Tensor>;
using AttentionWeights32 = AttentionWeightsT<Tensor32>;
using AttentionWeightVars = AttentionWeightsT<Var>;

struct AttentionDims {
  int64_t heads, model_dim, key_dim, value_dim, kv_in_dim;
};

template <class T>
AttentionDims attention_dims(const AttentionWeightsT<T>& w) {
  const auto& qs = w.wq.shape();
  const auto& ks = w.wk.shape();
  const auto& vs = w.wv.shape();
  const auto& os = w.wo.shape();
  if (qs.size() != 3 || ks.size() != 2 || vs.size() != 2 || os.size() != 3) {
    throw std::invalid_argument("attention weights: wq/wo must be rank 3, wk/wv rank 2");
  }
  AttentionDims dims{qs[0], qs[1], qs[2], vs[1], ks[0]};
  if (ks[1] != dims.key_dim || vs[0] != dims.kv_in_dim || os[0] != dims.heads ||
      os[1] != dims.model_dim || os[2] != dims.value_dim) {
    throw std::invalid_argument("attention weights: inconsistent projection shapes");
  }
  return dims;
}

/// Multi-axis blocked self-attention over [b, m, n, d] (Algorithm-2 layout):
/// first h/2 heads take the dilated path, second h/2 the regional path, and
/// the halves are concatenated along the head axis before the output
/// projection. Logits are scaled by 1/sqrt(k). mode may also select
/// regional_only or dilated_only, which run all h heads on one path.
BlockedVar multi_axis_attention(const BlockedVar& x, const BlockedVar& y,
                                const AttentionWeightVars& w,
                                AttentionMode mode = AttentionMode::multi_axis);

/// All-pairs scaled dot-product attention in multi-query form over [b, N, d].
/// The O(N^2) baseline and the equivalence oracle for the blocked kernel.
Var full_attention_oracle(Var x, const AttentionWeightVars& w);

/// Multi-axis attention on the unblocked [b, h, w, d] map: rows become the
/// patch axis, so the first h/2 heads attend along columns and the second
/// h/2 along rows.
Var axial_attention(Var x, const AttentionWeightVars& w);

/// Multi-query cross-attention: x [b, N, d] queries attend to z + p_z
/// (z: [b, L, c], p_z: [L, c]); cost is linear in N.
Var cross_attention_mqa(Var x, Var z, Var p_z, const AttentionWeightVars& w);

struct NormVars {
  Var gamma, beta;
  NormState* state = nullptr;
};

struct MlpVars {
  Var w1, b1, w2, b2;
};

/// Pre-norm residual transformer block:
///   y = x + inner(norm(x));  out = y + mlp(norm(y))
/// Positional embeddings are the caller's business. Passing mlp == nullptr
/// skips the second half (bare attention residual).
Var attention_block(Var x, const std::function<Var(Var)>& inner, NormKind kind, NormMode mode,
                    const NormVars& attn_norm, const MlpVars* mlp, const NormVars* mlp_norm);

/// out = x + mlp(norm(x)); the high-resolution stage block.
Var residual_mlp_block(Var x, NormKind kind, NormMode mode, const NormVars& norm,
                       const MlpVars& mlp);

/// Divisor p of both h and w minimizing |p^2 - h*w/p^2|; ties toward smaller p.
int64_t balance_patch_size(int64_t h, int64_t w);

/// Exact number of attention logit entries a kernel materializes.
///   full:        b * h * (m*n)^2
///   multi_axis:  b * (h/2) * (n*m^2 + m*n^2)   (axial identical on an m x n grid)
///   regional:    b * h * m*n^2     dilated: b * h * n*m^2
/// interleaved is a stage-level schedule, not a single kernel, and is
/// rejected here.
int64_t flop_count(AttentionMode mode, int64_t b, int64_t m, int64_t n, int64_t d, int64_t h,
                   int64_t k, int64_t v);

// ---------------------------------------------------------------------------
// Raw (tape-free) forward kernels, shared by the complexity benchmark. These
// mirror the tape kernels contraction-for-contraction, so the f64
// instantiation reproduces the tape output bit for bit.

template <class S>
TensorT<S> multi_axis_attention_raw(const TensorT<S>& x, const AttentionWeightsT<TensorT<S>>& w,
                                    AttentionMode mode, int64_t* logit_entries) {
  AttentionDims dims = attention_dims(w);
  const double rs = 1.0 / std::sqrt(static_cast<double>(dims.key_dim));
  TensorT<S> q = contract("bmnd,hdk->bhmnk", x, w.wq);
  TensorT<S> k = contract("bmnd,dk->bmnk", x, w.wk);
  TensorT<S> v = contract("bmnd,dv->bmnv", x, w.wv);

  auto run_path = [&](const TensorT<S>& qh, bool dilated) {
    TensorT<S> logits = dilated ? contract("bhxyk,bzyk->bhyxz", qh, k)
                                : contract("bhxyk,bxzk->bhxyz", qh, k);
    for (int64_t i = 0; i < logits.size(); ++i) logits[i] = static_cast<S>(rs) * logits[i];
    if (logit_entries) *logit_entries += logits.size();
    TensorT<S> scores = softmax_raw(logits, -1);
    return dilated ? contract("bhyxz,bzyv->bhxyv", scores, v)
                   : contract("bhxyz,bxzv->bhxyv", scores, v);
  };

  TensorT<S> o;
  if (mode == AttentionMode::multi_axis) {
    if (dims.heads % 2 != 0) throw std::invalid_argument("multi_axis attention: head count must be even");
    const int64_t half = dims.heads / 2;
    Shape qs = q.shape();
    Shape half_shape{qs[0], half, qs[2], qs[3], qs[4]};
    TensorT<S> q1(half_shape), q2(half_shape);
    const int64_t run = half * qs[2] * qs[3] * qs[4];
    for (int64_t b = 0; b < qs[0]; ++b) {
      std::copy(q.data() + b * 2 * run, q.data() + b * 2 * run + run, q1.data() + b * run);
      std::copy(q.data() + b * 2 * run + run, q.data() + (b + 1) * 2 * run, q2.data() + b * run);
    }
    TensorT<S> o1 = run_path(q1, true);
    TensorT<S> o2 = run_path(q2, false);
    Shape os = o1.shape();
    os[1] = dims.heads;
    o = TensorT<S>(os);
    const int64_t orun = half * os[2] * os[3] * os[4];
    for (int64_t b = 0; b < os[0]; ++b) {
      std::copy(o1.data() + b * orun, o1.data() + (b + 1) * orun, o.data() + b * 2 * orun);
      std::copy(o2.data() + b * orun, o2.data() + (b + 1) * orun, o.data() + b * 2 * orun + orun);
    }
  } else if (mode == AttentionMode::regional_only) {
    o = run_path(q, false);
  } else if (mode == AttentionMode::dilated_only) {
    o = run_path(q, true);
  } else {
    throw std::invalid_argument("multi_axis_attention_raw: unsupported mode");
  }
  return contract("bhmnv,hdv->bmnd", o, w.wo);
}

template <class S>
TensorT<S> full_attention_raw(const TensorT<S>& x, const AttentionWeightsT<TensorT<S>>& w,
                              int64_t* logit_entries) {
  AttentionDims dims = attention_dims(w);
  const double rs = 1.0 / std::sqrt(static_cast<double>(dims.key_dim));
  TensorT<S> q = contract("bnd,hdk->bhnk", x, w.wq);
  TensorT<S> k = contract("bnd,dk->bnk", x, w.wk);
  TensorT<S> v = contract("bnd,dv->bnv", x, w.wv);
  TensorT<S> logits = contract("bhnk,bmk->bhnm", q, k);
  for (int64_t i = 0; i < logits.size(); ++i) logits[i] = static_cast<S>(rs) * logits[i];
  if (logit_entries) *logit_entries += logits.size();
  TensorT<S> scores = softmax_raw(logits, -1);
  TensorT<S> o = contract("bhnm,bmv->bhnv", scores, v);
  return contract("bhnv,hdv->bnd", o, w.wo);
}

}  // namespace hit
