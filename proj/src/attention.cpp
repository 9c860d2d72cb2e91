#include "hit/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace hit {

const char* attention_mode_name(AttentionMode mode) {
  switch (mode) {
    case AttentionMode::multi_axis: return "multi_axis";
    case AttentionMode::regional_only: return "regional_only";
    case AttentionMode::dilated_only: return "dilated_only";
    case AttentionMode::interleaved: return "interleaved";
    case AttentionMode::axial: return "axial";
    case AttentionMode::full: return "full";
  }
  return "?";
}

AttentionMode attention_mode_from_name(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(AttentionMode::full); ++i) {
    AttentionMode m = static_cast<AttentionMode>(i);
    if (name == attention_mode_name(m)) return m;
  }
  throw std::invalid_argument("unknown attention mode: " + std::string(name));
}

namespace {

Var attention_path(Var q, Var k, Var v, double rs, bool dilated) {
  Tape& tape = *q.tape;
  Var logits = dilated ? contract("bhxyk,bzyk->bhyxz", q, k)
                       : contract("bhxyk,bxzk->bhxyz", q, k);
  logits = scale(logits, rs);
  tape.add_logit_entries(logits.size());
  Var scores = softmax(logits, -1);
  return dilated ? contract("bhyxz,bzyv->bhxyv", scores, v)
                 : contract("bhxyz,bxzv->bhxyv", scores, v);
}

}  // namespace

BlockedVar multi_axis_attention(const BlockedVar& x, const BlockedVar& y,
                                const AttentionWeightVars& w, AttentionMode mode) {
  if (!x.data.value().same_shape(y.data.value())) {
    throw std::invalid_argument("multi_axis_attention: query/key-value shapes differ");
  }
  AttentionDims dims = attention_dims(w);
  const Shape& s = x.data.value().shape();
  if (s.size() != 4 || s[3] != dims.model_dim) {
    throw std::invalid_argument("multi_axis_attention: expected [b,m,n,d] with d = model dim");
  }
  const double rs = 1.0 / std::sqrt(static_cast<double>(dims.key_dim));

  Var q = contract("bmnd,hdk->bhmnk", x.data, w.wq);
  Var k = contract("bmnd,dk->bmnk", y.data, w.wk);
  Var v = contract("bmnd,dv->bmnv", y.data, w.wv);

  Var o;
  if (mode == AttentionMode::multi_axis) {
    if (dims.heads % 2 != 0) {
      throw std::invalid_argument("multi_axis_attention: head count must be even");
    }
    const int64_t half = dims.heads / 2;
    Var q1 = narrow(q, 1, 0, half);
    Var q2 = narrow(q, 1, half, half);
    Var o1 = attention_path(q1, k, v, rs, /*dilated=*/true);
    Var o2 = attention_path(q2, k, v, rs, /*dilated=*/false);
    o = concat2(o1, o2, 1);
  } else if (mode == AttentionMode::regional_only) {
    o = attention_path(q, k, v, rs, /*dilated=*/false);
  } else if (mode == AttentionMode::dilated_only) {
    o = attention_path(q, k, v, rs, /*dilated=*/true);
  } else {
    throw std::invalid_argument("multi_axis_attention: unsupported mode " +
                                std::string(attention_mode_name(mode)));
  }

  BlockedVar out = x;
  out.data = contract("bhmnv,hdv->bmnd", o, w.wo);
  return out;
}

Var full_attention_oracle(Var x, const AttentionWeightVars& w) {
  AttentionDims dims = attention_dims(w);
  const Shape& s = x.value().shape();
  if (s.size() != 3 || s[2] != dims.model_dim) {
    throw std::invalid_argument("full_attention: expected [b,N,d] with d = model dim");
  }
  Tape& tape = *x.tape;
  const double rs = 1.0 / std::sqrt(static_cast<double>(dims.key_dim));
  Var q = contract("bnd,hdk->bhnk", x, w.wq);
  Var k = contract("bnd,dk->bnk", x, w.wk);
  Var v = contract("bnd,dv->bnv", x, w.wv);
  Var logits = scale(contract("bhnk,bmk->bhnm", q, k), rs);
  tape.add_logit_entries(logits.size());
  Var scores = softmax(logits, -1);
  Var o = contract("bhnm,bmv->bhnv", scores, v);
  return contract("bhnv,hdv->bnd", o, w.wo);
}

Var axial_attention(Var x, const AttentionWeightVars& w) {
  const Shape& s = x.value().shape();
  if (s.size() != 4) throw std::invalid_argument("axial_attention: expected [b,h,w,d]");
  BlockedVar rows;
  rows.data = x;  // [b, h, w, d] read as [b, m=h, n=w, d]
  rows.patch_size = 1;
  rows.src_h = s[1];
  rows.src_w = s[2];
  rows.aspect_ratio = static_cast<double>(s[2]) / static_cast<double>(s[1]);
  return multi_axis_attention(rows, rows, w, AttentionMode::multi_axis).data;
}

Var cross_attention_mqa(Var x, Var z, Var p_z, const AttentionWeightVars& w) {
  AttentionDims dims = attention_dims(w);
  const Shape& xs = x.value().shape();
  const Shape& zs = z.value().shape();
  if (xs.size() != 3 || xs[2] != dims.model_dim) {
    throw std::invalid_argument("cross_attention: expected query [b,N,d] with d = model dim");
  }
  if (zs.size() != 3 || zs[2] != dims.kv_in_dim) {
    throw std::invalid_argument("cross_attention: expected latent [b,L,c] with c = kv input dim");
  }
  if (p_z.value().shape() != Shape{zs[1], zs[2]}) {
    throw std::invalid_argument("cross_attention: positional encoding must match latent [L,c]");
  }
  Tape& tape = *x.tape;
  const double rs = 1.0 / std::sqrt(static_cast<double>(dims.key_dim));
  Var kv = add(z, broadcast_to(reshape(p_z, Shape{1, zs[1], zs[2]}), zs));
  Var q = contract("bnd,hdk->bhnk", x, w.wq);
  Var k = contract("blc,ck->blk", kv, w.wk);
  Var v = contract("blc,cv->blv", kv, w.wv);
  Var logits = scale(contract("bhnk,blk->bhnl", q, k), rs);
  tape.add_logit_entries(logits.size());
  Var scores = softmax(logits, -1);
  Var o = contract("bhnl,blv->bhnv", scores, v);
  return contract("bhnv,hdv->bnd", o, w.wo);
}

Var attention_block(Var x, const std::function<Var(Var)>& inner, NormKind kind, NormMode mode,
                    const NormVars& attn_norm, const MlpVars* mlp, const NormVars* mlp_norm) {
  Var normed = normalize(x, kind, attn_norm.gamma, attn_norm.beta, attn_norm.state, mode);
  Var attended = inner(normed);
  if (!attended.value().same_shape(x.value())) {
    throw std::invalid_argument("attention_block: inner op must preserve shape");
  }
  Var y = add(x, attended);
  if (mlp == nullptr) return y;
  Var normed2 = normalize(y, kind, mlp_norm->gamma, mlp_norm->beta, mlp_norm->state, mode);
  return add(y, mlp_forward(normed2, mlp->w1, mlp->b1, mlp->w2, mlp->b2));
}

Var residual_mlp_block(Var x, NormKind kind, NormMode mode, const NormVars& norm,
                       const MlpVars& mlp) {
  Var normed = normalize(x, kind, norm.gamma, norm.beta, norm.state, mode);
  return add(x, mlp_forward(normed, mlp.w1, mlp.b1, mlp.w2, mlp.b2));
}

int64_t balance_patch_size(int64_t h, int64_t w) {
  if (h <= 0 || w <= 0) throw std::invalid_argument("balance_patch_size: non-positive extent");
  int64_t best_p = 1;
  int64_t best_score = -1;
  for (int64_t p = 1; p <= std::min(h, w); ++p) {
    if (h % p != 0 || w % p != 0) continue;
    int64_t score = std::abs(p * p - (h * w) / (p * p));
    if (best_score < 0 || score < best_score) {
      best_score = score;
      best_p = p;
    }
  }
  return best_p;
}

int64_t flop_count(AttentionMode mode, int64_t b, int64_t m, int64_t n, int64_t d, int64_t h,
                   int64_t k, int64_t v) {
  (void)d;
  (void)k;
  (void)v;
  if (b <= 0 || m <= 0 || n <= 0 || h <= 0) {
    throw std::invalid_argument("flop_count: non-positive dimensions");
  }
  switch (mode) {
    case AttentionMode::full: {
      const int64_t N = m * n;
      return b * h * N * N;
    }
    case AttentionMode::multi_axis:
    case AttentionMode::axial:
      if (h % 2 != 0) throw std::invalid_argument("flop_count: multi-axis head count must be even");
      return b * (h / 2) * (n * m * m + m * n * n);
    case AttentionMode::regional_only: return b * h * m * n * n;
    case AttentionMode::dilated_only: return b * h * n * m * m;
    case AttentionMode::interleaved:
      throw std::invalid_argument("flop_count: interleaved is a stage-level schedule, count its "
                                  "regional/dilated layers separately");
  }
  throw std::logic_error("flop_count: unhandled mode");
}

}  // namespace hit
