#pragma once

// Reference oracles used by the verification suite and the tests:
// deliberately independent of the stride-based kernels they check, written as
// plain nested loops over multi-indices.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "hit/attention.hpp"
#include "hit/tensor.hpp"

namespace oracle {

// Exhaustive-loop einsum for two operands: iterate every assignment of every
// label and accumulate products into the output slot.
inline hit::Tensor einsum_loops(const std::string& sa, const hit::Tensor& a, const std::string& sb,
                                const hit::Tensor& b, const std::string& so) {
  std::map<char, int64_t> ext;
  for (size_t i = 0; i < sa.size(); ++i) ext[sa[i]] = a.shape()[i];
  for (size_t i = 0; i < sb.size(); ++i) ext[sb[i]] = b.shape()[i];

  std::string labels;
  for (auto& [c, e] : ext) labels.push_back(c);

  hit::Shape out_shape;
  for (char c : so) out_shape.push_back(ext.at(c));
  hit::Tensor out(out_shape);

  std::map<char, int64_t> idx;
  for (char c : labels) idx[c] = 0;

  auto flat = [&](const std::string& s) {
    int64_t f = 0;
    for (char c : s) f = f * ext.at(c) + idx.at(c);
    return f;
  };

  for (;;) {
    out[flat(so)] += a[flat(sa)] * b[flat(sb)];
    int i = static_cast<int>(labels.size()) - 1;
    for (; i >= 0; --i) {
      char c = labels[static_cast<size_t>(i)];
      if (++idx[c] < ext[c]) break;
      idx[c] = 0;
    }
    if (i < 0) break;
  }
  return out;
}

// Direct exp/sum softmax of a vector, extended intermediate via long double.
inline std::vector<double> softmax_vector_ld(const std::vector<double>& x) {
  long double m = x[0];
  for (double v : x) m = std::max<long double>(m, v);
  long double denom = 0.0L;
  std::vector<long double> e(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    e[i] = std::exp(static_cast<long double>(x[i]) - m);
    denom += e[i];
  }
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = static_cast<double>(e[i] / denom);
  return out;
}

// Masked full attention over the flattened positions of a blocked [b,m,n,d]
// tensor. In multi_axis mode the head half decides the mask: heads [0, h/2)
// attend where the within-patch index matches (dilated), heads [h/2, h)
// where the patch index matches (regional); regional_only / dilated_only
// apply one mask to every head. Plain loops throughout; multi-query
// projections.
inline hit::Tensor masked_full_attention(
    const hit::Tensor& x_bmnd, const hit::AttentionWeights& w,
    hit::AttentionMode mode = hit::AttentionMode::multi_axis) {
  const int64_t B = x_bmnd.extent(0), M = x_bmnd.extent(1), N = x_bmnd.extent(2),
                D = x_bmnd.extent(3);
  const int64_t H = w.wq.extent(0), K = w.wq.extent(2), V = w.wv.extent(1);
  const int64_t P = M * N;  // flattened positions, row-major (patch, within)
  const double rs = 1.0 / std::sqrt(static_cast<double>(K));

  auto xat = [&](int64_t b, int64_t p, int64_t d) { return x_bmnd[((b * M + p / N) * N + p % N) * D + d]; };

  hit::Tensor out(hit::Shape{B, M, N, D});
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t h = 0; h < H; ++h) {
      const bool dilated = mode == hit::AttentionMode::multi_axis
                               ? h < H / 2
                               : mode == hit::AttentionMode::dilated_only;
      for (int64_t i = 0; i < P; ++i) {
        // query projection for position i, head h
        std::vector<double> q(static_cast<size_t>(K), 0.0);
        for (int64_t k = 0; k < K; ++k) {
          for (int64_t d = 0; d < D; ++d) q[static_cast<size_t>(k)] += xat(b, i, d) * w.wq[(h * D + d) * K + k];
        }
        // admissible key positions
        std::vector<int64_t> region;
        for (int64_t j = 0; j < P; ++j) {
          const bool same_within = (i % N) == (j % N);
          const bool same_patch = (i / N) == (j / N);
          if ((dilated && same_within) || (!dilated && same_patch)) region.push_back(j);
        }
        std::vector<double> logits;
        logits.reserve(region.size());
        for (int64_t j : region) {
          double dot = 0.0;
          for (int64_t k = 0; k < K; ++k) {
            double kj = 0.0;
            for (int64_t d = 0; d < D; ++d) kj += xat(b, j, d) * w.wk[d * K + k];
            dot += q[static_cast<size_t>(k)] * kj;
          }
          logits.push_back(dot * rs);
        }
        std::vector<double> scores = softmax_vector_ld(logits);
        // value aggregation then output projection for this head
        std::vector<double> agg(static_cast<size_t>(V), 0.0);
        for (size_t r = 0; r < region.size(); ++r) {
          for (int64_t v = 0; v < V; ++v) {
            double vj = 0.0;
            for (int64_t d = 0; d < D; ++d) vj += xat(b, region[r], d) * w.wv[d * V + v];
            agg[static_cast<size_t>(v)] += scores[r] * vj;
          }
        }
        for (int64_t d = 0; d < D; ++d) {
          double acc = 0.0;
          for (int64_t v = 0; v < V; ++v) acc += agg[static_cast<size_t>(v)] * w.wo[(h * D + d) * V + v];
          out[((b * M + i / N) * N + i % N) * D + d] += acc;
        }
      }
    }
  }
  return out;
}

// Unmasked variant over [b, P, d] (all positions attend everywhere).
inline hit::Tensor full_attention_loops(const hit::Tensor& x_bpd, const hit::AttentionWeights& w) {
  const int64_t B = x_bpd.extent(0), P = x_bpd.extent(1), D = x_bpd.extent(2);
  const int64_t H = w.wq.extent(0), K = w.wq.extent(2), V = w.wv.extent(1);
  const double rs = 1.0 / std::sqrt(static_cast<double>(K));
  hit::Tensor out(hit::Shape{B, P, D});
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t h = 0; h < H; ++h) {
      for (int64_t i = 0; i < P; ++i) {
        std::vector<double> q(static_cast<size_t>(K), 0.0);
        for (int64_t k = 0; k < K; ++k) {
          for (int64_t d = 0; d < D; ++d) {
            q[static_cast<size_t>(k)] += x_bpd[(b * P + i) * D + d] * w.wq[(h * D + d) * K + k];
          }
        }
        std::vector<double> logits(static_cast<size_t>(P), 0.0);
        for (int64_t j = 0; j < P; ++j) {
          double dot = 0.0;
          for (int64_t k = 0; k < K; ++k) {
            double kj = 0.0;
            for (int64_t d = 0; d < D; ++d) kj += x_bpd[(b * P + j) * D + d] * w.wk[d * K + k];
            dot += q[static_cast<size_t>(k)] * kj;
          }
          logits[static_cast<size_t>(j)] = dot * rs;
        }
        std::vector<double> scores = softmax_vector_ld(logits);
        for (int64_t d = 0; d < D; ++d) {
          double acc = 0.0;
          for (int64_t v = 0; v < V; ++v) {
            double agg = 0.0;
            for (int64_t j = 0; j < P; ++j) {
              double vj = 0.0;
              for (int64_t dd = 0; dd < D; ++dd) vj += x_bpd[(b * P + j) * D + dd] * w.wv[dd * V + v];
              agg += scores[static_cast<size_t>(j)] * vj;
            }
            acc += agg * w.wo[(h * D + d) * V + v];
          }
          out[(b * P + i) * D + d] += acc;
        }
      }
    }
  }
  return out;
}

}  // namespace oracle
