#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hit/attention.hpp"
#include "hit/gradcheck.hpp"
#include "hit/rng.hpp"
#include "hit/oracles.hpp"

using namespace hit;

namespace {

AttentionWeights random_weights(Rng& rng, int64_t h, int64_t d, int64_t k, int64_t v,
                                int64_t kv_in = -1) {
  if (kv_in < 0) kv_in = d;
  AttentionWeights w;
  w.wq = rng.normal_tensor({h, d, k}, 0.5);
  w.wk = rng.normal_tensor({kv_in, k}, 0.5);
  w.wv = rng.normal_tensor({kv_in, v}, 0.5);
  w.wo = rng.normal_tensor({h, d, v}, 0.5);
  return w;
}

AttentionWeightVars mount(Tape& tape, const AttentionWeights& w) {
  return {tape.param(w.wq), tape.param(w.wk), tape.param(w.wv), tape.param(w.wo)};
}

BlockedVar as_blocked(Tape& tape, const Tensor& x_bmnd) {
  BlockedVar b;
  b.data = tape.param(x_bmnd);
  b.patch_size = 1;  // synthetic layout; the kernel only uses the data axes
  b.src_h = x_bmnd.extent(1);
  b.src_w = x_bmnd.extent(2);
  b.aspect_ratio = 1.0;
  return b;
}

}  // namespace

TEST_CASE("multi_axis matches the masked full-attention oracle on random instances") {
  Rng rng(101);
  for (int trial = 0; trial < 60; ++trial) {
    int64_t m = rng.uniform_int(1, 8);
    int64_t n = rng.uniform_int(1, 16);
    int64_t h = rng.uniform_int(0, 1) == 0 ? 2 : 4;
    int64_t d = rng.uniform_int(2, 8);
    int64_t k = rng.uniform_int(2, 6);
    int64_t v = rng.uniform_int(2, 6);
    Tensor x = rng.normal_tensor({2, m, n, d});
    AttentionWeights w = random_weights(rng, h, d, k, v);

    Tape tape;
    Tensor got = multi_axis_attention(as_blocked(tape, x), as_blocked(tape, x), mount(tape, w))
                     .data.value();
    Tensor want = oracle::masked_full_attention(x, w);
    CHECK(max_abs_diff(got, want) < 1e-12);
  }
}

TEST_CASE("regional_only / dilated_only match their masked oracles") {
  Rng rng(102);
  Tensor x = rng.normal_tensor({1, 3, 5, 4});
  AttentionWeights w = random_weights(rng, 3, 4, 4, 4);  // odd head count is fine here
  Tape tape;
  Tensor reg = multi_axis_attention(as_blocked(tape, x), as_blocked(tape, x), mount(tape, w),
                                    AttentionMode::regional_only)
                   .data.value();
  CHECK(max_abs_diff(reg, oracle::masked_full_attention(x, w, AttentionMode::regional_only)) <
        1e-12);
  Tensor dil = multi_axis_attention(as_blocked(tape, x), as_blocked(tape, x), mount(tape, w),
                                    AttentionMode::dilated_only)
                   .data.value();
  CHECK(max_abs_diff(dil, oracle::masked_full_attention(x, w, AttentionMode::dilated_only)) <
        1e-12);
}

TEST_CASE("m=1: regional heads equal full attention; dilated heads pass values through") {
  Rng rng(103);
  const int64_t n = 6, d = 4, h = 4, k = 3, v = 3;
  Tensor x = rng.normal_tensor({1, 1, n, d});
  AttentionWeights w = random_weights(rng, h, d, k, v);

  // isolate the regional half: zero the dilated heads' output projection
  AttentionWeights w_reg = w;
  for (int64_t i = 0; i < (h / 2) * d * v; ++i) w_reg.wo[i] = 0.0;
  Tape tape;
  Tensor got = multi_axis_attention(as_blocked(tape, x), as_blocked(tape, x), mount(tape, w_reg))
                   .data.value();

  // oracle: full attention over the n positions using the regional head half
  AttentionWeights w_full;
  w_full.wq = Tensor(Shape{h / 2, d, k});
  w_full.wo = Tensor(Shape{h / 2, d, v});
  for (int64_t i = 0; i < (h / 2) * d * k; ++i) w_full.wq[i] = w.wq[(h / 2) * d * k + i];
  for (int64_t i = 0; i < (h / 2) * d * v; ++i) w_full.wo[i] = w.wo[(h / 2) * d * v + i];
  w_full.wk = w.wk;
  w_full.wv = w.wv;
  Tensor want = oracle::full_attention_loops(x.reshaped({1, n, d}), w_full);
  CHECK(max_abs_diff(got, want.reshaped({1, 1, n, d})) < 1e-12);

  // isolate the dilated half: singleton softmax means each position's own
  // projected value goes through the output projection
  AttentionWeights w_dil = w;
  for (int64_t i = (h / 2) * d * v; i < h * d * v; ++i) w_dil.wo[i] = 0.0;
  Tensor got_dil =
      multi_axis_attention(as_blocked(tape, x), as_blocked(tape, x), mount(tape, w_dil))
          .data.value();
  Tensor want_dil(Shape{1, 1, n, d});
  for (int64_t pos = 0; pos < n; ++pos) {
    for (int64_t dd = 0; dd < d; ++dd) {
      double acc = 0.0;
      for (int64_t hh = 0; hh < h / 2; ++hh) {
        for (int64_t vv = 0; vv < v; ++vv) {
          double val = 0.0;
          for (int64_t c = 0; c < d; ++c) val += x[pos * d + c] * w.wv[c * v + vv];
          acc += val * w.wo[(hh * d + dd) * v + vv];
        }
      }
      want_dil[pos * d + dd] = acc;
    }
  }
  CHECK(max_abs_diff(got_dil, want_dil) < 1e-12);
}

TEST_CASE("n=1: dilated heads equal full attention across patches") {
  Rng rng(104);
  const int64_t m = 7, d = 4, h = 2, k = 3, v = 3;
  Tensor x = rng.normal_tensor({1, m, 1, d});
  AttentionWeights w = random_weights(rng, h, d, k, v);

  AttentionWeights w_dil = w;
  for (int64_t i = (h / 2) * d * v; i < h * d * v; ++i) w_dil.wo[i] = 0.0;  // keep dilated half
  Tape tape;
  Tensor got = multi_axis_attention(as_blocked(tape, x), as_blocked(tape, x), mount(tape, w_dil))
                   .data.value();

  AttentionWeights w_full;
  w_full.wq = Tensor(Shape{h / 2, d, k});
  w_full.wo = Tensor(Shape{h / 2, d, v});
  for (int64_t i = 0; i < (h / 2) * d * k; ++i) w_full.wq[i] = w.wq[i];
  for (int64_t i = 0; i < (h / 2) * d * v; ++i) w_full.wo[i] = w.wo[i];
  w_full.wk = w.wk;
  w_full.wv = w.wv;
  Tensor want = oracle::full_attention_loops(x.reshaped({1, m, d}), w_full);
  CHECK(max_abs_diff(got, want.reshaped({1, m, 1, d})) < 1e-12);
}

TEST_CASE("full_attention_oracle: N=1, permutation symmetry, loop-oracle agreement") {
  Rng rng(105);
  const int64_t d = 5, h = 2, k = 3, v = 4;
  AttentionWeights w = random_weights(rng, h, d, k, v);

  // N=1: output is the value of the single position through the projections
  Tensor x1 = rng.normal_tensor({1, 1, d});
  Tape tape;
  Tensor got1 = full_attention_oracle(tape.param(x1), mount(tape, w)).value();
  Tensor want1(Shape{1, 1, d});
  for (int64_t dd = 0; dd < d; ++dd) {
    double acc = 0.0;
    for (int64_t hh = 0; hh < h; ++hh) {
      for (int64_t vv = 0; vv < v; ++vv) {
        double val = 0.0;
        for (int64_t c = 0; c < d; ++c) val += x1[c] * w.wv[c * v + vv];
        acc += val * w.wo[(hh * d + dd) * v + vv];
      }
    }
    want1[dd] = acc;
  }
  CHECK(max_abs_diff(got1, want1) < 1e-12);

  // two identical positions produce identical outputs
  Tensor x2(Shape{1, 2, d});
  for (int64_t c = 0; c < d; ++c) {
    x2[c] = x1[c];
    x2[d + c] = x1[c];
  }
  Tensor got2 = full_attention_oracle(tape.param(x2), mount(tape, w)).value();
  for (int64_t c = 0; c < d; ++c) CHECK(got2[c] == got2[d + c]);

  // random instance against the plain-loop oracle
  Tensor x3 = rng.normal_tensor({2, 16, d});
  Tensor got3 = full_attention_oracle(tape.param(x3), mount(tape, w)).value();
  CHECK(max_abs_diff(got3, oracle::full_attention_loops(x3, w)) < 1e-12);
}

TEST_CASE("m=1 regional heads correspond to full attention at N=16") {
  Rng rng(106);
  const int64_t n = 16, d = 6, h = 2, k = 4, v = 4;
  Tensor x = rng.normal_tensor({1, 1, n, d});
  AttentionWeights w = random_weights(rng, h, d, k, v);
  AttentionWeights w_reg = w;
  for (int64_t i = 0; i < (h / 2) * d * v; ++i) w_reg.wo[i] = 0.0;

  Tape tape;
  Tensor got = multi_axis_attention(as_blocked(tape, x), as_blocked(tape, x), mount(tape, w_reg))
                   .data.value();
  AttentionWeights w_half;
  w_half.wq = Tensor(Shape{1, d, k});
  w_half.wo = Tensor(Shape{1, d, v});
  for (int64_t i = 0; i < d * k; ++i) w_half.wq[i] = w.wq[d * k + i];
  for (int64_t i = 0; i < d * v; ++i) w_half.wo[i] = w.wo[d * v + i];
  w_half.wk = w.wk;
  w_half.wv = w.wv;
  Tape tape2;
  Tensor want = full_attention_oracle(tape2.param(x.reshaped({1, n, d})), mount(tape2, w_half))
                    .value();
  CHECK(max_abs_diff(got, want.reshaped({1, 1, n, d})) < 1e-12);
}

TEST_CASE("axial attention: 1xW grid equals full attention for the row half") {
  Rng rng(107);
  const int64_t W = 6, d = 4, h = 2, k = 3, v = 3;
  Tensor x = rng.normal_tensor({1, 1, W, d});
  AttentionWeights w = random_weights(rng, h, d, k, v);
  // single row: the regional (second) half sees the whole sequence; isolate it
  AttentionWeights w_row = w;
  for (int64_t i = 0; i < (h / 2) * d * v; ++i) w_row.wo[i] = 0.0;
  Tape tape;
  Tensor got = axial_attention(tape.param(x), mount(tape, w_row)).value();
  AttentionWeights w_half;
  w_half.wq = Tensor(Shape{1, d, k});
  w_half.wo = Tensor(Shape{1, d, v});
  for (int64_t i = 0; i < d * k; ++i) w_half.wq[i] = w.wq[d * k + i];
  for (int64_t i = 0; i < d * v; ++i) w_half.wo[i] = w.wo[d * v + i];
  w_half.wk = w.wk;
  w_half.wv = w.wv;
  Tape tape2;
  Tensor want =
      full_attention_oracle(tape2.param(x.reshaped({1, W, d})), mount(tape2, w_half)).value();
  CHECK(max_abs_diff(got, want.reshaped({1, 1, W, d})) < 1e-12);
}

TEST_CASE("axial attention: constant input yields constant output; masked-oracle match") {
  Rng rng(108);
  const int64_t H = 4, W = 4, d = 4, h = 4;
  AttentionWeights w = random_weights(rng, h, d, 3, 3);

  Tensor c = Tensor::full({1, H, W, d}, 0.75);
  Tape tape;
  Tensor got_c = axial_attention(tape.param(c), mount(tape, w)).value();
  for (int64_t i = 1; i < got_c.size() / d; ++i) {
    for (int64_t dd = 0; dd < d; ++dd) {
      CHECK(got_c[i * d + dd] == doctest::Approx(got_c[dd]).epsilon(1e-12));
    }
  }

  Tensor x = rng.normal_tensor({1, H, W, d});
  Tensor got = axial_attention(tape.param(x), mount(tape, w)).value();
  // rows as patch axis: dilated = same column, regional = same row
  Tensor want = oracle::masked_full_attention(x.reshaped({1, H, W, d}), w);
  CHECK(max_abs_diff(got, want) < 1e-12);
  CHECK_THROWS_AS(axial_attention(tape.param(x), mount(tape, random_weights(rng, 3, d, 3, 3))),
                  std::invalid_argument);
}

TEST_CASE("cross attention: constant keys give uniform weights and the mean value") {
  Rng rng(109);
  const int64_t N = 5, d = 4, h = 2, k = 3, v = 3, L = 8, cz = 6;
  AttentionWeights w = random_weights(rng, h, d, k, v, cz);
  Tensor x = rng.normal_tensor({1, N, d});
  // z + p_z constant across latent positions
  Tensor z = Tensor::full({1, L, cz}, 0.3);
  Tensor pz = Tensor::full({L, cz}, -0.1);

  Tape tape;
  Tensor got = cross_attention_mqa(tape.param(x), tape.param(z), tape.param(pz), mount(tape, w))
                   .value();

  // value aggregation equals the (single) value vector of the constant kv
  Tensor want(Shape{1, N, d});
  std::vector<double> val(static_cast<size_t>(v), 0.0);
  for (int64_t vv = 0; vv < v; ++vv) {
    for (int64_t c = 0; c < cz; ++c) val[static_cast<size_t>(vv)] += 0.2 * w.wv[c * v + vv];
  }
  for (int64_t p = 0; p < N; ++p) {
    for (int64_t dd = 0; dd < d; ++dd) {
      double acc = 0.0;
      for (int64_t hh = 0; hh < h; ++hh) {
        for (int64_t vv = 0; vv < v; ++vv) {
          acc += val[static_cast<size_t>(vv)] * w.wo[(hh * d + dd) * v + vv];
        }
      }
      want[p * d + dd] = acc;
    }
  }
  CHECK(max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("cross attention: single latent position broadcasts its value") {
  Rng rng(110);
  const int64_t N = 4, d = 4, h = 2, k = 3, v = 3, cz = 5;
  AttentionWeights w = random_weights(rng, h, d, k, v, cz);
  Tensor x = rng.normal_tensor({1, N, d});
  Tensor z = rng.normal_tensor({1, 1, cz});
  Tensor pz = rng.normal_tensor({1, cz});

  Tape tape;
  Tensor got = cross_attention_mqa(tape.param(x), tape.param(z), tape.param(pz), mount(tape, w))
                   .value();
  Tensor want(Shape{1, N, d});
  for (int64_t p = 0; p < N; ++p) {
    for (int64_t dd = 0; dd < d; ++dd) {
      double acc = 0.0;
      for (int64_t hh = 0; hh < h; ++hh) {
        for (int64_t vv = 0; vv < v; ++vv) {
          double val = 0.0;
          for (int64_t c = 0; c < cz; ++c) val += (z[c] + pz[c]) * w.wv[c * v + vv];
          acc += val * w.wo[(hh * d + dd) * v + vv];
        }
      }
      want[p * d + dd] = acc;
    }
  }
  CHECK(max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("cross attention: random instance matches brute-force loops") {
  Rng rng(111);
  const int64_t B = 2, N = 6, d = 4, h = 2, k = 3, v = 5, L = 7, cz = 6;
  AttentionWeights w = random_weights(rng, h, d, k, v, cz);
  Tensor x = rng.normal_tensor({B, N, d});
  Tensor z = rng.normal_tensor({B, L, cz});
  Tensor pz = rng.normal_tensor({L, cz});

  Tape tape;
  Tensor got = cross_attention_mqa(tape.param(x), tape.param(z), tape.param(pz), mount(tape, w))
                   .value();

  const double rs = 1.0 / std::sqrt(static_cast<double>(k));
  Tensor want(Shape{B, N, d});
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t hh = 0; hh < h; ++hh) {
      for (int64_t i = 0; i < N; ++i) {
        std::vector<double> q(static_cast<size_t>(k), 0.0);
        for (int64_t kk = 0; kk < k; ++kk) {
          for (int64_t dd = 0; dd < d; ++dd) {
            q[static_cast<size_t>(kk)] += x[(b * N + i) * d + dd] * w.wq[(hh * d + dd) * k + kk];
          }
        }
        std::vector<double> logits(static_cast<size_t>(L), 0.0);
        for (int64_t l = 0; l < L; ++l) {
          double dot = 0.0;
          for (int64_t kk = 0; kk < k; ++kk) {
            double key = 0.0;
            for (int64_t c = 0; c < cz; ++c) {
              key += (z[(b * L + l) * cz + c] + pz[l * cz + c]) * w.wk[c * k + kk];
            }
            dot += q[static_cast<size_t>(kk)] * key;
          }
          logits[static_cast<size_t>(l)] = dot * rs;
        }
        std::vector<double> scores = oracle::softmax_vector_ld(logits);
        for (int64_t dd = 0; dd < d; ++dd) {
          double acc = 0.0;
          for (int64_t vv = 0; vv < v; ++vv) {
            double agg = 0.0;
            for (int64_t l = 0; l < L; ++l) {
              double val = 0.0;
              for (int64_t c = 0; c < cz; ++c) {
                val += (z[(b * L + l) * cz + c] + pz[l * cz + c]) * w.wv[c * v + vv];
              }
              agg += scores[static_cast<size_t>(l)] * val;
            }
            acc += agg * w.wo[(hh * d + dd) * v + vv];
          }
          want[(b * N + i) * d + dd] += acc;
        }
      }
    }
  }
  CHECK(max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("MQA equals MHA with tied key/value projections, bit-exact") {
  Rng rng(112);
  const int64_t m = 3, n = 4, d = 4, h = 4, k = 3, v = 3;
  Tensor x = rng.normal_tensor({2, m, n, d});
  AttentionWeights w = random_weights(rng, h, d, k, v);

  Tape tape;
  Tensor mqa = multi_axis_attention(as_blocked(tape, x), as_blocked(tape, x), mount(tape, w))
                   .data.value();

  // MHA with every head's K/V tied to the shared matrices
  Tensor wk_h(Shape{h, d, k}), wv_h(Shape{h, d, v});
  for (int64_t hh = 0; hh < h; ++hh) {
    for (int64_t i = 0; i < d * k; ++i) wk_h[hh * d * k + i] = w.wk[i];
    for (int64_t i = 0; i < d * v; ++i) wv_h[hh * d * v + i] = w.wv[i];
  }
  Var xv = tape.param(x);
  Var q = contract("bmnd,hdk->bhmnk", xv, tape.param(w.wq));
  Var kh = contract("bmnd,hdk->bhmnk", xv, tape.param(wk_h));
  Var vh = contract("bmnd,hdv->bhmnv", xv, tape.param(wv_h));
  const double rs = 1.0 / std::sqrt(static_cast<double>(k));
  const int64_t half = h / 2;
  Var q1 = narrow(q, 1, 0, half), q2 = narrow(q, 1, half, half);
  Var k1 = narrow(kh, 1, 0, half), k2 = narrow(kh, 1, half, half);
  Var v1 = narrow(vh, 1, 0, half), v2 = narrow(vh, 1, half, half);
  Var s1 = softmax(scale(contract("bhxyk,bhzyk->bhyxz", q1, k1), rs), -1);
  Var o1 = contract("bhyxz,bhzyv->bhxyv", s1, v1);
  Var s2 = softmax(scale(contract("bhxyk,bhxzk->bhxyz", q2, k2), rs), -1);
  Var o2 = contract("bhxyz,bhxzv->bhxyv", s2, v2);
  Var o = concat2(o1, o2, 1);
  Tensor mha = contract("bhmnv,hdv->bmnd", o, tape.param(w.wo)).value();

  CHECK(mha.bit_equal(mqa));
}

TEST_CASE("permutation equivariance along patch and within-patch axes") {
  Rng rng(113);
  const int64_t m = 4, n = 3, d = 4, h = 2;
  Tensor x = rng.normal_tensor({1, m, n, d});
  AttentionWeights w = random_weights(rng, h, d, 3, 3);

  auto run = [&](const Tensor& in) {
    Tape tape;
    return multi_axis_attention(as_blocked(tape, in), as_blocked(tape, in), mount(tape, w))
        .data.value();
  };
  Tensor base = run(x);

  // rotate the patch axis by one
  Tensor xp(Shape{1, m, n, d});
  for (int64_t i = 0; i < m; ++i) {
    int64_t src = (i + 1) % m;
    for (int64_t j = 0; j < n * d; ++j) xp[i * n * d + j] = x[src * n * d + j];
  }
  Tensor perm = run(xp);
  for (int64_t i = 0; i < m; ++i) {
    int64_t src = (i + 1) % m;
    for (int64_t j = 0; j < n * d; ++j) {
      CHECK(std::abs(perm[i * n * d + j] - base[src * n * d + j]) < 1e-12);
    }
  }

  // rotate the within-patch axis by one
  Tensor xn(Shape{1, m, n, d});
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      int64_t src = (j + 1) % n;
      for (int64_t c = 0; c < d; ++c) xn[(i * n + j) * d + c] = x[(i * n + src) * d + c];
    }
  }
  Tensor permn = run(xn);
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      int64_t src = (j + 1) % n;
      for (int64_t c = 0; c < d; ++c) {
        CHECK(std::abs(permn[(i * n + j) * d + c] - base[(i * n + src) * d + c]) < 1e-12);
      }
    }
  }
}

TEST_CASE("attention_block: zero weights reduce to the residual; zero input stays zero") {
  Rng rng(114);
  const int64_t N = 6, d = 4;
  Tensor x = rng.normal_tensor({1, N, d});

  Tape tape;
  NormVars norm1{tape.param(Tensor::full({d}, 1.0)), tape.param(Tensor(Shape{d})), nullptr};
  NormVars norm2{tape.param(Tensor::full({d}, 1.0)), tape.param(Tensor(Shape{d})), nullptr};
  MlpVars mlp{tape.param(Tensor(Shape{d, 2 * d})), tape.param(Tensor(Shape{2 * d})),
              tape.param(Tensor(Shape{2 * d, d})), tape.param(Tensor(Shape{d}))};
  auto zero_inner = [&](Var xn) { return scale(xn, 0.0); };
  Tensor out = attention_block(tape.param(x), zero_inner, NormKind::layer, NormMode::train,
                               norm1, &mlp, &norm2)
                   .value();
  CHECK(out.bit_equal(x));

  Tensor zeros(Shape{1, N, d});
  Tensor out0 = attention_block(tape.param(zeros), zero_inner, NormKind::layer, NormMode::train,
                                norm1, &mlp, &norm2)
                    .value();
  CHECK(max_abs(out0) == 0.0);
}

TEST_CASE("gradcheck: multi-axis attention, full attention, axial") {
  Rng rng(115);
  const int64_t m = 2, n = 4, d = 4, h = 2, k = 3, v = 3;
  Tensor x = rng.normal_tensor({1, m, n, d});
  AttentionWeights w = random_weights(rng, h, d, k, v);

  auto probe_loss = [](Tape& tape, Var y) {
    Tensor c(y.value().shape());
    for (int64_t i = 0; i < c.size(); ++i) c[i] = 1.0 + 0.25 * static_cast<double>((i * 13) % 8);
    return add(sum_all(mul(y, tape.constant(c))), scale(sum_all(mul(y, y)), 0.5));
  };

  auto fd_attention = [&](auto builder) {
    std::vector<Tensor> params = {x, w.wq, w.wk, w.wv, w.wo};
    auto eval = [&](std::span<const Tensor> ps) {
      Tape tape;
      std::vector<Var> vars;
      for (const Tensor& p : ps) vars.push_back(tape.param(p));
      return probe_loss(tape, builder(tape, vars)).value()[0];
    };
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& p : params) vars.push_back(tape.param(p));
    Var loss = probe_loss(tape, builder(tape, vars));
    std::vector<Tensor> grads = backward(loss, vars);
    return finite_diff_check(eval, params, grads, {}, 1e-5).max_rel_err;
  };

  CHECK(fd_attention([&](Tape&, std::vector<Var>& ps) {
          BlockedVar bx;
          bx.data = ps[0];
          bx.patch_size = 1;
          bx.src_h = m;
          bx.src_w = n;
          AttentionWeightVars wv{ps[1], ps[2], ps[3], ps[4]};
          return multi_axis_attention(bx, bx, wv).data;
        }) < 1e-6);

  CHECK(fd_attention([&](Tape&, std::vector<Var>& ps) {
          AttentionWeightVars wv{ps[1], ps[2], ps[3], ps[4]};
          return full_attention_oracle(reshape(ps[0], {1, m * n, d}), wv);
        }) < 1e-6);

  CHECK(fd_attention([&](Tape&, std::vector<Var>& ps) {
          AttentionWeightVars wv{ps[1], ps[2], ps[3], ps[4]};
          return axial_attention(ps[0], wv);  // [1, m, n, d] grid
        }) < 1e-6);
}

TEST_CASE("gradcheck: attention_block composite") {
  Rng rng(116);
  const int64_t N = 4, d = 4, h = 2;
  Tensor x = rng.normal_tensor({1, N, d});
  AttentionWeights w = random_weights(rng, h, d, 3, 3);
  Tensor g1 = Tensor::full({d}, 1.0), b1(Shape{d});
  Tensor g2 = Tensor::full({d}, 1.0), b2(Shape{d});
  Tensor w1 = rng.normal_tensor({d, 2 * d}, 0.4), bb1 = rng.normal_tensor({2 * d}, 0.2);
  Tensor w2 = rng.normal_tensor({2 * d, d}, 0.4), bb2 = rng.normal_tensor({d}, 0.2);

  std::vector<Tensor> params = {x, w.wq, w.wk, w.wv, w.wo, g1, b1, g2, b2, w1, bb1, w2, bb2};
  auto build = [&](Tape&, std::vector<Var>& ps) {
    AttentionWeightVars wv{ps[1], ps[2], ps[3], ps[4]};
    NormVars n1{ps[5], ps[6], nullptr};
    NormVars n2{ps[7], ps[8], nullptr};
    MlpVars mlp{ps[9], ps[10], ps[11], ps[12]};
    auto inner = [&](Var xn) { return full_attention_oracle(xn, wv); };
    return attention_block(ps[0], inner, NormKind::layer, NormMode::train, n1, &mlp, &n2);
  };
  auto probe_loss = [](Tape& tape, Var y) {
    Tensor c(y.value().shape());
    for (int64_t i = 0; i < c.size(); ++i) c[i] = 1.0 + 0.25 * static_cast<double>((i * 13) % 8);
    return add(sum_all(mul(y, tape.constant(c))), scale(sum_all(mul(y, y)), 0.5));
  };
  auto eval = [&](std::span<const Tensor> ps) {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& p : ps) vars.push_back(tape.param(p));
    return probe_loss(tape, build(tape, vars)).value()[0];
  };
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& p : params) vars.push_back(tape.param(p));
  Var loss = probe_loss(tape, build(tape, vars));
  std::vector<Tensor> grads = backward(loss, vars);
  CHECK(finite_diff_check(eval, params, grads, {}, 1e-5).max_rel_err < 1e-6);
}

TEST_CASE("balance_patch_size") {
  CHECK(balance_patch_size(64, 64) == 8);
  CHECK(balance_patch_size(8, 8) == 2);    // tie between 2 and 4 goes small
  CHECK(balance_patch_size(16, 16) == 4);  // exact balance
  CHECK(balance_patch_size(4, 8) == 2);
  CHECK(balance_patch_size(1, 1) == 1);
}

TEST_CASE("flop_count formulas and instrumented kernels agree") {
  // N = 4096 balanced: full/multi ratio is exactly sqrt(N)
  CHECK(flop_count(AttentionMode::full, 1, 64, 64, 8, 2, 8, 8) == 33554432);
  CHECK(flop_count(AttentionMode::multi_axis, 1, 64, 64, 8, 2, 8, 8) == 524288);
  CHECK(flop_count(AttentionMode::full, 1, 64, 64, 8, 2, 8, 8) /
            flop_count(AttentionMode::multi_axis, 1, 64, 64, 8, 2, 8, 8) ==
        64);

  // m=1 degenerates to the regional term
  CHECK(flop_count(AttentionMode::multi_axis, 2, 1, 5, 8, 4, 8, 8) == 2 * 2 * (5 + 25));

  // N=16 exact values, cross-checked against the kernel's logit counter;
  // ratio 512/128 = 4 = sqrt(16), matching the sqrt(N) identity
  CHECK(flop_count(AttentionMode::full, 1, 4, 4, 4, 2, 2, 2) == 512);
  CHECK(flop_count(AttentionMode::multi_axis, 1, 4, 4, 4, 2, 2, 2) == 128);

  Rng rng(117);
  Tensor x = rng.normal_tensor({1, 4, 4, 4});
  AttentionWeights w = random_weights(rng, 2, 4, 2, 2);
  {
    Tape tape;
    BlockedVar bx;
    bx.data = tape.param(x);
    bx.patch_size = 2;
    bx.src_h = 4;
    bx.src_w = 4;
    multi_axis_attention(bx, bx, mount(tape, w));
    CHECK(tape.logit_entries() == 128);
  }
  {
    Tape tape;
    full_attention_oracle(tape.param(x.reshaped({1, 16, 4})), mount(tape, w));
    CHECK(tape.logit_entries() == 512);
  }
  // raw kernels count identically
  int64_t n1 = 0, n2 = 0;
  multi_axis_attention_raw(x, w, AttentionMode::multi_axis, &n1);
  full_attention_raw(x.reshaped({1, 16, 4}), w, &n2);
  CHECK(n1 == 128);
  CHECK(n2 == 512);

  // sqrt(N) identity at balanced sizes
  for (int64_t s : {16, 32, 64}) {
    int64_t N = s * s;
    int64_t full = flop_count(AttentionMode::full, 1, s, s, 8, 2, 8, 8);
    int64_t ma = flop_count(AttentionMode::multi_axis, 1, s, s, 8, 2, 8, 8);
    CHECK(full == N * N * 2);
    CHECK(ma == 2 * (N * s));  // (h/2) * 2 * N * sqrt(N) with h=2
    CHECK(full / ma == s);
    CHECK(full % ma == 0);
  }
  CHECK_THROWS_AS(flop_count(AttentionMode::interleaved, 1, 4, 4, 4, 2, 2, 2),
                  std::invalid_argument);
}

TEST_CASE("raw f64 kernels reproduce the tape kernels bit-exactly") {
  Rng rng(118);
  Tensor x = rng.normal_tensor({2, 3, 4, 4});
  AttentionWeights w = random_weights(rng, 4, 4, 3, 3);
  Tape tape;
  Tensor tape_out =
      multi_axis_attention(as_blocked(tape, x), as_blocked(tape, x), mount(tape, w)).data.value();
  Tensor raw_out = multi_axis_attention_raw(x, w, AttentionMode::multi_axis, nullptr);
  CHECK(tape_out.bit_equal(raw_out));

  Tensor xf = x.reshaped({2, 12, 4});
  Tensor tape_full = full_attention_oracle(tape.param(xf), mount(tape, w)).value();
  Tensor raw_full = full_attention_raw(xf, w, nullptr);
  CHECK(tape_full.bit_equal(raw_full));
}

TEST_CASE("multi_axis rejects odd heads and mismatched shapes") {
  Rng rng(119);
  Tensor x = rng.normal_tensor({1, 2, 2, 4});
  AttentionWeights w3 = random_weights(rng, 3, 4, 2, 2);
  Tape tape;
  CHECK_THROWS_AS(multi_axis_attention(as_blocked(tape, x), as_blocked(tape, x), mount(tape, w3)),
                  std::invalid_argument);
  AttentionWeights w2 = random_weights(rng, 2, 4, 2, 2);
  Tensor y = rng.normal_tensor({1, 2, 4, 4});
  CHECK_THROWS_AS(multi_axis_attention(as_blocked(tape, x), as_blocked(tape, y), mount(tape, w2)),
                  std::invalid_argument);
}
