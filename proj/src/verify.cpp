#include "hit/verify.hpp"

#include <cmath>
#include <iomanip>

#include "hit/adam.hpp"
#include "hit/blocking.hpp"
#include "hit/gradcheck.hpp"
#include "hit/generator.hpp"
#include "hit/losses.hpp"
#include "hit/oracles.hpp"
#include "hit/rng.hpp"

namespace hit {

namespace {

PropertyResult make_result(const std::string& name, double err, double threshold, int64_t cases) {
  return {name, err, threshold, err <= threshold, cases};
}

AttentionWeights random_attention(Rng& rng, int64_t h, int64_t d, int64_t k, int64_t v,
                                  int64_t kv_in = -1) {
  if (kv_in < 0) kv_in = d;
  AttentionWeights w;
  w.wq = rng.normal_tensor({h, d, k}, 0.5);
  w.wk = rng.normal_tensor({kv_in, k}, 0.5);
  w.wv = rng.normal_tensor({kv_in, v}, 0.5);
  w.wo = rng.normal_tensor({h, d, v}, 0.5);
  return w;
}

AttentionWeightVars mount_attention(Tape& tape, const AttentionWeights& w) {
  return {tape.param(w.wq), tape.param(w.wk), tape.param(w.wv), tape.param(w.wo)};
}

BlockedVar blocked_of(Tape& tape, const Tensor& x_bmnd) {
  BlockedVar b;
  b.data = tape.param(x_bmnd);
  b.patch_size = 1;
  b.src_h = x_bmnd.extent(1);
  b.src_w = x_bmnd.extent(2);
  b.aspect_ratio = 1.0;
  return b;
}

// ---------------------------------------------------------------------------
// roundtrip suite

PropertyResult rt_space_depth(Rng& rng) {
  int64_t mismatches = 0, cases = 0;
  for (int64_t p : {1, 2, 4, 8}) {
    for (int64_t h = p; h <= 32; h += p) {
      for (int64_t w = p; w <= 32; w += p) {
        Tensor x = rng.normal_tensor({1, h, w, 2});
        if (!depth_to_space(space_to_depth(x, p), p).bit_equal(x)) ++mismatches;
        ++cases;
      }
    }
  }
  return make_result("roundtrip/space_depth_identity", static_cast<double>(mismatches), 0.0,
                     cases);
}

PropertyResult rt_block_unblock(Rng& rng) {
  int64_t mismatches = 0, cases = 0;
  for (int64_t p : {1, 2, 4, 8}) {
    for (int64_t h = p; h <= 32; h += p) {
      for (int64_t w = p; w <= 32; w += p) {
        Tensor x = rng.normal_tensor({1, h, w, 2});
        if (!unblock(block(x, p)).bit_equal(x)) ++mismatches;
        ++cases;
      }
    }
  }
  return make_result("roundtrip/block_unblock_identity", static_cast<double>(mismatches), 0.0,
                     cases);
}

PropertyResult rt_pixel_shuffle(Rng& rng) {
  int64_t mismatches = 0, cases = 0;
  for (int64_t h : {1, 2, 3, 5}) {
    for (int64_t w : {1, 2, 4}) {
      Tensor x = rng.normal_tensor({2, h, w, 8});
      if (!space_to_depth(pixel_shuffle(x), 2).bit_equal(x)) ++mismatches;
      ++cases;
    }
  }
  return make_result("roundtrip/pixel_shuffle_inverse", static_cast<double>(mismatches), 0.0,
                     cases);
}

PropertyResult rt_multiset(Rng& rng) {
  int64_t mismatches = 0, cases = 0;
  for (int64_t p : {2, 4}) {
    Tensor x = rng.normal_tensor({2, 8, 8, 3});
    BlockedTensor b = block(x, p);
    std::vector<double> xs(x.data(), x.data() + x.size());
    std::vector<double> ys(b.data.data(), b.data.data() + b.data.size());
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    if (xs != ys) ++mismatches;
    ++cases;
  }
  return make_result("roundtrip/block_value_multiset", static_cast<double>(mismatches), 0.0,
                     cases);
}

PropertyResult rt_tape_replay(Rng& rng) {
  Tape tape;
  Tensor x = rng.normal_tensor({1, 2, 4, 4});
  AttentionWeights w = random_attention(rng, 2, 4, 3, 3);
  BlockedVar bx = blocked_of(tape, x);
  Var out = multi_axis_attention(bx, bx, mount_attention(tape, w)).data;
  Var loss = sum_all(mul(out, out));
  backward(loss, std::vector<Var>{bx.data});
  const int32_t bad = tape.replay_check();
  return make_result("roundtrip/tape_replay", bad == -1 ? 0.0 : 1.0, 0.0, tape.size());
}

PropertyResult rt_build_deterministic(const VerifyOptions& opt) {
  GeneratorConfig cfg = toy_config_32();
  GeneratorParams a = build_generator(cfg, opt.seed);
  GeneratorParams b = build_generator(cfg, opt.seed);
  int64_t mismatches = 0, cases = 0;
  std::vector<Tensor*> ta, tb;
  visit_params(a, [&](const std::string&, Tensor& t) { ta.push_back(&t); });
  visit_params(b, [&](const std::string&, Tensor& t) { tb.push_back(&t); });
  for (size_t i = 0; i < ta.size(); ++i) {
    if (!ta[i]->bit_equal(*tb[i])) ++mismatches;
    ++cases;
  }
  return make_result("roundtrip/build_deterministic", static_cast<double>(mismatches), 0.0,
                     cases);
}

PropertyResult rt_generate_deterministic(const VerifyOptions& opt) {
  GeneratorConfig cfg = toy_config_32();
  GeneratorParams gp = build_generator(cfg, opt.seed);
  Tensor z = sample_latents(cfg, 2, opt.seed + 1);
  Tensor a = generate(gp, z);
  Tensor b = generate(gp, z);
  return make_result("roundtrip/generate_deterministic", a.bit_equal(b) ? 0.0 : 1.0, 0.0, 2);
}

PropertyResult rt_interpolate_endpoints(const VerifyOptions& opt) {
  GeneratorConfig cfg = toy_config_32();
  GeneratorParams gp = build_generator(cfg, opt.seed);
  Tensor za = sample_latents(cfg, 1, opt.seed + 2);
  Tensor zb = sample_latents(cfg, 1, opt.seed + 3);
  std::vector<Tensor> frames = interpolate(gp, za, zb, 5);
  int64_t mismatches = 0;
  if (!frames.front().bit_equal(generate(gp, za))) ++mismatches;
  if (!frames.back().bit_equal(generate(gp, zb))) ++mismatches;
  if (frames.size() != 5) ++mismatches;
  return make_result("roundtrip/interpolate_endpoints", static_cast<double>(mismatches), 0.0, 5);
}

// ---------------------------------------------------------------------------
// equivalence suite

PropertyResult eq_contract_oracle(Rng& rng) {
  const std::string alphabet = "abcdefgh";
  double err = 0.0;
  int64_t cases = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::string labels = alphabet.substr(0, static_cast<size_t>(rng.uniform_int(1, 6)));
    std::map<char, int64_t> ext;
    for (char c : labels) ext[c] = rng.uniform_int(1, 5);
    auto pick = [&](int rank) {
      std::string s;
      std::string pool = labels;
      for (int i = 0; i < rank && !pool.empty(); ++i) {
        size_t at = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1));
        s.push_back(pool[at]);
        pool.erase(at, 1);
      }
      return s;
    };
    std::string sa = pick(static_cast<int>(rng.uniform_int(1, 3)));
    std::string sb = pick(static_cast<int>(rng.uniform_int(0, 3)));
    std::string uni = sa;
    for (char c : sb) {
      if (uni.find(c) == std::string::npos) uni.push_back(c);
    }
    std::string so;
    for (char c : uni) {
      if (rng.uniform() < 0.6) so.push_back(c);
    }
    Shape as, bs;
    for (char c : sa) as.push_back(ext[c]);
    for (char c : sb) bs.push_back(ext[c]);
    Tensor a(as), b(bs);
    rng.fill_uniform_int(a, -3, 3);
    rng.fill_uniform_int(b, -3, 3);
    Tensor got = contract(sa + "," + sb + "->" + so, a, b);
    Tensor want = oracle::einsum_loops(sa, a, sb, b, so);
    err = std::max(err, max_abs_diff(got, want));
    ++cases;
  }
  return make_result("equiv/contract_loop_oracle", err, 0.0, cases);
}

PropertyResult eq_softmax_sum(Rng& rng) {
  double err = 0.0;
  int64_t cases = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Tensor t = rng.normal_tensor({3, 7}, 3.0);
    Tape tape;
    Tensor y = softmax(tape.constant(t), -1).value();
    for (int64_t r = 0; r < 3; ++r) {
      double s = 0.0;
      for (int64_t c = 0; c < 7; ++c) s += y[r * 7 + c];
      err = std::max(err, std::abs(s - 1.0));
    }
    ++cases;
  }
  return make_result("equiv/softmax_rows_sum_to_one", err, 1e-12, cases);
}

PropertyResult eq_softmax_shift(Rng& rng) {
  double err = 0.0;
  int64_t cases = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Tensor t = rng.normal_tensor({2, 9}, 2.0);
    double c0 = rng.uniform(-20.0, 20.0);
    Tensor shifted = t;
    for (int64_t i = 0; i < shifted.size(); ++i) shifted[i] += c0;
    Tape tape;
    Tensor a = softmax(tape.constant(t), -1).value();
    Tensor b = softmax(tape.constant(shifted), -1).value();
    err = std::max(err, max_abs_diff(a, b));
    ++cases;
  }
  return make_result("equiv/softmax_shift_invariance", err, 1e-12, cases);
}

PropertyResult eq_softmax_highprec(Rng& rng) {
  double err = 0.0;
  int64_t cases = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Tensor t = rng.normal_tensor({4}, 2.0);
    Tape tape;
    Tensor y = softmax(tape.constant(t), 0).value();
    std::vector<double> xs(t.data(), t.data() + t.size());
    std::vector<double> want = oracle::softmax_vector_ld(xs);
    for (int64_t i = 0; i < 4; ++i) {
      err = std::max(err, std::abs(y[i] - want[static_cast<size_t>(i)]) /
                              want[static_cast<size_t>(i)]);
    }
    ++cases;
  }
  return make_result("equiv/softmax_highprec_oracle", err, 1e-15, cases);
}

PropertyResult eq_masked_oracle(Rng& rng) {
  double err = 0.0;
  int64_t cases = 0;
  for (int trial = 0; trial < 220; ++trial) {
    int64_t m = rng.uniform_int(1, 8);
    int64_t n = rng.uniform_int(1, 16);
    int64_t h = rng.uniform_int(0, 1) == 0 ? 2 : 4;
    int64_t d = rng.uniform_int(2, 8);
    int64_t k = rng.uniform_int(2, 6);
    int64_t v = rng.uniform_int(2, 6);
    Tensor x = rng.normal_tensor({1, m, n, d});
    AttentionWeights w = random_attention(rng, h, d, k, v);
    Tape tape;
    BlockedVar bx = blocked_of(tape, x);
    Tensor got = multi_axis_attention(bx, bx, mount_attention(tape, w)).data.value();
    err = std::max(err, max_abs_diff(got, oracle::masked_full_attention(x, w)));
    ++cases;
  }
  return make_result("equiv/multi_axis_masked_oracle", err, 1e-12, cases);
}

// zero out half of the output projection so one path survives
AttentionWeights isolate_half(const AttentionWeights& w, bool keep_dilated) {
  AttentionWeights out = w;
  const int64_t h = w.wq.extent(0), d = w.wq.extent(1), v = w.wv.extent(1);
  const int64_t half = (h / 2) * d * v;
  if (keep_dilated) {
    for (int64_t i = half; i < h * d * v; ++i) out.wo[i] = 0.0;
  } else {
    for (int64_t i = 0; i < half; ++i) out.wo[i] = 0.0;
  }
  return out;
}

AttentionWeights head_half(const AttentionWeights& w, bool first_half) {
  const int64_t h = w.wq.extent(0), d = w.wq.extent(1), k = w.wq.extent(2), v = w.wv.extent(1);
  AttentionWeights out;
  out.wq = Tensor(Shape{h / 2, d, k});
  out.wo = Tensor(Shape{h / 2, d, v});
  const int64_t qoff = first_half ? 0 : (h / 2) * d * k;
  const int64_t ooff = first_half ? 0 : (h / 2) * d * v;
  for (int64_t i = 0; i < (h / 2) * d * k; ++i) out.wq[i] = w.wq[qoff + i];
  for (int64_t i = 0; i < (h / 2) * d * v; ++i) out.wo[i] = w.wo[ooff + i];
  out.wk = w.wk;
  out.wv = w.wv;
  return out;
}

PropertyResult eq_degenerate_m1(Rng& rng) {
  double err = 0.0;
  int64_t cases = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const int64_t n = rng.uniform_int(2, 16), d = 4, h = 4;
    Tensor x = rng.normal_tensor({1, 1, n, d});
    AttentionWeights w = random_attention(rng, h, d, 3, 3);
    Tape tape;
    BlockedVar bx = blocked_of(tape, x);
    Tensor got =
        multi_axis_attention(bx, bx, mount_attention(tape, isolate_half(w, false))).data.value();
    Tensor want = oracle::full_attention_loops(x.reshaped({1, n, d}), head_half(w, false));
    err = std::max(err, max_abs_diff(got, want.reshaped({1, 1, n, d})));
    ++cases;
  }
  return make_result("equiv/degenerate_m1_regional_is_full", err, 1e-12, cases);
}

PropertyResult eq_degenerate_n1(Rng& rng) {
  double err = 0.0;
  int64_t cases = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const int64_t m = rng.uniform_int(2, 8), d = 4, h = 2;
    Tensor x = rng.normal_tensor({1, m, 1, d});
    AttentionWeights w = random_attention(rng, h, d, 3, 3);
    Tape tape;
    BlockedVar bx = blocked_of(tape, x);
    Tensor got =
        multi_axis_attention(bx, bx, mount_attention(tape, isolate_half(w, true))).data.value();
    Tensor want = oracle::full_attention_loops(x.reshaped({1, m, d}), head_half(w, true));
    err = std::max(err, max_abs_diff(got, want.reshaped({1, m, 1, d})));
    ++cases;
  }
  return make_result("equiv/degenerate_n1_dilated_is_full", err, 1e-12, cases);
}

PropertyResult eq_axial(Rng& rng) {
  double err = 0.0;
  int64_t cases = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const int64_t H = rng.uniform_int(2, 6), W = rng.uniform_int(2, 6), d = 4, h = 4;
    Tensor x = rng.normal_tensor({1, H, W, d});
    AttentionWeights w = random_attention(rng, h, d, 3, 3);
    Tape tape;
    Tensor got = axial_attention(tape.param(x), mount_attention(tape, w)).value();
    Tensor want = oracle::masked_full_attention(x, w);  // rows as patches
    err = std::max(err, max_abs_diff(got, want));
    ++cases;
  }
  return make_result("equiv/axial_masked_oracle", err, 1e-12, cases);
}

PropertyResult eq_full_attention(Rng& rng) {
  double err = 0.0;
  int64_t cases = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const int64_t N = rng.uniform_int(1, 16), d = 5, h = 2;
    Tensor x = rng.normal_tensor({2, N, d});
    AttentionWeights w = random_attention(rng, h, d, 3, 4);
    Tape tape;
    Tensor got = full_attention_oracle(tape.param(x), mount_attention(tape, w)).value();
    err = std::max(err, max_abs_diff(got, oracle::full_attention_loops(x, w)));
    ++cases;
  }
  return make_result("equiv/full_attention_loop_oracle", err, 1e-12, cases);
}

PropertyResult eq_cross_attention(Rng& rng) {
  double err = 0.0;
  int64_t cases = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const int64_t N = rng.uniform_int(1, 8), L = rng.uniform_int(1, 8);
    const int64_t d = 4, h = 2, k = 3, v = 3, cz = 5;
    AttentionWeights w = random_attention(rng, h, d, k, v, cz);
    Tensor x = rng.normal_tensor({2, N, d});
    Tensor z = rng.normal_tensor({2, L, cz});
    Tensor pz = rng.normal_tensor({L, cz});
    Tape tape;
    Tensor got =
        cross_attention_mqa(tape.param(x), tape.param(z), tape.param(pz), mount_attention(tape, w))
            .value();
    // brute-force loops: append p_z to z then run full attention per query
    Tensor zp(z.shape());
    for (int64_t b = 0; b < 2; ++b) {
      for (int64_t l = 0; l < L; ++l) {
        for (int64_t c = 0; c < cz; ++c) {
          zp[(b * L + l) * cz + c] = z[(b * L + l) * cz + c] + pz[l * cz + c];
        }
      }
    }
    const double rs = 1.0 / std::sqrt(static_cast<double>(k));
    Tensor want(Shape{2, N, d});
    for (int64_t b = 0; b < 2; ++b) {
      for (int64_t hh = 0; hh < h; ++hh) {
        for (int64_t i = 0; i < N; ++i) {
          std::vector<double> q(static_cast<size_t>(k), 0.0);
          for (int64_t kk = 0; kk < k; ++kk) {
            for (int64_t dd = 0; dd < d; ++dd) {
              q[static_cast<size_t>(kk)] +=
                  x[(b * N + i) * d + dd] * w.wq[(hh * d + dd) * k + kk];
            }
          }
          std::vector<double> logits(static_cast<size_t>(L), 0.0);
          for (int64_t l = 0; l < L; ++l) {
            double dot = 0.0;
            for (int64_t kk = 0; kk < k; ++kk) {
              double key = 0.0;
              for (int64_t c = 0; c < cz; ++c) key += zp[(b * L + l) * cz + c] * w.wk[c * k + kk];
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
                  val += zp[(b * L + l) * cz + c] * w.wv[c * v + vv];
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
    err = std::max(err, max_abs_diff(got, want));
    ++cases;
  }
  return make_result("equiv/cross_attention_loop_oracle", err, 1e-12, cases);
}

PropertyResult eq_mqa_mha(Rng& rng) {
  const int64_t m = 3, n = 4, d = 4, h = 4, k = 3, v = 3;
  Tensor x = rng.normal_tensor({2, m, n, d});
  AttentionWeights w = random_attention(rng, h, d, k, v);
  Tape tape;
  BlockedVar bx = blocked_of(tape, x);
  Tensor mqa = multi_axis_attention(bx, bx, mount_attention(tape, w)).data.value();

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
  Tensor mha = contract("bhmnv,hdv->bmnd", concat2(o1, o2, 1), tape.param(w.wo)).value();
  return make_result("equiv/mqa_mha_tied_bitexact", mha.bit_equal(mqa) ? 0.0 : 1.0, 0.0, 1);
}

PropertyResult eq_raw_tape(Rng& rng) {
  Tensor x = rng.normal_tensor({2, 3, 4, 4});
  AttentionWeights w = random_attention(rng, 4, 4, 3, 3);
  Tape tape;
  BlockedVar bx = blocked_of(tape, x);
  Tensor tape_out = multi_axis_attention(bx, bx, mount_attention(tape, w)).data.value();
  Tensor raw_out = multi_axis_attention_raw(x, w, AttentionMode::multi_axis, nullptr);
  bool ok = tape_out.bit_equal(raw_out);
  Tensor xf = x.reshaped({2, 12, 4});
  ok = ok && full_attention_oracle(tape.param(xf), mount_attention(tape, w))
                 .value()
                 .bit_equal(full_attention_raw(xf, w, nullptr));
  return make_result("equiv/raw_kernels_bitexact", ok ? 0.0 : 1.0, 0.0, 2);
}

PropertyResult eq_flop_instrumented(Rng& rng) {
  int64_t mismatches = 0, cases = 0;
  for (int trial = 0; trial < 8; ++trial) {
    int64_t m = rng.uniform_int(1, 6), n = rng.uniform_int(1, 6);
    int64_t h = 2 * rng.uniform_int(1, 2), d = 4;
    Tensor x = rng.normal_tensor({2, m, n, d});
    AttentionWeights w = random_attention(rng, h, d, 2, 2);
    for (AttentionMode mode : {AttentionMode::multi_axis, AttentionMode::regional_only,
                               AttentionMode::dilated_only}) {
      int64_t counted = 0;
      multi_axis_attention_raw(x, w, mode, &counted);
      if (counted != flop_count(mode, 2, m, n, d, h, 2, 2)) ++mismatches;
      ++cases;
    }
    int64_t counted = 0;
    full_attention_raw(x.reshaped({2, m * n, d}), w, &counted);
    if (counted != flop_count(AttentionMode::full, 2, m, n, d, h, 2, 2)) ++mismatches;
    ++cases;
  }
  return make_result("equiv/flop_count_instrumented", static_cast<double>(mismatches), 0.0,
                     cases);
}

PropertyResult eq_flop_sqrtn() {
  int64_t mismatches = 0, cases = 0;
  for (int64_t s : {4, 8, 16, 32, 64}) {
    const int64_t N = s * s;
    for (int64_t h : {2, 4, 8}) {
      int64_t full = flop_count(AttentionMode::full, 1, s, s, 8, h, 8, 8);
      int64_t ma = flop_count(AttentionMode::multi_axis, 1, s, s, 8, h, 8, 8);
      if (ma != N * s * h) ++mismatches;        // N^1.5 * b * (h/2) * 2
      if (full % ma != 0 || full / ma != s) ++mismatches;
      cases += 2;
    }
  }
  return make_result("equiv/flop_count_sqrtn_identity", static_cast<double>(mismatches), 0.0,
                     cases);
}

PropertyResult eq_permutation(Rng& rng) {
  const int64_t m = 4, n = 3, d = 4, h = 2;
  Tensor x = rng.normal_tensor({1, m, n, d});
  AttentionWeights w = random_attention(rng, h, d, 3, 3);
  auto run = [&](const Tensor& in) {
    Tape tape;
    BlockedVar bx = blocked_of(tape, in);
    return multi_axis_attention(bx, bx, mount_attention(tape, w)).data.value();
  };
  Tensor base = run(x);
  double err = 0.0;
  Tensor xp(Shape{1, m, n, d});
  for (int64_t i = 0; i < m; ++i) {
    int64_t src = (i + 1) % m;
    for (int64_t j = 0; j < n * d; ++j) xp[i * n * d + j] = x[src * n * d + j];
  }
  Tensor perm = run(xp);
  for (int64_t i = 0; i < m; ++i) {
    int64_t src = (i + 1) % m;
    for (int64_t j = 0; j < n * d; ++j) {
      err = std::max(err, std::abs(perm[i * n * d + j] - base[src * n * d + j]));
    }
  }
  return make_result("equiv/patch_permutation_equivariance", err, 1e-12, m * n * d);
}

PropertyResult eq_loss_spots() {
  // zero-weight discriminator emits zero logits
  ToyDiscriminator disc = ToyDiscriminator::build(12, 8, 1);
  visit_params(disc, [&](const std::string&, Tensor& t) {
    for (int64_t i = 0; i < t.size(); ++i) t[i] = 0.0;
  });
  Tensor real(Shape{3, 2, 2, 3});
  Tensor fake(Shape{3, 2, 2, 3});
  Tape tape;
  MountedDisc dm = mount_disc(tape, disc, false);
  double ld = loss_discriminator(tape, dm, real, tape.constant(fake), 0.0).value()[0];
  double lg = loss_generator(disc_logits(tape.constant(fake), dm)).value()[0];
  double err = std::abs(ld - 2.0 * std::log(2.0));
  err = std::max(err, std::abs(lg - std::log(2.0)));
  return make_result("equiv/loss_spot_values", err, 1e-12, 2);
}

PropertyResult eq_r1_linear(Rng& rng) {
  // linear discriminator: penalty is ||w||^2 independent of x
  const int64_t f = 10, b = 4;
  Tensor wlin = rng.normal_tensor({f, 1});
  double want = 0.0;
  for (int64_t i = 0; i < f; ++i) want += wlin[i] * wlin[i];
  double err = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    Tensor x = rng.normal_tensor({b, f});
    Tape tape;
    Var wv = tape.constant(wlin);
    auto logits_of = [&](Var xi) { return reshape(contract("bf,fo->bo", xi, wv), {b}); };
    double got = r1_penalty(tape, logits_of, x).value()[0];
    err = std::max(err, std::abs(got - want));
  }
  // constant discriminator: exactly zero
  {
    Tensor x = rng.normal_tensor({b, f});
    Tape tape;
    auto logits_of = [&](Var xi) { return scale(sum_axis(xi, 1, false), 0.0); };
    err = std::max(err, std::abs(r1_penalty(tape, logits_of, x).value()[0]));
  }
  return make_result("equiv/r1_linear_weight_norm", err, 1e-12, 4);
}

PropertyResult eq_adam_recurrence() {
  AdamConfig cfg;
  cfg.lr = 0.1;
  double po = 0.0, m = 0.0, v = 0.0;
  Tensor p = Tensor::full({1}, 0.0);
  AdamState st;
  Tensor* pp = &p;
  double err = 0.0;
  bool monotone = true;
  double prev = 1e30;
  for (int t = 1; t <= 100; ++t) {
    double gg = po - 3.0;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * gg;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * gg * gg;
    po -= cfg.lr * (m / (1.0 - std::pow(cfg.beta1, t))) /
          (std::sqrt(v / (1.0 - std::pow(cfg.beta2, t))) + cfg.eps);
    Tensor g = Tensor::full({1}, p[0] - 3.0);
    adam_step(std::span<Tensor* const>(&pp, 1), std::span<const Tensor>(&g, 1), st, cfg);
    err = std::max(err, std::abs(p[0] - po));
    double dist = std::abs(p[0] - 3.0);
    if (t > 5 && dist >= prev) monotone = false;
    prev = dist;
  }
  if (!monotone || std::abs(p[0] - 3.0) >= 0.5) err = std::max(err, 1.0);
  return make_result("equiv/adam_scalar_recurrence", err, 1e-12, 100);
}

// ---------------------------------------------------------------------------
// gradcheck suite

struct GradChecker {
  const VerifyOptions& opt;

  double run(const std::function<Var(Tape&, std::vector<Var>&)>& build,
             std::vector<Tensor> params, double h = 1e-5, int64_t max_coords = -1) const {
    auto eval = [&](std::span<const Tensor> ps) {
      Tape tape;
      std::vector<Var> vars;
      for (const Tensor& p : ps) vars.push_back(tape.param(p));
      return build(tape, vars).value()[0];
    };
    Tape tape;
    tape.set_vjp_fault(opt.fault_op, opt.fault_scale);
    std::vector<Var> vars;
    for (const Tensor& p : params) vars.push_back(tape.param(p));
    Var loss = build(tape, vars);
    std::vector<Tensor> grads = backward(loss, vars);
    return finite_diff_check(eval, params, grads, {}, h, max_coords).max_rel_err;
  }
};

// probe functional with O(1) gradient entries everywhere
Var probe_loss(Tape& tape, Var y) {
  Tensor c(y.value().shape());
  for (int64_t i = 0; i < c.size(); ++i) c[i] = 1.0 + 0.25 * static_cast<double>((i * 13) % 8);
  return add(sum_all(mul(y, tape.constant(c))), scale(sum_all(mul(y, y)), 0.5));
}

PropertyResult gc_contract(const GradChecker& gc, Rng& rng) {
  double err = gc.run(
      [](Tape& tape, std::vector<Var>& v) {
        return probe_loss(tape, contract("bnd,dm->bnm", v[0], v[1]));
      },
      {rng.normal_tensor({2, 3, 4}), rng.normal_tensor({4, 3})});
  return make_result("gradcheck/contract", err, 1e-6, 1);
}

PropertyResult gc_softmax(const GradChecker& gc, Rng& rng) {
  double err = gc.run(
      [](Tape& tape, std::vector<Var>& v) { return probe_loss(tape, softmax(v[0], -1)); },
      {rng.normal_tensor({3, 6})});
  return make_result("gradcheck/softmax", err, 1e-6, 1);
}

PropertyResult gc_mlp(const GradChecker& gc, Rng& rng) {
  double err = gc.run(
      [](Tape& tape, std::vector<Var>& v) {
        return probe_loss(tape, mlp_forward(v[0], v[1], v[2], v[3], v[4]));
      },
      {rng.normal_tensor({3, 4}), rng.normal_tensor({4, 8}), rng.normal_tensor({8}),
       rng.normal_tensor({8, 4}), rng.normal_tensor({4})});
  return make_result("gradcheck/mlp_forward", err, 1e-6, 1);
}

PropertyResult gc_norm(const GradChecker& gc, Rng& rng, NormKind kind, NormMode mode,
                       const char* name) {
  double err = gc.run(
      [&](Tape& tape, std::vector<Var>& v) {
        NormState st;
        NormState* sp = nullptr;
        if (kind == NormKind::batch) {
          st.init_identity(4);
          st.running_mean[1] = 0.3;
          st.running_var[2] = 2.0;
          sp = &st;
        }
        return probe_loss(tape, normalize(v[0], kind, v[1], v[2], sp, mode));
      },
      {rng.normal_tensor({2, 3, 4}), rng.normal_tensor({4}), rng.normal_tensor({4})});
  return make_result(name, err, 1e-6, 1);
}

PropertyResult gc_blocking(const GradChecker& gc, Rng& rng) {
  Tensor x = rng.normal_tensor({1, 4, 4, 4});
  double err = 0.0;
  // linear maps: larger h, only rounding remains
  err = std::max(err, gc.run(
                          [](Tape& tape, std::vector<Var>& v) {
                            Tensor c(Shape{1, 2, 2, 16});
                            for (int64_t i = 0; i < c.size(); ++i) {
                              c[i] = 1.0 + 0.25 * static_cast<double>((i * 13) % 8);
                            }
                            return sum_all(mul(space_to_depth(v[0], 2), tape.constant(c)));
                          },
                          {x}, 1e-2));
  err = std::max(err, gc.run(
                          [](Tape& tape, std::vector<Var>& v) {
                            Tensor c(Shape{1, 4, 4, 4});
                            for (int64_t i = 0; i < c.size(); ++i) {
                              c[i] = 1.0 + 0.25 * static_cast<double>((i * 13) % 8);
                            }
                            return sum_all(mul(unblock(block(v[0], 2)), tape.constant(c)));
                          },
                          {x}, 1e-2));
  err = std::max(err, gc.run(
                          [](Tape& tape, std::vector<Var>& v) {
                            Tensor c(Shape{1, 8, 8, 1});
                            for (int64_t i = 0; i < c.size(); ++i) {
                              c[i] = 1.0 + 0.25 * static_cast<double>((i * 13) % 8);
                            }
                            return sum_all(mul(pixel_shuffle(v[0]), tape.constant(c)));
                          },
                          {x}, 1e-2));
  err = std::max(err, gc.run(
                          [](Tape& tape, std::vector<Var>& v) {
                            Tensor c(Shape{1, 8, 8, 4});
                            for (int64_t i = 0; i < c.size(); ++i) {
                              c[i] = 1.0 + 0.25 * static_cast<double>((i * 13) % 8);
                            }
                            return sum_all(mul(nearest_upsample(v[0]), tape.constant(c)));
                          },
                          {x}, 1e-2));
  return make_result("gradcheck/blocking_ops", err, 1e-8, 4);
}

PropertyResult gc_multi_axis(const GradChecker& gc, Rng& rng) {
  const int64_t m = 2, n = 4, d = 4;
  AttentionWeights w = random_attention(rng, 2, d, 3, 3);
  double err = gc.run(
      [&](Tape& tape, std::vector<Var>& v) {
        BlockedVar bx;
        bx.data = v[0];
        bx.patch_size = 1;
        bx.src_h = m;
        bx.src_w = n;
        AttentionWeightVars wv{v[1], v[2], v[3], v[4]};
        return probe_loss(tape, multi_axis_attention(bx, bx, wv).data);
      },
      {rng.normal_tensor({1, m, n, d}), w.wq, w.wk, w.wv, w.wo});
  return make_result("gradcheck/multi_axis_attention", err, 1e-6, 1);
}

PropertyResult gc_cross(const GradChecker& gc, Rng& rng) {
  AttentionWeights w = random_attention(rng, 2, 4, 3, 3, 5);
  double err = gc.run(
      [&](Tape& tape, std::vector<Var>& v) {
        AttentionWeightVars wv{v[3], v[4], v[5], v[6]};
        return probe_loss(tape, cross_attention_mqa(v[0], v[1], v[2], wv));
      },
      {rng.normal_tensor({1, 5, 4}), rng.normal_tensor({1, 6, 5}), rng.normal_tensor({6, 5}),
       w.wq, w.wk, w.wv, w.wo});
  return make_result("gradcheck/cross_attention", err, 1e-6, 1);
}

PropertyResult gc_axial(const GradChecker& gc, Rng& rng) {
  AttentionWeights w = random_attention(rng, 2, 4, 3, 3);
  double err = gc.run(
      [&](Tape& tape, std::vector<Var>& v) {
        AttentionWeightVars wv{v[1], v[2], v[3], v[4]};
        return probe_loss(tape, axial_attention(v[0], wv));
      },
      {rng.normal_tensor({1, 3, 4, 4}), w.wq, w.wk, w.wv, w.wo});
  return make_result("gradcheck/axial_attention", err, 1e-6, 1);
}

PropertyResult gc_attention_block(const GradChecker& gc, Rng& rng) {
  AttentionWeights w = random_attention(rng, 2, 4, 3, 3);
  std::vector<Tensor> params = {rng.normal_tensor({1, 4, 4}),
                                w.wq,
                                w.wk,
                                w.wv,
                                w.wo,
                                Tensor::full({4}, 1.0),
                                Tensor(Shape{4}),
                                Tensor::full({4}, 1.0),
                                Tensor(Shape{4}),
                                rng.normal_tensor({4, 8}, 0.4),
                                rng.normal_tensor({8}, 0.2),
                                rng.normal_tensor({8, 4}, 0.4),
                                rng.normal_tensor({4}, 0.2)};
  double err = gc.run(
      [&](Tape& tape, std::vector<Var>& v) {
        AttentionWeightVars wv{v[1], v[2], v[3], v[4]};
        NormVars n1{v[5], v[6], nullptr};
        NormVars n2{v[7], v[8], nullptr};
        MlpVars mlp{v[9], v[10], v[11], v[12]};
        auto inner = [&](Var xn) { return full_attention_oracle(xn, wv); };
        return probe_loss(
            tape, attention_block(v[0], inner, NormKind::layer, NormMode::train, n1, &mlp, &n2));
      },
      params);
  return make_result("gradcheck/attention_block", err, 1e-6, 1);
}

PropertyResult gc_generator_latent(const GradChecker& gc, const VerifyOptions& opt) {
  GeneratorConfig cfg = toy_config_32(8, 8);
  GeneratorParams gp = build_generator(cfg, opt.seed + 11);
  Tensor z = sample_latents(cfg, 1, opt.seed + 12);
  auto eval = [&](std::span<const Tensor> ps) {
    Tape tape;
    MountedParams m = mount_params(tape, gp, false);
    Var img = generate_on_tape(tape, gp, m, tape.param(ps[0]), NormMode::eval);
    return sum_all(img).value()[0];
  };
  Tape tape;
  tape.set_vjp_fault(opt.fault_op, opt.fault_scale);
  MountedParams m = mount_params(tape, gp, false);
  Var zv = tape.param(z);
  Var img = generate_on_tape(tape, gp, m, zv, NormMode::eval);
  std::vector<Var> wrt{zv};
  std::vector<Tensor> grads = backward(sum_all(img), wrt);
  double err = finite_diff_check(eval, {z}, grads, {}, 1e-5).max_rel_err;
  return make_result("gradcheck/generator_latent", err, 1e-6, 1);
}

PropertyResult gc_generator_params(const GradChecker& gc, const VerifyOptions& opt) {
  GeneratorConfig cfg = toy_config_32(8, 8);
  GeneratorParams gp = build_generator(cfg, opt.seed + 13);
  Tensor z = sample_latents(cfg, 1, opt.seed + 14);
  // snapshot parameters as the fd inputs, in visit order
  std::vector<Tensor> params;
  std::vector<std::string> names;
  visit_params(gp, [&](const std::string& n, Tensor& t) {
    names.push_back(n);
    params.push_back(t);
  });
  auto eval = [&](std::span<const Tensor> ps) {
    GeneratorParams work = gp;
    size_t i = 0;
    visit_params(work, [&](const std::string&, Tensor& t) { t = ps[i++]; });
    Tape tape;
    MountedParams m = mount_params(tape, work, true);
    Var img = generate_on_tape(tape, work, m, tape.constant(z), NormMode::eval);
    return probe_loss(tape, img).value()[0];
  };
  Tape tape;
  tape.set_vjp_fault(opt.fault_op, opt.fault_scale);
  MountedParams m = mount_params(tape, gp, true);
  Var img = generate_on_tape(tape, gp, m, tape.constant(z), NormMode::eval);
  std::vector<Tensor> grads = backward(probe_loss(tape, img), m.vars);
  double err = finite_diff_check(eval, params, grads, names, 1e-5, 3).max_rel_err;
  (void)gc;
  return make_result("gradcheck/generator_params", err, 1e-6, static_cast<int64_t>(params.size()));
}

PropertyResult gc_loss_generator(const GradChecker& gc, Rng& rng, const VerifyOptions& opt) {
  ToyDiscriminator disc = ToyDiscriminator::build(12, 8, opt.seed + 15);
  Tensor fake = rng.normal_tensor({3, 2, 2, 3}, 0.5);
  std::vector<Tensor> params;
  visit_params(disc, [&](const std::string&, Tensor& t) { params.push_back(t); });
  auto eval = [&](std::span<const Tensor> ps) {
    ToyDiscriminator work = disc;
    size_t i = 0;
    visit_params(work, [&](const std::string&, Tensor& t) { t = ps[i++]; });
    Tape tape;
    MountedDisc dm = mount_disc(tape, work, true);
    return loss_generator(disc_logits(tape.constant(fake), dm)).value()[0];
  };
  Tape tape;
  tape.set_vjp_fault(opt.fault_op, opt.fault_scale);
  MountedDisc dm = mount_disc(tape, disc, true);
  Var lg = loss_generator(disc_logits(tape.constant(fake), dm));
  std::vector<Var> wrt{dm.w1, dm.b1, dm.w2, dm.b2, dm.w3, dm.b3};
  std::vector<Tensor> grads = backward(lg, wrt);
  double err = finite_diff_check(eval, params, grads, {}, 1e-5).max_rel_err;
  (void)gc;
  return make_result("gradcheck/loss_generator", err, 1e-6, 1);
}

PropertyResult gc_r1_through(const VerifyOptions& opt, Rng& rng, double gamma, const char* name,
                             double threshold) {
  ToyDiscriminator disc = ToyDiscriminator::build(12, 8, opt.seed + 16);
  Tensor real = rng.normal_tensor({3, 2, 2, 3}, 0.5);
  Tensor fake = rng.normal_tensor({3, 2, 2, 3}, 0.5);
  std::vector<Tensor> params;
  visit_params(disc, [&](const std::string&, Tensor& t) { params.push_back(t); });
  auto objective = [&](ToyDiscriminator& d, Tape& tape) {
    MountedDisc dm = mount_disc(tape, d, true);
    if (gamma == 0.0) return std::pair<Var, MountedDisc>(r1_penalty(tape, dm, real), dm);
    return std::pair<Var, MountedDisc>(
        loss_discriminator(tape, dm, real, tape.constant(fake), gamma), dm);
  };
  auto eval = [&](std::span<const Tensor> ps) {
    ToyDiscriminator work = disc;
    size_t i = 0;
    visit_params(work, [&](const std::string&, Tensor& t) { t = ps[i++]; });
    Tape tape;
    return objective(work, tape).first.value()[0];
  };
  Tape tape;
  tape.set_vjp_fault(opt.fault_op, opt.fault_scale);
  auto [loss, dm] = objective(disc, tape);
  std::vector<Var> wrt{dm.w1, dm.b1, dm.w2, dm.b2, dm.w3, dm.b3};
  std::vector<Tensor> grads = backward(loss, wrt);
  double err = finite_diff_check(eval, params, grads, {}, 1e-5).max_rel_err;
  return make_result(name, err, threshold, 1);
}

}  // namespace

std::vector<PropertyResult> verify_roundtrip(const VerifyOptions& opt) {
  Rng rng(opt.seed);
  std::vector<PropertyResult> out;
  out.push_back(rt_space_depth(rng));
  out.push_back(rt_block_unblock(rng));
  out.push_back(rt_pixel_shuffle(rng));
  out.push_back(rt_multiset(rng));
  out.push_back(rt_tape_replay(rng));
  out.push_back(rt_build_deterministic(opt));
  out.push_back(rt_generate_deterministic(opt));
  out.push_back(rt_interpolate_endpoints(opt));
  return out;
}

std::vector<PropertyResult> verify_equivalence(const VerifyOptions& opt) {
  Rng rng(opt.seed + 1);
  std::vector<PropertyResult> out;
  out.push_back(eq_contract_oracle(rng));
  out.push_back(eq_softmax_sum(rng));
  out.push_back(eq_softmax_shift(rng));
  out.push_back(eq_softmax_highprec(rng));
  out.push_back(eq_masked_oracle(rng));
  out.push_back(eq_degenerate_m1(rng));
  out.push_back(eq_degenerate_n1(rng));
  out.push_back(eq_axial(rng));
  out.push_back(eq_full_attention(rng));
  out.push_back(eq_cross_attention(rng));
  out.push_back(eq_mqa_mha(rng));
  out.push_back(eq_raw_tape(rng));
  out.push_back(eq_flop_instrumented(rng));
  out.push_back(eq_flop_sqrtn());
  out.push_back(eq_permutation(rng));
  out.push_back(eq_loss_spots());
  out.push_back(eq_r1_linear(rng));
  out.push_back(eq_adam_recurrence());
  return out;
}

std::vector<PropertyResult> verify_gradcheck(const VerifyOptions& opt) {
  Rng rng(opt.seed + 2);
  GradChecker gc{opt};
  std::vector<PropertyResult> out;
  out.push_back(gc_contract(gc, rng));
  out.push_back(gc_softmax(gc, rng));
  out.push_back(gc_mlp(gc, rng));
  out.push_back(gc_norm(gc, rng, NormKind::layer, NormMode::train, "gradcheck/normalize_layer"));
  out.push_back(
      gc_norm(gc, rng, NormKind::batch, NormMode::train, "gradcheck/normalize_batch_train"));
  out.push_back(
      gc_norm(gc, rng, NormKind::batch, NormMode::eval, "gradcheck/normalize_batch_eval"));
  out.push_back(gc_blocking(gc, rng));
  out.push_back(gc_multi_axis(gc, rng));
  out.push_back(gc_cross(gc, rng));
  out.push_back(gc_axial(gc, rng));
  out.push_back(gc_attention_block(gc, rng));
  out.push_back(gc_generator_latent(gc, opt));
  out.push_back(gc_generator_params(gc, opt));
  out.push_back(gc_loss_generator(gc, rng, opt));
  out.push_back(gc_r1_through(opt, rng, 0.0, "gradcheck/r1_through_training", 1e-4));
  out.push_back(gc_r1_through(opt, rng, 10.0, "gradcheck/loss_discriminator_full", 1e-4));
  return out;
}

std::vector<PropertyResult> verify_suite(const std::string& suite, const VerifyOptions& opt) {
  if (suite == "roundtrip") return verify_roundtrip(opt);
  if (suite == "equivalence") return verify_equivalence(opt);
  if (suite == "gradcheck") return verify_gradcheck(opt);
  if (suite == "all") {
    std::vector<PropertyResult> out = verify_roundtrip(opt);
    std::vector<PropertyResult> eq = verify_equivalence(opt);
    std::vector<PropertyResult> gcr = verify_gradcheck(opt);
    out.insert(out.end(), eq.begin(), eq.end());
    out.insert(out.end(), gcr.begin(), gcr.end());
    return out;
  }
  throw std::invalid_argument("unknown verify suite: " + suite +
                              " (expected gradcheck|equivalence|roundtrip|all)");
}

void print_report(std::ostream& os, const std::vector<PropertyResult>& results) {
  for (const PropertyResult& r : results) {
    os << r.name << " max_err " << std::setprecision(6) << std::scientific << r.max_err
       << " threshold " << r.threshold << std::defaultfloat << " cases " << r.cases << " "
       << (r.pass ? "PASS" : "FAIL") << "\n";
  }
}

bool all_pass(const std::vector<PropertyResult>& results) {
  for (const PropertyResult& r : results) {
    if (!r.pass) return false;
  }
  return true;
}

}  // namespace hit
