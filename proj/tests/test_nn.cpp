#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hit/gradcheck.hpp"
#include "hit/nn.hpp"
#include "hit/rng.hpp"
#include "hit/tape.hpp"
#include "hit/oracles.hpp"

using namespace hit;

TEST_CASE("softmax: uniform over equal logits") {
  Tape tape;
  Var x = tape.constant(Tensor(Shape{1, 3}));  // zeros
  Tensor y = softmax(x, -1).value();
  for (int64_t i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("softmax: [c, c+ln2] -> [1/3, 2/3] for several c") {
  for (double c : {-100.0, -1.0, 0.0, 0.5, 1000.0}) {
    Tape tape;
    Tensor t(Shape{2});
    t[0] = c;
    t[1] = c + std::log(2.0);
    Tensor y = softmax(tape.constant(t), 0).value();
    CHECK(std::abs(y[0] - 1.0 / 3.0) < 1e-12);
    CHECK(std::abs(y[1] - 2.0 / 3.0) < 1e-12);
  }
}

TEST_CASE("softmax: random vector matches extended-precision oracle") {
  Rng rng(21);
  Tensor t = rng.normal_tensor({4});
  Tape tape;
  Tensor y = softmax(tape.constant(t), 0).value();
  std::vector<double> xs(t.data(), t.data() + t.size());
  std::vector<double> want = oracle::softmax_vector_ld(xs);
  for (int64_t i = 0; i < 4; ++i) {
    CHECK(std::abs(y[i] - want[static_cast<size_t>(i)]) / want[static_cast<size_t>(i)] < 1e-15);
  }
}

TEST_CASE("softmax: sums to one and shifts away") {
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor t = rng.normal_tensor({3, 7});
    Tape tape;
    Tensor y = softmax(tape.constant(t), -1).value();
    for (int64_t r = 0; r < 3; ++r) {
      double s = 0.0;
      for (int64_t c = 0; c < 7; ++c) s += y[r * 7 + c];
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
    Tensor shifted = t;
    double c0 = rng.uniform(-5.0, 5.0);
    for (int64_t i = 0; i < shifted.size(); ++i) shifted[i] += c0;
    Tensor y2 = softmax(tape.constant(shifted), -1).value();
    CHECK(max_abs_diff(y, y2) < 1e-12);
  }
}

TEST_CASE("mlp_forward: all-negative preactivations yield the output bias") {
  Tape tape;
  Rng rng(23);
  Tensor x = Tensor::full({2, 3, 4}, -1.0);
  Tensor w1 = Tensor::full({4, 5}, 1.0);  // x@w1 = -4 < 0 everywhere
  Tensor b1(Shape{5});
  Tensor w2 = rng.normal_tensor({5, 2});
  Tensor b2 = rng.normal_tensor({2});
  Tensor y = mlp_forward(tape.constant(x), tape.constant(w1), tape.constant(b1),
                         tape.constant(w2), tape.constant(b2))
                 .value();
  for (int64_t p = 0; p < 6; ++p) {
    CHECK(y[p * 2 + 0] == b2[0]);
    CHECK(y[p * 2 + 1] == b2[1]);
  }
}

TEST_CASE("mlp_forward: identity weights pass nonnegative input through") {
  Tape tape;
  Tensor x(Shape{1, 2, 3});
  for (int64_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  Tensor eye(Shape{3, 3});
  for (int64_t i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
  Tensor zero3(Shape{3});
  Tensor y = mlp_forward(tape.constant(x), tape.constant(eye), tape.constant(zero3),
                         tape.constant(eye), tape.constant(zero3))
                 .value();
  CHECK(y.bit_equal(x));
}

TEST_CASE("mlp_forward: random instance matches two explicit matmuls with clamp") {
  Rng rng(24);
  Tensor x = rng.normal_tensor({3, 4});
  Tensor w1 = rng.normal_tensor({4, 6});
  Tensor b1 = rng.normal_tensor({6});
  Tensor w2 = rng.normal_tensor({6, 2});
  Tensor b2 = rng.normal_tensor({2});

  Tape tape;
  Tensor y = mlp_forward(tape.constant(x), tape.constant(w1), tape.constant(b1),
                         tape.constant(w2), tape.constant(b2))
                 .value();

  // direct recomputation
  Tensor want(Shape{3, 2});
  for (int64_t r = 0; r < 3; ++r) {
    std::vector<double> hidden(6, 0.0);
    for (int64_t hcol = 0; hcol < 6; ++hcol) {
      double acc = b1[hcol];
      for (int64_t d = 0; d < 4; ++d) acc += x[r * 4 + d] * w1[d * 6 + hcol];
      hidden[static_cast<size_t>(hcol)] = std::max(0.0, acc);
    }
    for (int64_t o = 0; o < 2; ++o) {
      double acc = b2[o];
      for (int64_t hcol = 0; hcol < 6; ++hcol) acc += hidden[static_cast<size_t>(hcol)] * w2[hcol * 2 + o];
      want[r * 2 + o] = acc;
    }
  }
  CHECK(max_abs_diff(y, want) < 1e-12);
  CHECK_THROWS_AS(mlp_forward(tape.constant(x), tape.constant(w2), tape.constant(b1),
                              tape.constant(w2), tape.constant(b2)),
                  std::invalid_argument);
}

TEST_CASE("normalize: constant input under layer norm is exactly shift") {
  Tape tape;
  Tensor x = Tensor::full({2, 3, 4}, 5.0);
  Rng rng(25);
  Tensor gamma = rng.normal_tensor({4});
  Tensor beta = rng.normal_tensor({4});
  Tensor y = normalize(tape.constant(x), NormKind::layer, tape.constant(gamma),
                       tape.constant(beta), nullptr, NormMode::train)
                 .value();
  for (int64_t p = 0; p < 6; ++p) {
    for (int64_t c = 0; c < 4; ++c) CHECK(y[p * 4 + c] == 0.0 * gamma[c] + beta[c]);
  }
}

TEST_CASE("normalize: two-sample batch {-1,+1} under train BN") {
  Tape tape;
  Tensor x(Shape{2, 1, 1, 3});
  for (int64_t c = 0; c < 3; ++c) {
    x[c] = -1.0;
    x[3 + c] = 1.0;
  }
  Tensor gamma = Tensor::full({3}, 1.0);
  Tensor beta(Shape{3});
  NormState st;
  Tensor y = normalize(tape.constant(x), NormKind::batch, tape.constant(gamma),
                       tape.constant(beta), &st, NormMode::train)
                 .value();
  // unit variance up to the epsilon correction: +-1/sqrt(1+1e-5)
  const double want = 1.0 / std::sqrt(1.0 + 1e-5);
  for (int64_t c = 0; c < 3; ++c) {
    CHECK(y[c] == doctest::Approx(-want).epsilon(1e-12));
    CHECK(y[3 + c] == doctest::Approx(want).epsilon(1e-12));
  }
  CHECK(st.initialized());
}

TEST_CASE("normalize: BN train output has zero mean, unit variance per channel") {
  Rng rng(26);
  Tensor x = rng.normal_tensor({2, 4, 4, 3});
  for (int64_t i = 0; i < x.size(); ++i) x[i] = 2.0 * x[i] + 1.5;
  Tape tape;
  Tensor gamma = Tensor::full({3}, 1.0);
  Tensor beta(Shape{3});
  NormState st;
  Tensor y = normalize(tape.constant(x), NormKind::batch, tape.constant(gamma),
                       tape.constant(beta), &st, NormMode::train)
                 .value();
  // recompute the moments of the output directly
  const int64_t per = 2 * 4 * 4;
  for (int64_t c = 0; c < 3; ++c) {
    double mean = 0.0, var = 0.0;
    for (int64_t p = 0; p < per; ++p) mean += y[p * 3 + c];
    mean /= static_cast<double>(per);
    for (int64_t p = 0; p < per; ++p) var += (y[p * 3 + c] - mean) * (y[p * 3 + c] - mean);
    var /= static_cast<double>(per);
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }
}

TEST_CASE("normalize: eval BN with uninitialized stats is an error; populated stats work") {
  Tape tape;
  Rng rng(27);
  Tensor x = rng.normal_tensor({2, 2, 2, 3});
  Tensor gamma = Tensor::full({3}, 1.0);
  Tensor beta(Shape{3});
  NormState st;
  CHECK_THROWS_AS(normalize(tape.constant(x), NormKind::batch, tape.constant(gamma),
                            tape.constant(beta), &st, NormMode::eval),
                  std::logic_error);
  st.init_identity(3);
  Tensor y = normalize(tape.constant(x), NormKind::batch, tape.constant(gamma),
                       tape.constant(beta), &st, NormMode::eval)
                 .value();
  // identity stats: y = x / sqrt(1 + eps)
  for (int64_t i = 0; i < x.size(); ++i) {
    CHECK(y[i] == doctest::Approx(x[i] / std::sqrt(1.0 + 1e-5)).epsilon(1e-12));
  }
}

TEST_CASE("normalize: running stats follow the 0.99 EMA") {
  Tape tape;
  Tensor x = Tensor::full({2, 1, 1, 1}, 4.0);
  Tensor gamma = Tensor::full({1}, 1.0);
  Tensor beta(Shape{1});
  NormState st;
  normalize(tape.constant(x), NormKind::batch, tape.constant(gamma), tape.constant(beta), &st,
            NormMode::train);
  // first update starts the EMA from the identity stats (mean 0, var 1)
  CHECK(st.running_mean[0] == doctest::Approx(0.99 * 0.0 + 0.01 * 4.0).epsilon(1e-12));
  CHECK(st.running_var[0] == doctest::Approx(0.99 * 1.0 + 0.01 * 0.0).epsilon(1e-12));
}

TEST_CASE("gradcheck: normalize (LN, BN train, BN eval) and mlp_forward") {
  Rng rng(28);
  Tensor x = rng.normal_tensor({2, 3, 4});
  Tensor gamma = rng.normal_tensor({4});
  Tensor beta = rng.normal_tensor({4});

  // probe functional with O(1) gradient entries everywhere (a pure quadratic
  // can leave near-zero gradient coordinates that drown in fd noise)
  auto probe_loss = [](Tape& tape, Var y) {
    Tensor c(y.value().shape());
    for (int64_t i = 0; i < c.size(); ++i) c[i] = 1.0 + 0.25 * static_cast<double>((i * 13) % 8);
    return add(sum_all(mul(y, tape.constant(c))), scale(sum_all(mul(y, y)), 0.5));
  };

  auto fd = [&](auto builder) {
    auto eval = [&](std::span<const Tensor> ps) {
      Tape tape;
      std::vector<Var> vars;
      for (const Tensor& p : ps) vars.push_back(tape.param(p));
      return probe_loss(tape, builder(tape, vars)).value()[0];
    };
    Tape tape;
    std::vector<Var> vars;
    std::vector<Tensor> params = {x, gamma, beta};
    for (const Tensor& p : params) vars.push_back(tape.param(p));
    Var loss = probe_loss(tape, builder(tape, vars));
    std::vector<Tensor> grads = backward(loss, vars);
    return finite_diff_check(eval, params, grads, {}, 1e-5).max_rel_err;
  };

  CHECK(fd([](Tape&, std::vector<Var>& v) {
          return normalize(v[0], NormKind::layer, v[1], v[2], nullptr, NormMode::train);
        }) < 1e-6);
  CHECK(fd([](Tape&, std::vector<Var>& v) {
          NormState st;  // train mode: stats participate in the graph
          return normalize(v[0], NormKind::batch, v[1], v[2], &st, NormMode::train);
        }) < 1e-6);
  CHECK(fd([](Tape&, std::vector<Var>& v) {
          NormState st;
          st.init_identity(4);
          st.running_mean[1] = 0.3;
          st.running_var[2] = 2.0;
          return normalize(v[0], NormKind::batch, v[1], v[2], &st, NormMode::eval);
        }) < 1e-6);

  Rng rng2(29);
  Tensor w1 = rng2.normal_tensor({4, 8});
  Tensor b1 = rng2.normal_tensor({8});
  Tensor w2 = rng2.normal_tensor({8, 4});
  Tensor b2 = rng2.normal_tensor({4});
  auto eval = [&](std::span<const Tensor> ps) {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& p : ps) vars.push_back(tape.param(p));
    Var y = mlp_forward(vars[0], vars[1], vars[2], vars[3], vars[4]);
    return probe_loss(tape, y).value()[0];
  };
  Tape tape;
  std::vector<Tensor> params = {x, w1, b1, w2, b2};
  std::vector<Var> vars;
  for (const Tensor& p : params) vars.push_back(tape.param(p));
  Var loss = probe_loss(tape, mlp_forward(vars[0], vars[1], vars[2], vars[3], vars[4]));
  std::vector<Tensor> grads = backward(loss, vars);
  CHECK(finite_diff_check(eval, params, grads, {}, 1e-5).max_rel_err < 1e-6);
}
