#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "hit/blocking.hpp"
#include "hit/gradcheck.hpp"
#include "hit/rng.hpp"
#include "hit/tape.hpp"

using namespace hit;

TEST_CASE("space_to_depth: p=1 is the identity") {
  Rng rng(31);
  Tensor x = rng.normal_tensor({1, 3, 5, 2});
  CHECK(space_to_depth(x, 1).bit_equal(x.reshaped({1, 3, 5, 2})));
}

TEST_CASE("space_to_depth: 2x2 single patch flattens row-major") {
  Tensor x(Shape{1, 2, 2, 1});
  x[0] = 1.0;  // a
  x[1] = 2.0;  // b
  x[2] = 3.0;  // c
  x[3] = 4.0;  // d
  Tensor y = space_to_depth(x, 2);
  REQUIRE(y.shape() == Shape{1, 1, 1, 4});
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 2.0);
  CHECK(y[2] == 3.0);
  CHECK(y[3] == 4.0);
}

TEST_CASE("space_to_depth: arange input matches the index formula") {
  Tensor x = Tensor::arange({1, 4, 4, 2});
  Tensor y = space_to_depth(x, 2);
  REQUIRE(y.shape() == Shape{1, 2, 2, 8});
  const int64_t h = 4, w = 4, d = 2, p = 2;
  for (int64_t i = 0; i < h / p; ++i) {
    for (int64_t j = 0; j < w / p; ++j) {
      for (int64_t di = 0; di < p; ++di) {
        for (int64_t dj = 0; dj < p; ++dj) {
          for (int64_t c = 0; c < d; ++c) {
            // out[b, i, j, (di*p + dj)*d + c] == in[b, i*p+di, j*p+dj, c]
            double got = y[(i * (w / p) + j) * (d * p * p) + (di * p + dj) * d + c];
            double want = x[((i * p + di) * w + (j * p + dj)) * d + c];
            CHECK(got == want);
          }
        }
      }
    }
  }
  CHECK_THROWS_AS(space_to_depth(x, 3), std::invalid_argument);
}

TEST_CASE("depth_to_space: p=1 identity, inverse pair, forced 1x1x1x4 case") {
  Rng rng(32);
  Tensor x = rng.normal_tensor({2, 4, 8, 3});
  CHECK(depth_to_space(x, 1).bit_equal(x));
  for (int64_t p : {2, 4}) {
    Tensor big = rng.normal_tensor({1, 8, 8, 2});
    CHECK(depth_to_space(space_to_depth(big, p), p).bit_equal(big));
  }
  Tensor q(Shape{1, 1, 1, 4});
  q[0] = 1.0;
  q[1] = 2.0;
  q[2] = 3.0;
  q[3] = 4.0;
  Tensor y = depth_to_space(q, 2);
  REQUIRE(y.shape() == Shape{1, 2, 2, 1});
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 2.0);
  CHECK(y[2] == 3.0);
  CHECK(y[3] == 4.0);
  CHECK_THROWS_AS(depth_to_space(Tensor(Shape{1, 1, 1, 6}), 2), std::invalid_argument);
}

TEST_CASE("block: p=1 gives a row-major pixel enumeration") {
  Tensor x = Tensor::arange({1, 2, 3, 2});
  BlockedTensor b = block(x, 1);
  CHECK(b.data.shape() == Shape{1, 6, 1, 2});
  CHECK(b.data.bit_equal(x.reshaped({1, 6, 1, 2})));
}

TEST_CASE("block: 4x4 input with p=2 gives four 2x2 patches") {
  Rng rng(33);
  Tensor x = rng.normal_tensor({2, 4, 4, 3});
  BlockedTensor b = block(x, 2);
  CHECK(b.data.shape() == Shape{2, 4, 4, 3});
  CHECK(b.patch_size == 2);
}

TEST_CASE("block: arange 1x4x4x1 patch 0 holds pixels (0,0),(0,1),(1,0),(1,1)") {
  Tensor x = Tensor::arange({1, 4, 4, 1});
  BlockedTensor b = block(x, 2);
  CHECK(b.data[0] == 0.0);  // (0,0)
  CHECK(b.data[1] == 1.0);  // (0,1)
  CHECK(b.data[2] == 4.0);  // (1,0)
  CHECK(b.data[3] == 5.0);  // (1,1)
}

TEST_CASE("unblock: inverse of block; aspect handling") {
  Rng rng(34);
  Tensor x = rng.normal_tensor({1, 8, 8, 2});
  CHECK(unblock(block(x, 2)).bit_equal(x));

  // m=4, n=4, aspect 1.0 -> 4x4
  Tensor sq = rng.normal_tensor({1, 4, 4, 3});
  BlockedTensor b = block(sq, 2);
  Tensor back = unblock(b.data, 1.0);
  CHECK(back.bit_equal(sq));

  // aspect 2.0, m=8, n=4 -> h=4, w=8, exact round trip
  Tensor wide = rng.normal_tensor({1, 4, 8, 2});
  BlockedTensor bw = block(wide, 2);
  CHECK(bw.data.shape() == Shape{1, 8, 4, 2});
  Tensor back2 = unblock(bw.data, 2.0);
  CHECK(back2.shape() == Shape{1, 4, 8, 2});
  CHECK(back2.bit_equal(wide));

  // non-square n
  CHECK_THROWS_AS(unblock(Tensor(Shape{1, 4, 3, 2}), 1.0), std::invalid_argument);
  // aspect incompatible with m
  CHECK_THROWS_AS(unblock(Tensor(Shape{1, 6, 4, 2}), 1.0), std::invalid_argument);
}

TEST_CASE("roundtrip: all p in {1,2,4,8}, h,w <= 32 with divisibility, bit-exact") {
  Rng rng(35);
  for (int64_t p : {1, 2, 4, 8}) {
    for (int64_t h = p; h <= 32; h += p) {
      for (int64_t w = p; w <= 32; w += p) {
        Tensor x = rng.normal_tensor({1, h, w, 2});
        CHECK(depth_to_space(space_to_depth(x, p), p).bit_equal(x));
        BlockedTensor b = block(x, p);
        CHECK(unblock(b).bit_equal(x));
      }
    }
  }
}

TEST_CASE("block preserves the multiset of values") {
  Rng rng(36);
  Tensor x = rng.normal_tensor({2, 8, 8, 3});
  BlockedTensor b = block(x, 4);
  std::vector<double> xs(x.data(), x.data() + x.size());
  std::vector<double> ys(b.data.data(), b.data.data() + b.data.size());
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  CHECK(xs == ys);
}

TEST_CASE("pixel_shuffle: forced small case, constant input, inverse") {
  Tensor q(Shape{1, 1, 1, 4});
  q[0] = 1.0;
  q[1] = 2.0;
  q[2] = 3.0;
  q[3] = 4.0;
  Tensor y = pixel_shuffle(q);
  REQUIRE(y.shape() == Shape{1, 2, 2, 1});
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 2.0);
  CHECK(y[2] == 3.0);
  CHECK(y[3] == 4.0);

  Tensor c = Tensor::full({1, 2, 2, 8}, 3.25);
  Tensor yc = pixel_shuffle(c);
  for (int64_t i = 0; i < yc.size(); ++i) CHECK(yc[i] == 3.25);

  Rng rng(37);
  Tensor x = rng.normal_tensor({1, 2, 2, 8});
  CHECK(space_to_depth(pixel_shuffle(x), 2).bit_equal(x));
  CHECK_THROWS_AS(pixel_shuffle(Tensor(Shape{1, 2, 2, 6})), std::invalid_argument);
}

TEST_CASE("nearest_upsample: replication semantics") {
  Tensor one = Tensor::full({1, 1, 1, 1}, 7.5);
  Tensor y = nearest_upsample(one);
  REQUIRE(y.shape() == Shape{1, 2, 2, 1});
  for (int64_t i = 0; i < 4; ++i) CHECK(y[i] == 7.5);

  Rng rng(38);
  Tensor x = rng.normal_tensor({1, 3, 3, 2});
  Tensor up = nearest_upsample(x);
  CHECK(sum(up) == doctest::Approx(4.0 * sum(x)).epsilon(1e-12));
  for (int64_t i = 0; i < 6; ++i) {
    for (int64_t j = 0; j < 6; ++j) {
      for (int64_t c = 0; c < 2; ++c) {
        CHECK(up[(i * 6 + j) * 2 + c] == x[((i / 2) * 3 + (j / 2)) * 2 + c]);
      }
    }
  }
}

TEST_CASE("blocking ops are linear: gradcheck at 1e-8") {
  Rng rng(39);
  Tensor x = rng.normal_tensor({1, 4, 4, 4});

  // linear maps: central differences are exact in h, so a large h leaves only
  // rounding noise; the probe direction keeps every gradient entry O(1)
  auto fd = [&](auto builder, const Shape& out_shape) {
    Tensor probe(out_shape);
    for (int64_t i = 0; i < probe.size(); ++i) probe[i] = 1.0 + 0.25 * static_cast<double>((i * 13) % 8);
    auto run = [&](Tape& tape, Var v) {
      Var y = builder(v);
      return sum_all(mul(y, tape.constant(probe)));
    };
    auto eval = [&](std::span<const Tensor> ps) {
      Tape tape;
      Var v = tape.param(ps[0]);
      return run(tape, v).value()[0];
    };
    Tape tape;
    Var v = tape.param(x);
    std::vector<Var> wrt{v};
    std::vector<Tensor> grads = backward(run(tape, v), wrt);
    return finite_diff_check(eval, {x}, grads, {}, 1e-2).max_rel_err;
  };

  CHECK(fd([](Var v) { return space_to_depth(v, 2); }, {1, 2, 2, 16}) <= 1e-8);
  CHECK(fd([](Var v) { return unblock(block(v, 2)); }, {1, 4, 4, 4}) <= 1e-8);
  CHECK(fd([](Var v) { return pixel_shuffle(v); }, {1, 8, 8, 1}) <= 1e-8);
  CHECK(fd([](Var v) { return nearest_upsample(v); }, {1, 8, 8, 4}) <= 1e-8);
}
