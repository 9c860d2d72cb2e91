#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hit/adam.hpp"
#include "hit/gradcheck.hpp"
#include "hit/nn.hpp"
#include "hit/rng.hpp"
#include "hit/tape.hpp"

using namespace hit;

namespace {

// gradcheck scaffold: f builds a fresh tape from the parameter tensors.
double run_fd(const std::function<Var(Tape&, std::span<const Var>)>& build,
              std::vector<Tensor> params, double h = 1e-5, double* out_err = nullptr,
              int64_t max_coords = -1) {
  auto eval = [&](std::span<const Tensor> ps) {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& p : ps) vars.push_back(tape.param(p));
    return build(tape, vars).value()[0];
  };
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& p : params) vars.push_back(tape.param(p));
  Var loss = build(tape, vars);
  std::vector<Tensor> grads = backward(loss, vars);
  FdReport rep = finite_diff_check(eval, params, grads, {}, h, max_coords);
  if (out_err) *out_err = rep.max_rel_err;
  return rep.max_rel_err;
}

}  // namespace

TEST_CASE("backward: loss = sum(x) gives all-ones gradient") {
  Tape tape;
  Rng rng(1);
  Var x = tape.param(rng.normal_tensor({3, 4}));
  std::vector<Tensor> g = backward(sum_all(x), std::vector<Var>{x});
  for (int64_t i = 0; i < g[0].size(); ++i) CHECK(g[0][i] == 1.0);
}

TEST_CASE("backward: loss = sum(softmax(x)) gives (near-)zero gradient") {
  Tape tape;
  Rng rng(2);
  Var x = tape.param(rng.normal_tensor({2, 5}));
  std::vector<Tensor> g = backward(sum_all(softmax(x, -1)), std::vector<Var>{x});
  CHECK(max_abs(g[0]) <= 1e-14);
}

TEST_CASE("backward: untouched parameters get zero gradients") {
  Tape tape;
  Rng rng(3);
  Var x = tape.param(rng.normal_tensor({3}));
  Var unused = tape.param(rng.normal_tensor({2, 2}));
  std::vector<Tensor> g = backward(sum_all(mul(x, x)), std::vector<Var>{x, unused});
  CHECK(max_abs(g[1]) == 0.0);
  CHECK(g[1].shape() == Shape{2, 2});
}

TEST_CASE("backward: rejects non-scalar loss and foreign parameters") {
  Tape tape;
  Var x = tape.param(Tensor::full({2, 2}, 1.0));
  CHECK_THROWS_AS(backward(mul(x, x), std::vector<Var>{x}), std::invalid_argument);
  Tape other;
  Var y = other.param(Tensor::full({1}, 1.0));
  CHECK_THROWS_AS(backward(sum_all(mul(x, x)), std::vector<Var>{y}), std::invalid_argument);
}

TEST_CASE("tape replay reproduces recorded outputs bit-exactly") {
  Tape tape;
  Rng rng(4);
  Var x = tape.param(rng.normal_tensor({2, 3, 4}));
  Var w = tape.param(rng.normal_tensor({4, 4}));
  Var y = softmax(contract("bnd,dk->bnk", x, w), -1);
  Var loss = mean_all(mul(y, y));
  backward(loss, std::vector<Var>{x, w});  // gradient nodes are replayed too
  CHECK(tape.replay_check() == -1);
}

TEST_CASE("gradcheck: elementwise and reduction ops") {
  Rng rng(5);
  auto input = rng.normal_tensor({3, 4});
  // keep relu away from exact zeros
  for (int64_t i = 0; i < input.size(); ++i) {
    if (std::abs(input[i]) < 1e-3) input[i] = 0.5;
  }

  CHECK(run_fd([](Tape&, std::span<const Var> v) { return sum_all(exp(scale(v[0], 0.3))); },
               {input}) < 1e-8);
  CHECK(run_fd([](Tape&, std::span<const Var> v) { return sum_all(relu(v[0])); }, {input}) <
        1e-8);
  CHECK(run_fd([](Tape&, std::span<const Var> v) { return sum_all(softplus(v[0])); }, {input}) <
        1e-8);
  CHECK(run_fd([](Tape&, std::span<const Var> v) { return sum_all(sigmoid(v[0])); }, {input}) <
        1e-8);
  CHECK(run_fd(
            [](Tape&, std::span<const Var> v) {
              return sum_all(log(add_scalar(mul(v[0], v[0]), 1.0)));
            },
            {input}) < 1e-8);
  CHECK(run_fd(
            [](Tape&, std::span<const Var> v) {
              return sum_all(sqrt(add_scalar(mul(v[0], v[0]), 0.5)));
            },
            {input}) < 1e-8);
  CHECK(run_fd(
            [](Tape&, std::span<const Var> v) {
              return sum_all(mul(sum_axis(v[0], 0, true), sum_axis(v[0], 0, true)));
            },
            {input}) < 1e-8);
  CHECK(run_fd(
            [](Tape&, std::span<const Var> v) {
              Var b = broadcast_to(reshape(v[1], Shape{1, 4}), Shape{3, 4});
              return sum_all(mul(add(v[0], b), add(v[0], b)));
            },
            {input, rng.normal_tensor({4})}) < 1e-8);
}

TEST_CASE("gradcheck: softmax, contract, concat/narrow ops") {
  Rng rng(6);
  Tensor x = rng.normal_tensor({2, 5});
  Tensor a = rng.normal_tensor({2, 3, 4});
  Tensor b = rng.normal_tensor({4, 3});

  CHECK(run_fd(
            [](Tape&, std::span<const Var> v) {
              Var s = softmax(v[0], -1);
              return sum_all(mul(s, s));  // nontrivial downstream of softmax
            },
            {x}) < 1e-8);
  CHECK(run_fd(
            [](Tape&, std::span<const Var> v) {
              Var c = contract("bnd,dm->bnm", v[0], v[1]);
              return sum_all(mul(c, c));
            },
            {a, b}) < 1e-8);
  CHECK(run_fd(
            [](Tape&, std::span<const Var> v) {
              Var h1 = narrow(v[0], 1, 0, 1);
              Var h2 = narrow(v[0], 1, 1, 2);
              Var c = concat2(h2, h1, 1);
              return sum_all(mul(c, c));
            },
            {a}) < 1e-8);
}

TEST_CASE("finite_diff_check: quadratic is exact to roundoff") {
  Rng rng(7);
  Tensor p = rng.normal_tensor({6});
  auto eval = [](std::span<const Tensor> ps) {
    double s = 0.0;
    for (int64_t i = 0; i < ps[0].size(); ++i) s += 0.5 * ps[0][i] * ps[0][i];
    return s;
  };
  // analytic gradient of 0.5||p||^2 is p itself
  FdReport rep = finite_diff_check(eval, {p}, std::vector<Tensor>{p}, {}, 1e-5);
  CHECK(rep.max_rel_err <= 1e-10);
  CHECK(rep.coords_checked == 6);
}

TEST_CASE("finite_diff_check: dead-relu coordinate reports zero on both sides") {
  Tensor p(Shape{2});
  p[0] = -1.0;  // dead under relu
  p[1] = 2.0;
  auto eval = [](std::span<const Tensor> ps) {
    double s = 0.0;
    for (int64_t i = 0; i < ps[0].size(); ++i) s += std::max(0.0, ps[0][i]);
    return s;
  };
  Tape tape;
  Var v = tape.param(p);
  std::vector<Tensor> g = backward(sum_all(relu(v)), std::vector<Var>{v});
  CHECK(g[0][0] == 0.0);  // analytic side: exactly zero
  // finite-difference side at the dead coordinate: both evaluations identical
  Tensor lo = p, hi = p;
  lo[0] -= 1e-5;
  hi[0] += 1e-5;
  CHECK(eval(std::vector<Tensor>{hi}) - eval(std::vector<Tensor>{lo}) == 0.0);
  FdReport rep = finite_diff_check(eval, {p}, g, {}, 1e-5);
  CHECK(rep.max_rel_err <= 1e-9);
}

TEST_CASE("finite_diff_check: rejects non-finite objectives") {
  Tensor p = Tensor::full({1}, 0.0);
  auto eval = [](std::span<const Tensor> ps) { return std::log(ps[0][0]); };
  CHECK_THROWS_AS(finite_diff_check(eval, {p}, std::vector<Tensor>{p}, {}, 1e-5),
                  std::runtime_error);
}

TEST_CASE("double backward: grad-of-grad matches the analytic second derivative") {
  // loss = sum of squared first derivatives of sum(softplus(x))
  Tape tape;
  Rng rng(8);
  Tensor xv = rng.normal_tensor({5});
  Var x = tape.param(xv);
  Var f = sum_all(softplus(x));
  std::vector<Var> g = grad(f, std::vector<Var>{x});
  Var gsum = sum_all(mul(g[0], g[0]));
  std::vector<Tensor> gg = backward(gsum, std::vector<Var>{x});
  for (int64_t i = 0; i < xv.size(); ++i) {
    double s = 1.0 / (1.0 + std::exp(-xv[i]));
    double want = 2.0 * s * (s * (1.0 - s));
    CHECK(std::abs(gg[0][i] - want) < 1e-12);
  }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged, bumps step") {
  Tensor p = Tensor::full({3}, 2.0);
  Tensor g(Shape{3});
  AdamState st;
  Tensor* pp = &p;
  adam_step(std::span<Tensor* const>(&pp, 1), std::span<const Tensor>(&g, 1), st, {});
  CHECK(st.step == 1);
  for (int64_t i = 0; i < p.size(); ++i) CHECK(p[i] == 2.0);
}

TEST_CASE("adam: beta1=beta2=0 reduces to sign steps") {
  Tensor p = Tensor::full({1}, 0.0);
  Tensor g = Tensor::full({1}, 3.0);
  AdamState st;
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.beta1 = 0.0;
  cfg.beta2 = 0.0;
  Tensor* pp = &p;
  adam_step(std::span<Tensor* const>(&pp, 1), std::span<const Tensor>(&g, 1), st, cfg);
  CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-6));  // -lr * g/(|g|+eps)
}

TEST_CASE("adam: rejects non-finite gradients") {
  Tensor p = Tensor::full({1}, 0.0);
  Tensor g = Tensor::full({1}, std::nan(""));
  AdamState st;
  Tensor* pp = &p;
  CHECK_THROWS_AS(
      adam_step(std::span<Tensor* const>(&pp, 1), std::span<const Tensor>(&g, 1), st, {}),
      std::runtime_error);
}

TEST_CASE("adam: 100 steps on 0.5(p-3)^2 track the scalar recurrence") {
  // independent oracle: the same update rule written as a plain recurrence
  double po = 0.0, m = 0.0, v = 0.0;
  AdamConfig cfg;
  cfg.lr = 0.1;
  std::vector<double> oracle_traj;
  for (int t = 1; t <= 100; ++t) {
    double gg = po - 3.0;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * gg;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * gg * gg;
    double mhat = m / (1.0 - std::pow(cfg.beta1, t));
    double vhat = v / (1.0 - std::pow(cfg.beta2, t));
    po -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    oracle_traj.push_back(po);
  }

  Tensor p = Tensor::full({1}, 0.0);
  AdamState st;
  Tensor* pp = &p;
  double prev_dist = 1e30;
  for (int t = 1; t <= 100; ++t) {
    Tensor g = Tensor::full({1}, p[0] - 3.0);
    adam_step(std::span<Tensor* const>(&pp, 1), std::span<const Tensor>(&g, 1), st, cfg);
    CHECK(p[0] == doctest::Approx(oracle_traj[static_cast<size_t>(t - 1)]).epsilon(1e-12));
    double dist = std::abs(p[0] - 3.0);
    if (t > 5) CHECK(dist < prev_dist);
    prev_dist = dist;
  }
  CHECK(std::abs(p[0] - 3.0) < 0.5);
}

TEST_CASE("vjp fault injection breaks gradcheck (mutation fixture)") {
  Rng rng(9);
  Tensor x = rng.normal_tensor({2, 5});
  auto eval = [&](std::span<const Tensor> ps) {
    Tape tape;
    Var v = tape.param(ps[0]);
    Var s = softmax(v, -1);
    return sum_all(mul(s, s)).value()[0];
  };
  Tape tape;
  tape.set_vjp_fault(Op::Softmax, 1.5);
  Var v = tape.param(x);
  Var s = softmax(v, -1);
  std::vector<Tensor> g = backward(sum_all(mul(s, s)), std::vector<Var>{v});
  FdReport rep = finite_diff_check(eval, {x}, g, {}, 1e-5);
  CHECK(rep.max_rel_err > 1e-3);  // corrupted rule must be caught
}
