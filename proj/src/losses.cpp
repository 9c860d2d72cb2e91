#include "hit/losses.hpp"

#include <cmath>

namespace hit {

ToyDiscriminator ToyDiscriminator::build(int64_t input_dim, int64_t hidden, uint64_t seed) {
  Rng rng(seed);
  auto linear = [&](int64_t in, int64_t out) {
    LinearParams lp;
    lp.w = Tensor(Shape{in, out});
    rng.fill_truncated_normal(lp.w, 1.0 / std::sqrt(static_cast<double>(in)));
    lp.b = Tensor(Shape{out});
    return lp;
  };
  ToyDiscriminator d;
  d.l1 = linear(input_dim, hidden);
  d.l2 = linear(hidden, hidden / 2);
  d.l3 = linear(hidden / 2, 1);
  return d;
}

void visit_params(ToyDiscriminator& d,
                  const std::function<void(const std::string&, Tensor&)>& fn) {
  fn("disc.l1.w", d.l1.w);
  fn("disc.l1.b", d.l1.b);
  fn("disc.l2.w", d.l2.w);
  fn("disc.l2.b", d.l2.b);
  fn("disc.l3.w", d.l3.w);
  fn("disc.l3.b", d.l3.b);
}

MountedDisc mount_disc(Tape& tape, ToyDiscriminator& d, bool trainable) {
  auto put = [&](Tensor& t) { return trainable ? tape.param(t) : tape.constant(t); };
  return {put(d.l1.w), put(d.l1.b), put(d.l2.w), put(d.l2.b), put(d.l3.w), put(d.l3.b)};
}

Var disc_logits(Var images, const MountedDisc& d) {
  const Tensor& t = images.value();
  if (t.rank() < 2) throw std::invalid_argument("discriminator: need a batched input");
  const int64_t b = t.extent(0);
  const int64_t flat = t.size() / b;
  if (flat != d.w1.value().extent(0)) {
    throw std::invalid_argument("discriminator: input width " + std::to_string(flat) +
                                " does not match first layer " +
                                std::to_string(d.w1.value().extent(0)));
  }
  Var h = reshape(images, {b, flat});
  h = softplus(affine(h, d.w1, d.b1));
  h = softplus(affine(h, d.w2, d.b2));
  Var logit = affine(h, d.w3, d.b3);  // [b, 1]
  return reshape(logit, {b});
}

Var r1_penalty(Tape& tape, const LogitsFn& logits_of, const Tensor& x_real) {
  if (!x_real.all_finite()) throw std::invalid_argument("r1_penalty: non-finite real batch");
  const int64_t b = x_real.extent(0);
  Var x = tape.param(x_real);
  // each sample's logit depends only on its own slice, so the gradient of the
  // batch sum splits into per-sample gradients
  Var total = sum_all(logits_of(x));
  std::vector<Var> g = grad(total, std::vector<Var>{x});
  Var sq = sum_all(mul(g[0], g[0]));
  Var penalty = scale(sq, 1.0 / static_cast<double>(b));
  if (!penalty.value().all_finite()) {
    throw std::runtime_error("r1_penalty: non-finite gradient norm");
  }
  return penalty;
}

Var r1_penalty(Tape& tape, const MountedDisc& d, const Tensor& x_real) {
  return r1_penalty(tape, [&](Var x) { return disc_logits(x, d); }, x_real);
}

DiscLossParts loss_discriminator_parts(Tape& tape, const MountedDisc& d, const Tensor& x_real,
                                       Var fake_images, double gamma) {
  if (gamma < 0.0) throw std::invalid_argument("loss_discriminator: gamma must be >= 0");
  if (x_real.extent(0) != fake_images.value().extent(0)) {
    throw std::invalid_argument("loss_discriminator: real/fake batch sizes differ");
  }
  Var real_logits = disc_logits(tape.constant(x_real), d);
  Var fake_logits = disc_logits(fake_images, d);
  // -log sigmoid(x) = softplus(-x); -log(1 - sigmoid(x)) = softplus(x)
  DiscLossParts parts;
  parts.bce = add(mean_all(softplus(neg(real_logits))), mean_all(softplus(fake_logits)));
  parts.total = parts.bce;
  if (gamma > 0.0) {
    parts.r1 = r1_penalty(tape, d, x_real);
    parts.total = add(parts.total, scale(parts.r1, gamma));
  }
  if (!parts.total.value().all_finite()) {
    throw std::runtime_error("loss_discriminator: non-finite loss");
  }
  return parts;
}

Var loss_discriminator(Tape& tape, const MountedDisc& d, const Tensor& x_real, Var fake_images,
                       double gamma) {
  return loss_discriminator_parts(tape, d, x_real, fake_images, gamma).total;
}

Var loss_generator(Var fake_logits) {
  Var loss = mean_all(softplus(neg(fake_logits)));
  if (!loss.value().all_finite()) throw std::runtime_error("loss_generator: non-finite loss");
  return loss;
}

Var loss_vqhit(Var x, Var x_hat, const MountedDisc& d, const FeatureExtractor& f, double lambda1,
               double lambda2) {
  if (!x.value().same_shape(x_hat.value())) {
    throw std::invalid_argument("loss_vqhit: reconstruction shapes differ");
  }
  const int64_t b = x.value().extent(0);
  auto sq_norm_per_sample = [&](Var diff) {
    return scale(sum_all(mul(diff, diff)), 1.0 / static_cast<double>(b));
  };
  Var recon = sq_norm_per_sample(sub(x, x_hat));
  FeatureExtractor ident = [](Var v) { return v; };
  const FeatureExtractor& feat = f ? f : ident;
  Var perceptual = sq_norm_per_sample(sub(feat(x), feat(x_hat)));
  Var adv = mean_all(softplus(neg(disc_logits(x_hat, d))));
  return add(add(recon, scale(perceptual, lambda1)), scale(adv, lambda2));
}

}  // namespace hit
