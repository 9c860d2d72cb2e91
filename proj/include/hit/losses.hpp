#pragma once

#include "hit/generator.hpp"
#include "hit/tape.hpp"

namespace hit {

/// Small discriminator for desk-scale adversarial training: flatten, three
/// affine layers with softplus in between, scalar logit per sample. Softplus
/// keeps every op twice differentiable, which training through the R1 term
/// requires.
struct ToyDiscriminator {
  LinearParams l1, l2, l3;

  static ToyDiscriminator build(int64_t input_dim, int64_t hidden, uint64_t seed);
  int64_t input_dim() const { return l1.w.extent(0); }
};

void visit_params(ToyDiscriminator& d,
                  const std::function<void(const std::string&, Tensor&)>& fn);

struct MountedDisc {
  Var w1, b1, w2, b2, w3, b3;
};

MountedDisc mount_disc(Tape& tape, ToyDiscriminator& d, bool trainable = true);

/// Logits [b] for an image batch [b, H, W, 3] (or any [b, ...] layout whose
/// trailing axes flatten to the discriminator input width).
Var disc_logits(Var images, const MountedDisc& d);

/// Mean over the batch of ||d D(x)/d x||^2 at the given real samples,
/// computed by an exact backward pass that stays on the tape, so the result
/// can itself be differentiated (training through the penalty).
/// `logits_of` maps an input batch Var to per-sample logits [b] and must not
/// mix samples.
using LogitsFn = std::function<Var(Var)>;
Var r1_penalty(Tape& tape, const LogitsFn& logits_of, const Tensor& x_real);
Var r1_penalty(Tape& tape, const MountedDisc& d, const Tensor& x_real);

/// -E[log sigmoid(real logits)] - E[log(1 - sigmoid(fake logits))]
///   + gamma * r1_penalty, in softplus form.
Var loss_discriminator(Tape& tape, const MountedDisc& d, const Tensor& x_real, Var fake_images,
                       double gamma);

struct DiscLossParts {
  Var total, bce, r1;  // r1 undefined when gamma == 0
};
DiscLossParts loss_discriminator_parts(Tape& tape, const MountedDisc& d, const Tensor& x_real,
                                       Var fake_images, double gamma);

/// -E[log sigmoid(fake logits)]; the non-saturating generator loss.
Var loss_generator(Var fake_logits);

/// Reconstruction + weighted perceptual + weighted adversarial term:
///   mean_b ||x - x_hat||^2 + l1 * mean_b ||F(x) - F(x_hat)||^2
///     - l2 * E[log sigmoid(D(x_hat))]
/// F is pluggable; the identity is used when not supplied.
using FeatureExtractor = std::function<Var(Var)>;
Var loss_vqhit(Var x, Var x_hat, const MountedDisc& d, const FeatureExtractor& f, double lambda1,
               double lambda2);

constexpr double kVqPerceptualWeight = 5e-5;  // lambda1 default
constexpr double kVqAdversarialWeight = 0.1;  // lambda2 default

}  // namespace hit
