#include "hit/train.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace hit {

Tensor BlobDataset::sample(Rng& rng, int64_t count) const {
  Tensor out(Shape{count, res, res, 3});
  const double colors[2][3] = {{1.0, 0.3, 0.2}, {0.2, 0.4, 1.0}};
  const double sigma = static_cast<double>(res) / 5.0;
  for (int64_t s = 0; s < count; ++s) {
    const int mode = rng.uniform() < 0.5 ? 0 : 1;
    const double ci = (mode == 0 ? 0.25 : 0.75) * static_cast<double>(res) - 0.5 +
                      rng.uniform(-0.5, 0.5);
    const double cj = (mode == 0 ? 0.25 : 0.75) * static_cast<double>(res) - 0.5 +
                      rng.uniform(-0.5, 0.5);
    for (int64_t i = 0; i < res; ++i) {
      for (int64_t j = 0; j < res; ++j) {
        const double di = static_cast<double>(i) - ci;
        const double dj = static_cast<double>(j) - cj;
        const double bump = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
        for (int64_t c = 0; c < 3; ++c) {
          double v = -0.85 + 1.6 * colors[mode][c] * bump + 0.02 * rng.normal();
          out[((s * res + i) * res + j) * 3 + c] = std::min(1.0, std::max(-1.0, v));
        }
      }
    }
  }
  return out;
}

double moment_distance(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) throw std::invalid_argument("moment_distance: need batches");
  const int64_t na = a.extent(0), nb = b.extent(0);
  const int64_t f = a.size() / na;
  if (b.size() / nb != f) throw std::invalid_argument("moment_distance: feature sizes differ");

  auto mean_of = [&](const Tensor& t, int64_t n) {
    std::vector<double> mu(static_cast<size_t>(f), 0.0);
    for (int64_t s = 0; s < n; ++s) {
      for (int64_t i = 0; i < f; ++i) mu[static_cast<size_t>(i)] += t[s * f + i];
    }
    for (double& v : mu) v /= static_cast<double>(n);
    return mu;
  };
  std::vector<double> mu_a = mean_of(a, na), mu_b = mean_of(b, nb);

  auto cov_of = [&](const Tensor& t, int64_t n, const std::vector<double>& mu) {
    std::vector<double> cov(static_cast<size_t>(f * f), 0.0);
    for (int64_t s = 0; s < n; ++s) {
      for (int64_t i = 0; i < f; ++i) {
        const double xi = t[s * f + i] - mu[static_cast<size_t>(i)];
        for (int64_t j = 0; j < f; ++j) {
          cov[static_cast<size_t>(i * f + j)] +=
              xi * (t[s * f + j] - mu[static_cast<size_t>(j)]);
        }
      }
    }
    for (double& v : cov) v /= static_cast<double>(n);
    return cov;
  };
  std::vector<double> ca = cov_of(a, na, mu_a), cb = cov_of(b, nb, mu_b);

  double mean_gap = 0.0;
  for (int64_t i = 0; i < f; ++i) {
    const double dlt = mu_a[static_cast<size_t>(i)] - mu_b[static_cast<size_t>(i)];
    mean_gap += dlt * dlt;
  }
  double cov_gap = 0.0;
  for (int64_t i = 0; i < f * f; ++i) {
    const double dlt = ca[static_cast<size_t>(i)] - cb[static_cast<size_t>(i)];
    cov_gap += dlt * dlt;
  }
  return std::sqrt(mean_gap) + std::sqrt(cov_gap);
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows,
                     const std::string& header_comment) {
  if (!header_comment.empty()) os << header_comment;
  os << "step,loss_d,loss_g,r1,moment_distance\n";
  auto cell = [&](const std::optional<double>& v) {
    if (v) os << std::setprecision(17) << *v;
  };
  for (const TraceRow& r : rows) {
    os << r.step << ",";
    cell(r.loss_d);
    os << ",";
    cell(r.loss_g);
    os << ",";
    cell(r.r1);
    os << ",";
    cell(r.moment);
    os << "\n";
  }
}

TrainResult train_toy(GeneratorParams& gen, ToyDiscriminator& disc, const GanHyper& hyper,
                      const BlobDataset& data, uint64_t seed, int64_t eval_every,
                      std::ostream* log) {
  gen.config.validate();
  const int64_t res = gen.config.output_res();
  if (res != data.res) {
    throw std::invalid_argument("train_toy: generator output resolution does not match dataset");
  }
  if (disc.input_dim() != res * res * 3) {
    throw std::invalid_argument("train_toy: discriminator input width does not match images");
  }

  Rng rng(seed ^ data.seed);
  Rng eval_rng(seed ^ data.seed ^ 0x9e3779b97f4a7c15ull);
  const int64_t eval_n = 256;
  const Tensor real_eval = data.sample(eval_rng, eval_n);
  const Tensor z_eval = sample_latents(gen.config, eval_n, seed ^ 0x517cc1b727220a95ull);

  auto eval_moment = [&]() {
    Tensor fake = generate(gen, z_eval, NormMode::eval);
    return moment_distance(fake, real_eval);
  };

  TrainResult result;
  result.initial_moment = eval_moment();
  result.final_moment = result.initial_moment;
  {
    TraceRow row;
    row.step = 0;
    row.moment = result.initial_moment;
    result.trace.push_back(row);
  }

  std::vector<Tensor*> d_params;
  visit_params(disc, [&](const std::string&, Tensor& t) { d_params.push_back(&t); });
  std::vector<Tensor*> g_params;
  visit_params(gen, [&](const std::string&, Tensor& t) { g_params.push_back(&t); });

  AdamConfig acfg;
  acfg.lr = hyper.lr;
  acfg.beta1 = hyper.beta1;
  acfg.beta2 = hyper.beta2;
  AdamState d_state, g_state;

  for (int64_t step = 1; step <= hyper.steps; ++step) {
    TraceRow row;
    row.step = step;
    try {
      // discriminator update (generator frozen; R1 trained through)
      {
        Tensor real = data.sample(rng, hyper.batch);
        Tensor z = Tensor(Shape{hyper.batch, gen.config.latent_dim});
        rng.fill_normal(z, 1.0);
        Tape tape;
        MountedParams gm = mount_params(tape, gen, /*trainable=*/false);
        MountedDisc dm = mount_disc(tape, disc, /*trainable=*/true);
        Var fake = generate_on_tape(tape, gen, gm, tape.constant(z), NormMode::train);
        DiscLossParts parts = loss_discriminator_parts(tape, dm, real, fake, hyper.gamma);
        row.loss_d = parts.total.value()[0];
        if (parts.r1.defined()) row.r1 = parts.r1.value()[0];
        std::vector<Var> wrt = {dm.w1, dm.b1, dm.w2, dm.b2, dm.w3, dm.b3};
        std::vector<Tensor> grads = backward(parts.total, wrt);
        adam_step(d_params, grads, d_state, acfg);
      }
      // generator update (discriminator frozen)
      {
        Tensor z = Tensor(Shape{hyper.batch, gen.config.latent_dim});
        rng.fill_normal(z, 1.0);
        Tape tape;
        MountedParams gm = mount_params(tape, gen, /*trainable=*/true);
        MountedDisc dm = mount_disc(tape, disc, /*trainable=*/false);
        Var fake = generate_on_tape(tape, gen, gm, tape.constant(z), NormMode::train);
        Var lg = loss_generator(disc_logits(fake, dm));
        row.loss_g = lg.value()[0];
        std::vector<Tensor> grads = backward(lg, gm.vars);
        adam_step(g_params, grads, g_state, acfg);
      }
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("train_toy: aborted at step " + std::to_string(step) + ": " +
                               e.what());
    }

    if (step % eval_every == 0 || step == hyper.steps) {
      row.moment = eval_moment();
      result.final_moment = *row.moment;
      if (log) {
        *log << "step " << step << " loss_d " << *row.loss_d << " loss_g " << *row.loss_g
             << " moment " << *row.moment << "\n";
      }
    }
    result.trace.push_back(row);
  }
  return result;
}

}  // namespace hit
