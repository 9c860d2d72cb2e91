#pragma once

#include <optional>
#include <ostream>

#include "hit/adam.hpp"
#include "hit/losses.hpp"

namespace hit {

struct GanHyper {
  double gamma = 10.0;  // R1 weight
  double lr = 1e-4;
  double beta1 = 0.0;
  double beta2 = 0.99;
  int64_t batch = 8;
  int64_t steps = 2000;
};

/// Synthetic dataset: two-mode mixture of colored Gaussian blobs on a
/// res x res grid, pixel values in [-1, 1]. Deterministic per draw index.
struct BlobDataset {
  int64_t res = 8;
  uint64_t seed = 0;

  Tensor sample(Rng& rng, int64_t count) const;
};

/// Distribution gap between two image batches: L2 gap of the flattened means
/// plus the Frobenius gap of the flattened covariances.
double moment_distance(const Tensor& a, const Tensor& b);

struct TraceRow {
  int64_t step = 0;
  std::optional<double> loss_d, loss_g, r1, moment;
};

struct TrainResult {
  std::vector<TraceRow> trace;
  double initial_moment = 0.0;
  double final_moment = 0.0;
};

/// Writes the trace as CSV: step,loss_d,loss_g,r1,moment_distance with blank
/// cells where a row has no value for a column.
void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows,
                     const std::string& header_comment = "");

/// Alternating-step adversarial training of the generator against the toy
/// discriminator on the synthetic dataset: one Adam update of D (with the R1
/// term trained through by double backward) then one of G per step. The
/// moment distance against a held-out real batch is logged every `eval_every`
/// steps. Aborts with the step index if a loss goes non-finite.
TrainResult train_toy(GeneratorParams& gen, ToyDiscriminator& disc, const GanHyper& hyper,
                      const BlobDataset& data, uint64_t seed, int64_t eval_every = 100,
                      std::ostream* log = nullptr);

}  // namespace hit
