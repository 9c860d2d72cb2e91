#pragma once

#include <cstdint>
#include <random>

#include "hit/tensor.hpp"

namespace hit {

/// Deterministic random source. The engine is mt19937_64 (bit-stable by
/// standard); float construction, Box-Muller normals and truncated normals
/// are implemented here rather than via std::*_distribution, whose output
/// is implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] inclusive, by rejection.
  int64_t uniform_int(int64_t lo, int64_t hi);

  double normal();  // standard normal, Box-Muller with cached pair
  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  /// Normal(0, sigma) resampled until |x| <= 2*sigma.
  double truncated_normal(double sigma);

  void fill_normal(Tensor& t, double sigma);
  void fill_truncated_normal(Tensor& t, double sigma);
  void fill_uniform(Tensor& t, double lo, double hi);
  void fill_uniform_int(Tensor& t, int64_t lo, int64_t hi);

  Tensor normal_tensor(Shape shape, double sigma = 1.0);

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hit
