#include "hit/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace hit {

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: hi < lo");
  uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
  if (range == 0) return static_cast<int64_t>(eng_());  // full 64-bit range
  uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  uint64_t x;
  do {
    x = eng_();
  } while (x >= limit);
  return lo + static_cast<int64_t>(x % range);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 in (0,1] so log is finite
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double Rng::truncated_normal(double sigma) {
  for (;;) {
    double x = normal();
    if (std::abs(x) <= 2.0) return sigma * x;
  }
}

void Rng::fill_normal(Tensor& t, double sigma) {
  for (int64_t i = 0; i < t.size(); ++i) t[i] = sigma * normal();
}

void Rng::fill_truncated_normal(Tensor& t, double sigma) {
  for (int64_t i = 0; i < t.size(); ++i) t[i] = truncated_normal(sigma);
}

void Rng::fill_uniform(Tensor& t, double lo, double hi) {
  for (int64_t i = 0; i < t.size(); ++i) t[i] = uniform(lo, hi);
}

void Rng::fill_uniform_int(Tensor& t, int64_t lo, int64_t hi) {
  for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(uniform_int(lo, hi));
}

Tensor Rng::normal_tensor(Shape shape, double sigma) {
  Tensor t(std::move(shape));
  fill_normal(t, sigma);
  return t;
}

}  // namespace hit
