#include "hit/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <new>
#include <stdexcept>

#include "hit/rng.hpp"

namespace hit {

namespace {

int64_t isqrt_checked(int64_t n) {
  int64_t s = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (s * s != n) {
    throw std::invalid_argument("bench: size " + std::to_string(n) +
                                " is not a perfect square (balanced blocking needs m == n)");
  }
  return s;
}

AttentionWeights32 random_weights32(Rng& rng, int64_t h, int64_t d, int64_t k) {
  auto fill = [&](Shape shape, double std) {
    Tensor32 t(shape);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.normal(0.0, std));
    return t;
  };
  AttentionWeights32 w;
  w.wq = fill({h, d, k}, 0.3);
  w.wk = fill({d, k}, 0.3);
  w.wv = fill({d, k}, 0.3);
  w.wo = fill({h, d, k}, 0.3);
  return w;
}

}  // namespace

std::vector<BenchRow> run_bench(const BenchConfig& cfg) {
  if (cfg.repeats < 1) throw std::invalid_argument("bench: repeats must be positive");
  if (cfg.heads % 2 != 0) throw std::invalid_argument("bench: heads must be even");
  std::vector<BenchRow> rows;
  Rng rng(cfg.seed);
  const int64_t k = cfg.dim / cfg.heads;
  AttentionWeights32 w = random_weights32(rng, cfg.heads, cfg.dim, std::max<int64_t>(k, 1));

  for (int64_t n : cfg.sizes) {
    const int64_t s = isqrt_checked(n);
    Tensor32 x_blocked(Shape{1, s, s, cfg.dim});
    for (int64_t i = 0; i < x_blocked.size(); ++i) {
      x_blocked[i] = static_cast<float>(rng.normal(0.0, 1.0));
    }
    for (AttentionMode mode : cfg.modes) {
      BenchRow row;
      row.n = n;
      row.mode = mode;
      try {
        row.logit_count = flop_count(mode, 1, s, s, cfg.dim, cfg.heads,
                                     std::max<int64_t>(k, 1), std::max<int64_t>(k, 1));
        std::vector<int64_t> samples;
        for (int64_t r = 0; r < cfg.repeats; ++r) {
          int64_t counted = 0;
          auto t0 = std::chrono::steady_clock::now();
          if (mode == AttentionMode::full) {
            Tensor32 flat = x_blocked.reshaped({1, n, cfg.dim});
            full_attention_raw(flat, w, &counted);
          } else if (mode == AttentionMode::axial) {
            // same kernel as multi_axis on the s x s grid
            multi_axis_attention_raw(x_blocked, w, AttentionMode::multi_axis, &counted);
          } else {
            multi_axis_attention_raw(x_blocked, w, mode, &counted);
          }
          auto t1 = std::chrono::steady_clock::now();
          if (counted != row.logit_count) {
            throw std::logic_error("bench: instrumented logit count " + std::to_string(counted) +
                                   " disagrees with flop_count " +
                                   std::to_string(row.logit_count));
          }
          samples.push_back(
              std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
        }
        std::sort(samples.begin(), samples.end());
        row.wall_ns_median = samples[samples.size() / 2];
      } catch (const std::bad_alloc&) {
        row.skipped = true;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows,
                     const std::string& header_comment) {
  if (!header_comment.empty()) os << header_comment;
  os << "N,mode,logit_count,wall_ns_median\n";
  for (const BenchRow& r : rows) {
    if (r.skipped) {
      os << r.n << "," << attention_mode_name(r.mode) << ",skipped,skipped\n";
    } else {
      os << r.n << "," << attention_mode_name(r.mode) << "," << r.logit_count << ","
         << r.wall_ns_median << "\n";
    }
  }
}

}  // namespace hit
