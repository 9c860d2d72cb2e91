#pragma once

#include <ostream>

#include "hit/attention.hpp"

namespace hit {

struct BenchRow {
  int64_t n = 0;
  AttentionMode mode = AttentionMode::full;
  int64_t logit_count = 0;
  int64_t wall_ns_median = 0;
  bool skipped = false;  // allocation failure at this size
};

struct BenchConfig {
  std::vector<int64_t> sizes = {256, 1024, 4096};
  std::vector<AttentionMode> modes = {AttentionMode::full, AttentionMode::multi_axis};
  int64_t repeats = 5;
  int64_t dim = 8;
  int64_t heads = 2;
  uint64_t seed = 7;
};

/// Times the f32 forward kernels on balanced sqrt(N) x sqrt(N) blocked inputs
/// and cross-checks flop_count against the kernels' own logit counters.
/// Sizes must be perfect squares.
std::vector<BenchRow> run_bench(const BenchConfig& cfg);

/// CSV: N,mode,logit_count,wall_ns_median (skipped rows carry "skipped").
void write_bench_csv(std::ostream& os, const std::vector<BenchRow>& rows,
                     const std::string& header_comment = "");

}  // namespace hit
