#pragma once

#include <optional>
#include <string>

#include "hit/bench.hpp"
#include "hit/generator.hpp"
#include "hit/train.hpp"

namespace hit {

/// Key = value run configuration with a fixed schema; unknown keys are
/// rejected. Every command embeds the resolved configuration in its output
/// header. Generator selection is either `preset = <name>` or one `stage =`
/// line per stage:
///   stage = low res=8 dim=16 heads=2 block=4 repeat=1 mode=multi_axis tail=16
///   stage = high res=32 dim=16 heads=2 repeat=1 tail=0
struct RunConfig {
  std::string preset_name;  // empty = custom stages
  std::vector<std::string> stage_lines;

  std::optional<int64_t> latent_dim;
  std::optional<int64_t> latent_embed_dim;
  std::optional<std::string> norm;  // "batch" | "layer"
  std::optional<bool> cross_mlp;
  std::optional<int64_t> mlp_ratio;

  uint64_t seed = 0;
  std::string out_dir = "out";
  int64_t count = 1;
  int64_t interp_steps = 5;

  std::vector<int64_t> bench_sizes = {256, 1024, 4096};
  std::vector<std::string> bench_modes = {"full", "multi_axis"};
  int64_t bench_repeats = 5;

  int64_t train_steps = 2000;
  int64_t batch = 8;
  double gamma = 10.0;
  double lr = 1e-4;
  double beta1 = 0.0;
  double beta2 = 0.99;
  int64_t eval_every = 100;
  int64_t data_res = 8;
  uint64_t data_seed = 0;

  static RunConfig parse(const std::string& text);
  static RunConfig from_file(const std::string& path);

  GeneratorConfig generator_config() const;
  GanHyper gan_hyper() const;
  BenchConfig bench_config() const;

  /// "# key = value" lines describing the full effective configuration.
  std::string resolved_header() const;
};

}  // namespace hit
