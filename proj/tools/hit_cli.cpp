// Command-line front end: verification suites, the attention complexity
// benchmark, toy adversarial training, sample generation, latent
// interpolation and parameter counting.

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "hit/bench.hpp"
#include "hit/image_io.hpp"
#include "hit/run_config.hpp"
#include "hit/verify.hpp"

namespace fs = std::filesystem;
using namespace hit;

namespace {

// latent stream for one image; shared by generate and interpolate so that
// interpolation endpoints byte-match generated samples for the same seed
Tensor latent_for(const GeneratorConfig& cfg, uint64_t seed) {
  return sample_latents(cfg, 1, seed ^ 0x6a09e667f3bcc909ull);
}

RunConfig load_config(const std::string& config_path, const std::string& preset_name,
                      uint64_t seed, bool seed_set, const std::string& out_dir) {
  RunConfig rc;
  if (!config_path.empty()) rc = RunConfig::from_file(config_path);
  if (!preset_name.empty()) {
    rc.preset_name = preset_name;
    rc.stage_lines.clear();
  }
  if (seed_set) rc.seed = seed;
  if (!out_dir.empty()) rc.out_dir = out_dir;
  return rc;
}

int cmd_verify(const std::string& suite, uint64_t seed) {
  VerifyOptions opt;
  if (seed != 0) opt.seed = seed;
  std::vector<PropertyResult> results = verify_suite(suite, opt);
  print_report(std::cout, results);
  std::cout << (all_pass(results) ? "ALL PASS" : "FAILURES PRESENT") << " (" << results.size()
            << " properties)\n";
  return all_pass(results) ? 0 : 1;
}

int cmd_bench(const RunConfig& rc) {
  BenchConfig bc = rc.bench_config();
  std::vector<BenchRow> rows = run_bench(bc);

  // the sqrt(N) saving must hold exactly wherever both kernels ran
  for (const BenchRow& a : rows) {
    if (a.mode != AttentionMode::full || a.skipped) continue;
    for (const BenchRow& b : rows) {
      if (b.mode != AttentionMode::multi_axis || b.n != a.n || b.skipped) continue;
      const int64_t s = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(a.n))));
      if (a.logit_count % b.logit_count != 0 || a.logit_count / b.logit_count != s) {
        std::cerr << "bench: logit ratio at N=" << a.n << " is not sqrt(N)\n";
        return 1;
      }
    }
  }

  fs::create_directories(rc.out_dir);
  const std::string path = rc.out_dir + "/bench.csv";
  std::ofstream out(path, std::ios::binary);
  write_bench_csv(out, rows, rc.resolved_header());
  write_bench_csv(std::cout, rows);
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_generate(RunConfig& rc) {
  GeneratorConfig cfg = rc.generator_config();
  GeneratorParams gp = build_generator(cfg, rc.seed);
  fs::create_directories(rc.out_dir);
  std::ostringstream manifest;
  manifest << rc.resolved_header();
  for (int64_t i = 0; i < rc.count; ++i) {
    const uint64_t latent_seed = rc.seed + static_cast<uint64_t>(i);
    Tensor z = latent_for(cfg, latent_seed);
    Tensor img = generate(gp, z);
    char name[64];
    std::snprintf(name, sizeof(name), "image_%04lld.ppm", static_cast<long long>(i));
    write_ppm(rc.out_dir + "/" + name, img);
    manifest << name << " latent_seed " << latent_seed << "\n";
    std::cout << "wrote " << rc.out_dir << "/" << name << "\n";
  }
  write_file(rc.out_dir + "/manifest.txt", manifest.str());
  return 0;
}

int cmd_interpolate(RunConfig& rc, uint64_t seed_a, uint64_t seed_b) {
  GeneratorConfig cfg = rc.generator_config();
  GeneratorParams gp = build_generator(cfg, rc.seed);
  Tensor za = latent_for(cfg, seed_a);
  Tensor zb = latent_for(cfg, seed_b);
  std::vector<Tensor> frames = interpolate(gp, za, zb, rc.interp_steps);
  fs::create_directories(rc.out_dir);
  std::ostringstream manifest;
  manifest << rc.resolved_header();
  manifest << "# interpolation: seed_a " << seed_a << " seed_b " << seed_b << "\n";
  for (size_t i = 0; i < frames.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "interp_%04lld.ppm", static_cast<long long>(i));
    write_ppm(rc.out_dir + "/" + name, frames[i]);
    manifest << name << " t " << (static_cast<double>(i) / static_cast<double>(frames.size() - 1))
             << "\n";
    std::cout << "wrote " << rc.out_dir << "/" << name << "\n";
  }
  write_file(rc.out_dir + "/manifest.txt", manifest.str());
  return 0;
}

int cmd_params(const RunConfig& rc) {
  GeneratorConfig cfg = rc.generator_config();
  std::cout << structure_dump(cfg);
  auto breakdown = param_count_breakdown(cfg);
  int64_t total = 0;
  for (const auto& [name, count] : breakdown) {
    std::cout << name << ": " << count << "\n";
    total += count;
  }
  std::cout << "total: " << total << " (" << std::fixed << std::setprecision(2)
            << static_cast<double>(total) / 1e6 << "M)\n";
  std::cout.unsetf(std::ios::fixed);

  // published reference sizes, in millions
  double reference = 0.0;
  if (cfg.name == "hit_s_256") reference = 38.01;
  if (cfg.name == "hit_b_256") reference = 46.22;
  if (cfg.name == "hit_l_256") reference = 97.46;
  if (reference > 0.0) {
    const double dev = (static_cast<double>(total) / 1e6 - reference) / reference;
    std::cout << std::fixed << std::setprecision(2) << "reference: " << reference
              << "M, deviation " << std::showpos << dev * 100.0 << "%\n"
              << std::noshowpos;
    std::cout.unsetf(std::ios::fixed);
  }
  return 0;
}

int cmd_train(RunConfig& rc) {
  GeneratorConfig cfg = rc.generator_config();
  GeneratorParams gp = build_generator(cfg, rc.seed);
  BlobDataset data;
  data.res = rc.data_res;
  data.seed = rc.data_seed;
  ToyDiscriminator disc = ToyDiscriminator::build(data.res * data.res * 3, 64, rc.seed + 0x5151);
  GanHyper hyper = rc.gan_hyper();
  TrainResult result = train_toy(gp, disc, hyper, data, rc.seed, rc.eval_every, &std::cout);

  fs::create_directories(rc.out_dir);
  const std::string path = rc.out_dir + "/train_trace.csv";
  std::ofstream out(path, std::ios::binary);
  write_trace_csv(out, result.trace, rc.resolved_header());
  std::cout << "initial moment distance " << result.initial_moment << "\n";
  std::cout << "final moment distance   " << result.final_moment << "\n";
  std::cout << "wrote " << path << "\n";
  const bool halved = result.final_moment < 0.5 * result.initial_moment;
  std::cout << (halved ? "moment distance halved" : "moment distance NOT halved") << "\n";
  return halved ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HiT generator reference: verification, benchmark, toy training, sampling"};
  app.require_subcommand(1);

  std::string config_path, preset_name, out_dir;
  uint64_t seed = 0;
  bool seed_set = false;
  app.add_option("--config", config_path, "run configuration file (key = value lines)");
  app.add_option("--preset", preset_name, "generator preset name")
      ->check(CLI::IsMember(preset_names()));
  app.add_option("--seed", seed, "seed override")->each([&seed_set](const std::string&) {
    seed_set = true;
  });
  app.add_option("--out", out_dir, "output directory override");

  auto* verify = app.add_subcommand("verify", "run a property suite and report pass/fail");
  std::string suite = "all";
  verify->add_option("suite", suite, "gradcheck | equivalence | roundtrip | all");

  auto* bench = app.add_subcommand("bench", "attention complexity benchmark (f32 kernels)");
  std::string sizes_arg, modes_arg;
  int64_t repeats_arg = 0;
  bench->add_option("--sizes", sizes_arg, "comma-separated N values (perfect squares)");
  bench->add_option("--modes", modes_arg, "comma-separated attention modes");
  bench->add_option("--repeats", repeats_arg, "timing repeats per cell");

  auto* generate = app.add_subcommand("generate", "sample images to PPM files");
  int64_t count_arg = 0;
  generate->add_option("--count", count_arg, "number of images");

  auto* interpolate = app.add_subcommand("interpolate", "latent linear morphing");
  uint64_t seed_a = 0, seed_b = 1;
  int64_t steps_arg = 0;
  interpolate->add_option("--seed-a", seed_a, "latent seed of the first endpoint")->required();
  interpolate->add_option("--seed-b", seed_b, "latent seed of the second endpoint")->required();
  interpolate->add_option("--steps", steps_arg, "number of frames (>= 2)");

  auto* params = app.add_subcommand("params", "structure and parameter counts");
  std::string params_preset;
  params->add_option("name", params_preset, "preset name (or use --config)");

  auto* train = app.add_subcommand("train", "toy adversarial training on synthetic blobs");
  int64_t train_steps_arg = 0;
  train->add_option("--steps", train_steps_arg, "training steps");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig rc = load_config(config_path, preset_name, seed, seed_set, out_dir);
    if (verify->parsed()) return cmd_verify(suite, seed_set ? seed : 0);
    if (bench->parsed()) {
      if (!sizes_arg.empty()) {
        rc.bench_sizes.clear();
        std::istringstream is(sizes_arg);
        std::string tok;
        while (std::getline(is, tok, ',')) rc.bench_sizes.push_back(std::stoll(tok));
      }
      if (!modes_arg.empty()) {
        rc.bench_modes.clear();
        std::istringstream is(modes_arg);
        std::string tok;
        while (std::getline(is, tok, ',')) rc.bench_modes.push_back(tok);
      }
      if (repeats_arg > 0) rc.bench_repeats = repeats_arg;
      return cmd_bench(rc);
    }
    if (generate->parsed()) {
      if (count_arg > 0) rc.count = count_arg;
      return cmd_generate(rc);
    }
    if (interpolate->parsed()) {
      if (steps_arg > 0) rc.interp_steps = steps_arg;
      return cmd_interpolate(rc, seed_a, seed_b);
    }
    if (params->parsed()) {
      if (!params_preset.empty()) {
        rc.preset_name = params_preset;
        rc.stage_lines.clear();
      }
      return cmd_params(rc);
    }
    if (train->parsed()) {
      if (train_steps_arg > 0) rc.train_steps = train_steps_arg;
      return cmd_train(rc);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
