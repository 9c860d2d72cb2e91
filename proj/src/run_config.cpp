#include "hit/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hit {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, sep)) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int64_t r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return r;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " expects an integer, got '" + v + "'");
  }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    uint64_t r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return r;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " expects an unsigned integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return r;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: " + key + " expects a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: " + key + " expects true/false, got '" + v + "'");
}

StageSpec parse_stage_line(const std::string& line) {
  std::istringstream is(line);
  std::string kind;
  is >> kind;
  StageSpec s;
  if (kind == "low") {
    s.kind = StageKind::low_res;
    s.self_attn = SelfAttnSpec{};
  } else if (kind == "high") {
    s.kind = StageKind::high_res;
    s.mlp = MlpSpec{};
  } else {
    throw std::invalid_argument("config: stage kind must be 'low' or 'high', got '" + kind + "'");
  }
  std::string tok;
  bool saw_res = false, saw_dim = false, saw_heads = false, saw_tail = false;
  while (is >> tok) {
    size_t eq = tok.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: stage attribute '" + tok + "' is not key=value");
    }
    std::string k = tok.substr(0, eq);
    std::string v = tok.substr(eq + 1);
    if (k == "res") {
      s.input_res = parse_int("stage res", v);
      saw_res = true;
    } else if (k == "dim") {
      s.cross.dim = parse_int("stage dim", v);
      saw_dim = true;
    } else if (k == "heads") {
      s.cross.heads = parse_int("stage heads", v);
      saw_heads = true;
    } else if (k == "tail") {
      s.tail_dim = parse_int("stage tail", v);
      saw_tail = true;
    } else if (k == "block" && s.self_attn) {
      s.self_attn->block_size = parse_int("stage block", v);
    } else if (k == "repeat") {
      if (s.self_attn) {
        s.self_attn->repeat = parse_int("stage repeat", v);
      } else {
        s.mlp->repeat = parse_int("stage repeat", v);
      }
    } else if (k == "mode" && s.self_attn) {
      s.self_attn->mode = attention_mode_from_name(v);
    } else {
      throw std::invalid_argument("config: unknown stage attribute '" + k + "' for " + kind +
                                  " stage");
    }
  }
  if (!saw_res || !saw_dim || !saw_heads || !saw_tail) {
    throw std::invalid_argument("config: stage needs res=, dim=, heads= and tail=");
  }
  if (s.self_attn) {
    s.self_attn->dim = s.cross.dim;
    s.self_attn->heads = s.cross.heads;
  } else {
    s.mlp->dim = s.cross.dim;
  }
  return s;
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig rc;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: expected 'key = value', got '" + line + "'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw std::invalid_argument("config: empty key or value in '" + line + "'");
    }

    if (key == "preset") {
      rc.preset_name = value;
    } else if (key == "stage") {
      rc.stage_lines.push_back(value);
    } else if (key == "latent_dim") {
      rc.latent_dim = parse_int(key, value);
    } else if (key == "latent_embed_dim") {
      rc.latent_embed_dim = parse_int(key, value);
    } else if (key == "norm") {
      if (value != "batch" && value != "layer") {
        throw std::invalid_argument("config: norm must be batch or layer");
      }
      rc.norm = value;
    } else if (key == "cross_mlp") {
      rc.cross_mlp = parse_bool(key, value);
    } else if (key == "mlp_ratio") {
      rc.mlp_ratio = parse_int(key, value);
    } else if (key == "seed") {
      rc.seed = parse_u64(key, value);
    } else if (key == "out") {
      rc.out_dir = value;
    } else if (key == "count") {
      rc.count = parse_int(key, value);
    } else if (key == "interp_steps") {
      rc.interp_steps = parse_int(key, value);
    } else if (key == "bench_sizes") {
      rc.bench_sizes.clear();
      for (const std::string& t : split(value, ',')) rc.bench_sizes.push_back(parse_int(key, t));
    } else if (key == "bench_modes") {
      rc.bench_modes = split(value, ',');
      for (const std::string& m : rc.bench_modes) attention_mode_from_name(m);
    } else if (key == "bench_repeats") {
      rc.bench_repeats = parse_int(key, value);
    } else if (key == "train_steps") {
      rc.train_steps = parse_int(key, value);
    } else if (key == "batch") {
      rc.batch = parse_int(key, value);
    } else if (key == "gamma") {
      rc.gamma = parse_double(key, value);
    } else if (key == "lr") {
      rc.lr = parse_double(key, value);
    } else if (key == "beta1") {
      rc.beta1 = parse_double(key, value);
    } else if (key == "beta2") {
      rc.beta2 = parse_double(key, value);
    } else if (key == "eval_every") {
      rc.eval_every = parse_int(key, value);
    } else if (key == "data_res") {
      rc.data_res = parse_int(key, value);
    } else if (key == "data_seed") {
      rc.data_seed = parse_u64(key, value);
    } else {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }
  return rc;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse(os.str());
}

GeneratorConfig RunConfig::generator_config() const {
  GeneratorConfig cfg;
  if (!preset_name.empty()) {
    if (!stage_lines.empty()) {
      throw std::invalid_argument("config: give either preset or stage lines, not both");
    }
    cfg = preset(preset_name);
  } else {
    if (stage_lines.empty()) {
      throw std::invalid_argument("config: need a preset or at least one stage line");
    }
    cfg.name = "custom";
    for (const std::string& l : stage_lines) cfg.stages.push_back(parse_stage_line(l));
  }
  if (latent_dim) cfg.latent_dim = *latent_dim;
  if (latent_embed_dim) cfg.latent_embed_dim = *latent_embed_dim;
  if (norm) cfg.norm = *norm == "batch" ? NormKind::batch : NormKind::layer;
  if (cross_mlp) cfg.cross_mlp = *cross_mlp;
  if (mlp_ratio) cfg.mlp_ratio = *mlp_ratio;
  cfg.validate();
  return cfg;
}

GanHyper RunConfig::gan_hyper() const {
  GanHyper h;
  h.gamma = gamma;
  h.lr = lr;
  h.beta1 = beta1;
  h.beta2 = beta2;
  h.batch = batch;
  h.steps = train_steps;
  return h;
}

BenchConfig RunConfig::bench_config() const {
  BenchConfig b;
  b.sizes = bench_sizes;
  b.modes.clear();
  for (const std::string& m : bench_modes) b.modes.push_back(attention_mode_from_name(m));
  b.repeats = bench_repeats;
  b.seed = seed == 0 ? 7 : seed;
  return b;
}

std::string RunConfig::resolved_header() const {
  std::ostringstream os;
  if (!preset_name.empty()) os << "# preset = " << preset_name << "\n";
  for (const std::string& l : stage_lines) os << "# stage = " << l << "\n";
  if (latent_dim) os << "# latent_dim = " << *latent_dim << "\n";
  if (latent_embed_dim) os << "# latent_embed_dim = " << *latent_embed_dim << "\n";
  os << "# norm = " << (norm ? *norm : "batch") << "\n";
  os << "# cross_mlp = " << ((cross_mlp && !*cross_mlp) ? "false" : "true") << "\n";
  os << "# mlp_ratio = " << (mlp_ratio ? *mlp_ratio : 4) << "\n";
  os << "# seed = " << seed << "\n";
  os << "# out = " << out_dir << "\n";
  os << "# count = " << count << "\n";
  os << "# interp_steps = " << interp_steps << "\n";
  os << "# bench_sizes = ";
  for (size_t i = 0; i < bench_sizes.size(); ++i) os << (i ? "," : "") << bench_sizes[i];
  os << "\n# bench_modes = ";
  for (size_t i = 0; i < bench_modes.size(); ++i) os << (i ? "," : "") << bench_modes[i];
  os << "\n# bench_repeats = " << bench_repeats << "\n";
  os << "# train_steps = " << train_steps << "\n";
  os << "# batch = " << batch << "\n";
  os << "# gamma = " << gamma << "\n";
  os << "# lr = " << lr << "\n";
  os << "# beta1 = " << beta1 << "\n";
  os << "# beta2 = " << beta2 << "\n";
  os << "# eval_every = " << eval_every << "\n";
  os << "# data_res = " << data_res << "\n";
  os << "# data_seed = " << data_seed << "\n";
  return os.str();
}

}  // namespace hit
