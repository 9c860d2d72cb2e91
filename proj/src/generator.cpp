#include "hit/generator.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hit {

int64_t GeneratorConfig::output_res() const {
  if (stages.empty()) throw std::invalid_argument("generator config: no stages");
  return stages.back().input_res;
}

void GeneratorConfig::validate() const {
  if (stages.empty()) throw std::invalid_argument("generator config: no stages");
  if (latent_dim <= 0 || latent_embed_dim <= 0 || init_res <= 0 || mlp_ratio < 1) {
    throw std::invalid_argument("generator config: non-positive dimension");
  }
  if (stages.front().input_res != init_res) {
    throw std::invalid_argument("generator config: first stage must start at the initial feature size");
  }
  bool seen_high = false;
  for (size_t i = 0; i < stages.size(); ++i) {
    const StageSpec& s = stages[i];
    const std::string at = "stage " + std::to_string(i + 1);
    if (i > 0 && s.input_res != 2 * stages[i - 1].input_res) {
      throw std::invalid_argument(at + ": resolution must double per stage");
    }
    if (s.cross.dim <= 0 || s.cross.heads <= 0 || s.cross.dim % s.cross.heads != 0) {
      throw std::invalid_argument(at + ": cross-attention heads must divide the stage dim");
    }
    if (s.kind == StageKind::low_res) {
      if (seen_high) throw std::invalid_argument(at + ": low-res stage after a high-res stage");
      if (!s.self_attn || s.mlp) {
        throw std::invalid_argument(at + ": low-res stages carry self-attention and no MLP spec");
      }
      const SelfAttnSpec& a = *s.self_attn;
      if (a.dim != s.cross.dim) throw std::invalid_argument(at + ": self-attention dim mismatch");
      if (a.heads <= 0 || a.dim % a.heads != 0) {
        throw std::invalid_argument(at + ": self-attention heads must divide the stage dim");
      }
      if (a.mode == AttentionMode::multi_axis || a.mode == AttentionMode::axial) {
        if (a.heads % 2 != 0) throw std::invalid_argument(at + ": multi-axis modes need even heads");
      }
      if (a.block_size <= 0 || s.input_res % a.block_size != 0) {
        throw std::invalid_argument(at + ": block size must divide the stage resolution");
      }
      if (a.repeat < 1) throw std::invalid_argument(at + ": repeat count must be positive");
    } else {
      seen_high = true;
      if (s.self_attn || !s.mlp) {
        throw std::invalid_argument(at + ": high-res stages carry an MLP spec and no self-attention");
      }
      if (s.mlp->dim != s.cross.dim) throw std::invalid_argument(at + ": MLP dim mismatch");
      if (s.mlp->repeat < 1) throw std::invalid_argument(at + ": repeat count must be positive");
    }
    const bool last = i + 1 == stages.size();
    if (last) {
      if (s.tail_dim != 0) throw std::invalid_argument(at + ": final stage tail is the 3-channel linear");
      if (s.kind != StageKind::high_res) {
        throw std::invalid_argument(at + ": final stage must be high-res (it emits the image)");
      }
    } else {
      if (s.tail_dim <= 0) throw std::invalid_argument(at + ": non-final stage needs a tail width");
      if (s.dim() % 4 != 0) throw std::invalid_argument(at + ": pixel shuffle needs dim divisible by 4");
      if (stages[i + 1].dim() != s.tail_dim) {
        throw std::invalid_argument(at + ": tail width must equal the next stage dim");
      }
    }
  }
}

namespace {

StageSpec low_stage(int64_t res, int64_t dim, int64_t heads, int64_t block, int64_t repeat,
                    int64_t tail_dim) {
  StageSpec s;
  s.input_res = res;
  s.kind = StageKind::low_res;
  s.cross = {dim, heads};
  s.self_attn = SelfAttnSpec{block, dim, heads, repeat, AttentionMode::multi_axis};
  s.tail_dim = tail_dim;
  return s;
}

StageSpec high_stage(int64_t res, int64_t dim, int64_t heads, int64_t repeat, int64_t tail_dim) {
  StageSpec s;
  s.input_res = res;
  s.kind = StageKind::high_res;
  s.cross = {dim, heads};
  s.mlp = MlpSpec{dim, repeat};
  s.tail_dim = tail_dim;
  return s;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"hit_s_256", "hit_b_256", "hit_l_256", "hit_b_1024", "hit_imagenet_128"};
}

GeneratorConfig preset(const std::string& name) {
  GeneratorConfig cfg;
  cfg.name = name;
  if (name == "hit_s_256") {
    cfg.stages = {
        low_stage(8, 512, 16, 4, 2, 256),  low_stage(16, 256, 8, 4, 2, 128),
        low_stage(32, 128, 4, 8, 1, 64),   low_stage(64, 64, 4, 8, 1, 32),
        high_stage(128, 32, 4, 1, 32),     high_stage(256, 32, 4, 1, 0),
    };
  } else if (name == "hit_b_256") {
    cfg.stages = {
        low_stage(8, 512, 16, 4, 2, 512),  low_stage(16, 512, 8, 4, 2, 256),
        low_stage(32, 256, 4, 8, 2, 128),  low_stage(64, 128, 4, 8, 2, 64),
        high_stage(128, 64, 4, 1, 64),     high_stage(256, 64, 4, 1, 0),
    };
  } else if (name == "hit_l_256") {
    cfg.stages = {
        low_stage(8, 1024, 16, 4, 2, 512), low_stage(16, 512, 8, 4, 2, 256),
        low_stage(32, 256, 4, 8, 2, 128),  low_stage(64, 128, 4, 8, 2, 128),
        high_stage(128, 128, 4, 2, 128),   high_stage(256, 128, 4, 2, 0),
    };
  } else if (name == "hit_b_1024") {
    cfg.stages = {
        low_stage(8, 512, 16, 4, 2, 512),  low_stage(16, 512, 8, 4, 2, 256),
        low_stage(32, 256, 4, 8, 2, 128),  low_stage(64, 128, 4, 8, 2, 64),
        high_stage(128, 64, 4, 1, 64),     high_stage(256, 64, 4, 1, 32),
        high_stage(512, 32, 4, 1, 32),     high_stage(1024, 32, 4, 1, 0),
    };
  } else if (name == "hit_imagenet_128") {
    // same architecture as hit_l_256 with the 256-resolution stage removed
    // and a 256-d latent code
    cfg.latent_dim = 256;
    cfg.stages = {
        low_stage(8, 1024, 16, 4, 2, 512), low_stage(16, 512, 8, 4, 2, 256),
        low_stage(32, 256, 4, 8, 2, 128),  low_stage(64, 128, 4, 8, 2, 128),
        high_stage(128, 128, 4, 2, 0),
    };
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  cfg.validate();
  return cfg;
}

GeneratorConfig attention_stage_sweep(GeneratorConfig cfg, int64_t n_low) {
  if (n_low < 0) throw std::invalid_argument("attention_stage_sweep: negative stage count");
  for (size_t i = 0; i < cfg.stages.size(); ++i) {
    StageSpec& s = cfg.stages[i];
    if (s.kind == StageKind::low_res && static_cast<int64_t>(i) >= n_low) {
      s.kind = StageKind::high_res;
      s.mlp = MlpSpec{s.self_attn->dim, s.self_attn->repeat};
      s.self_attn.reset();
    }
  }
  cfg.name += "[" + std::to_string(n_low) + "]";
  cfg.validate();
  return cfg;
}

GeneratorConfig with_attention_mode(GeneratorConfig cfg, AttentionMode mode) {
  for (StageSpec& s : cfg.stages) {
    if (s.self_attn) s.self_attn->mode = mode;
  }
  cfg.name += std::string("+") + attention_mode_name(mode);
  cfg.validate();
  return cfg;
}

GeneratorConfig toy_config_32(int64_t dim, int64_t latent) {
  GeneratorConfig cfg;
  cfg.name = "toy32";
  cfg.latent_dim = latent;
  cfg.latent_embed_dim = dim;
  cfg.stages = {
      low_stage(8, dim, 2, 4, 1, dim),
      low_stage(16, dim, 2, 4, 1, dim),
      high_stage(32, dim, 2, 1, 0),
  };
  cfg.validate();
  return cfg;
}

GeneratorConfig toy_config_8(int64_t dim, int64_t latent) {
  GeneratorConfig cfg;
  cfg.name = "toy8";
  cfg.latent_dim = latent;
  cfg.latent_embed_dim = dim;
  cfg.stages = {high_stage(8, dim, 2, 1, 0)};
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// allocation walk shared by build_generator and param_count

namespace {

enum class InitKind { projection, pos_embed, ones, zeros };

using Alloc = std::function<Tensor(const std::string&, Shape, InitKind, int64_t fan_in)>;

NormParams make_norm(const std::string& name, int64_t d, const Alloc& alloc) {
  NormParams np;
  np.gamma = alloc(name + ".gamma", {d}, InitKind::ones, 0);
  np.beta = alloc(name + ".beta", {d}, InitKind::zeros, 0);
  np.state.init_identity(d);
  return np;
}

MlpParams make_mlp(const std::string& name, int64_t d, int64_t ratio, const Alloc& alloc) {
  MlpParams mp;
  mp.w1 = alloc(name + ".w1", {d, ratio * d}, InitKind::projection, d);
  mp.b1 = alloc(name + ".b1", {ratio * d}, InitKind::zeros, 0);
  mp.w2 = alloc(name + ".w2", {ratio * d, d}, InitKind::projection, ratio * d);
  mp.b2 = alloc(name + ".b2", {d}, InitKind::zeros, 0);
  return mp;
}

AttentionWeights make_attention(const std::string& name, int64_t h, int64_t d, int64_t kv_in,
                                const Alloc& alloc) {
  const int64_t k = d / h;  // per-head key/value width
  AttentionWeights w;
  w.wq = alloc(name + ".wq", {h, d, k}, InitKind::projection, d);
  w.wk = alloc(name + ".wk", {kv_in, k}, InitKind::projection, kv_in);
  w.wv = alloc(name + ".wv", {kv_in, k}, InitKind::projection, kv_in);
  w.wo = alloc(name + ".wo", {h, d, k}, InitKind::projection, h * k);
  return w;
}

GeneratorParams assemble(const GeneratorConfig& cfg, const Alloc& alloc) {
  cfg.validate();
  GeneratorParams gp;
  gp.config = cfg;
  const int64_t r0 = cfg.init_res;
  const int64_t c0 = cfg.stages.front().dim();
  const int64_t cz = cfg.latent_embed_dim;

  gp.x0_proj.w = alloc("x0_proj.w", {cfg.latent_dim, r0 * r0 * c0}, InitKind::projection,
                       cfg.latent_dim);
  gp.x0_proj.b = alloc("x0_proj.b", {r0 * r0 * c0}, InitKind::zeros, 0);
  gp.z_proj.w = alloc("z_proj.w", {cfg.latent_dim, r0 * r0 * cz}, InitKind::projection,
                      cfg.latent_dim);
  gp.z_proj.b = alloc("z_proj.b", {r0 * r0 * cz}, InitKind::zeros, 0);
  gp.p_z = alloc("p_z", {r0 * r0, cz}, InitKind::pos_embed, 0);

  for (size_t si = 0; si < cfg.stages.size(); ++si) {
    const StageSpec& ss = cfg.stages[si];
    const std::string sn = "stage" + std::to_string(si + 1);
    const int64_t d = ss.dim();
    StageParams sp;
    sp.pos_embed = alloc(sn + ".pos", {ss.input_res, ss.input_res, d}, InitKind::pos_embed, 0);

    sp.cross.norm1 = make_norm(sn + ".cross.norm1", d, alloc);
    sp.cross.attn = make_attention(sn + ".cross", ss.cross.heads, d, cz, alloc);
    if (cfg.cross_mlp) {
      sp.cross.norm2 = make_norm(sn + ".cross.norm2", d, alloc);
      sp.cross.mlp = make_mlp(sn + ".cross.mlp", d, cfg.mlp_ratio, alloc);
    }

    if (ss.kind == StageKind::low_res) {
      for (int64_t r = 0; r < ss.self_attn->repeat; ++r) {
        const std::string bn = sn + ".self" + std::to_string(r);
        SelfBlockParams bp;
        bp.norm1 = make_norm(bn + ".norm1", d, alloc);
        bp.attn = make_attention(bn, ss.self_attn->heads, d, d, alloc);
        bp.norm2 = make_norm(bn + ".norm2", d, alloc);
        bp.mlp = make_mlp(bn + ".mlp", d, cfg.mlp_ratio, alloc);
        sp.self_blocks.push_back(std::move(bp));
      }
    } else {
      for (int64_t r = 0; r < ss.mlp->repeat; ++r) {
        const std::string bn = sn + ".mlp" + std::to_string(r);
        MlpBlockParams bp;
        bp.norm = make_norm(bn + ".norm", d, alloc);
        bp.mlp = make_mlp(bn, d, cfg.mlp_ratio, alloc);
        sp.mlp_blocks.push_back(std::move(bp));
      }
      sp.rgb.w = alloc(sn + ".rgb.w", {d, 3}, InitKind::projection, d);
      sp.rgb.b = alloc(sn + ".rgb.b", {3}, InitKind::zeros, 0);
    }

    if (ss.tail_dim > 0) {
      sp.tail.w = alloc(sn + ".tail.w", {d / 4, ss.tail_dim}, InitKind::projection, d / 4);
      sp.tail.b = alloc(sn + ".tail.b", {ss.tail_dim}, InitKind::zeros, 0);
    }
    gp.stages.push_back(std::move(sp));
  }
  return gp;
}

}  // namespace

GeneratorParams build_generator(const GeneratorConfig& cfg, uint64_t seed) {
  Rng rng(seed);
  GeneratorParams gp = assemble(cfg, [&](const std::string&, Shape shape, InitKind kind,
                                         int64_t fan_in) {
    Tensor t(std::move(shape));
    switch (kind) {
      case InitKind::projection:
        rng.fill_truncated_normal(t, 1.0 / std::sqrt(static_cast<double>(fan_in)));
        break;
      case InitKind::pos_embed: rng.fill_truncated_normal(t, 0.02); break;
      case InitKind::ones:
        for (int64_t i = 0; i < t.size(); ++i) t[i] = 1.0;
        break;
      case InitKind::zeros: break;
    }
    return t;
  });
  gp.seed = seed;
  return gp;
}

int64_t param_count(const GeneratorConfig& cfg) {
  int64_t total = 0;
  assemble(cfg, [&](const std::string&, Shape shape, InitKind, int64_t) {
    total += shape_numel(shape);
    return Tensor();
  });
  return total;
}

std::vector<std::pair<std::string, int64_t>> param_count_breakdown(const GeneratorConfig& cfg) {
  std::vector<std::pair<std::string, int64_t>> out;
  out.emplace_back("shared", 0);
  for (size_t i = 0; i < cfg.stages.size(); ++i) {
    out.emplace_back("stage" + std::to_string(i + 1), 0);
  }
  assemble(cfg, [&](const std::string& name, Shape shape, InitKind, int64_t) {
    size_t slot = 0;
    if (name.rfind("stage", 0) == 0) {
      size_t dot = name.find('.');
      slot = static_cast<size_t>(std::stoi(name.substr(5, dot - 5)));
    }
    out[slot].second += shape_numel(shape);
    return Tensor();
  });
  return out;
}

namespace {

void visit_stage_params(GeneratorParams& gp, size_t si,
                        const std::function<void(const std::string&, Tensor&)>& fn) {
  // same field order as the allocation walk, restricted to one stage
  StageParams& sp = gp.stages[si];
  const std::string sn = "stage" + std::to_string(si + 1);
  auto norm = [&](const std::string& name, NormParams& np) {
    fn(name + ".gamma", np.gamma);
    fn(name + ".beta", np.beta);
  };
  auto mlp = [&](const std::string& name, MlpParams& mp) {
    fn(name + ".w1", mp.w1);
    fn(name + ".b1", mp.b1);
    fn(name + ".w2", mp.w2);
    fn(name + ".b2", mp.b2);
  };
  auto attn = [&](const std::string& name, AttentionWeights& w) {
    fn(name + ".wq", w.wq);
    fn(name + ".wk", w.wk);
    fn(name + ".wv", w.wv);
    fn(name + ".wo", w.wo);
  };
  fn(sn + ".pos", sp.pos_embed);
  norm(sn + ".cross.norm1", sp.cross.norm1);
  attn(sn + ".cross", sp.cross.attn);
  if (gp.config.cross_mlp) {
    norm(sn + ".cross.norm2", sp.cross.norm2);
    mlp(sn + ".cross.mlp", sp.cross.mlp);
  }
  for (size_t r = 0; r < sp.self_blocks.size(); ++r) {
    const std::string bn = sn + ".self" + std::to_string(r);
    norm(bn + ".norm1", sp.self_blocks[r].norm1);
    attn(bn, sp.self_blocks[r].attn);
    norm(bn + ".norm2", sp.self_blocks[r].norm2);
    mlp(bn + ".mlp", sp.self_blocks[r].mlp);
  }
  for (size_t r = 0; r < sp.mlp_blocks.size(); ++r) {
    const std::string bn = sn + ".mlp" + std::to_string(r);
    norm(bn + ".norm", sp.mlp_blocks[r].norm);
    mlp(bn, sp.mlp_blocks[r].mlp);
  }
  if (gp.config.stages[si].kind == StageKind::high_res) {
    fn(sn + ".rgb.w", sp.rgb.w);
    fn(sn + ".rgb.b", sp.rgb.b);
  }
  if (gp.config.stages[si].tail_dim > 0) {
    fn(sn + ".tail.w", sp.tail.w);
    fn(sn + ".tail.b", sp.tail.b);
  }
}

}  // namespace

void visit_params(GeneratorParams& gp,
                  const std::function<void(const std::string&, Tensor&)>& fn) {
  fn("x0_proj.w", gp.x0_proj.w);
  fn("x0_proj.b", gp.x0_proj.b);
  fn("z_proj.w", gp.z_proj.w);
  fn("z_proj.b", gp.z_proj.b);
  fn("p_z", gp.p_z);
  for (size_t si = 0; si < gp.stages.size(); ++si) visit_stage_params(gp, si, fn);
}

std::string structure_dump(const GeneratorConfig& cfg) {
  std::ostringstream os;
  os << cfg.name << ": latent " << cfg.latent_dim << ", latent embedding 8x8x"
     << cfg.latent_embed_dim << ", norm "
     << (cfg.norm == NormKind::batch ? "batch" : "layer") << ", mlp ratio " << cfg.mlp_ratio
     << "\n";
  for (size_t i = 0; i < cfg.stages.size(); ++i) {
    const StageSpec& s = cfg.stages[i];
    os << "stage " << (i + 1) << ": in " << s.input_res << "x" << s.input_res << " "
       << (s.kind == StageKind::low_res ? "low_res" : "high_res") << " cross(dim " << s.cross.dim
       << ", heads " << s.cross.heads << ")";
    if (s.self_attn) {
      os << " self{block " << s.self_attn->block_size << "x" << s.self_attn->block_size
         << ", dim " << s.self_attn->dim << ", heads " << s.self_attn->heads << ", mode "
         << attention_mode_name(s.self_attn->mode) << "} x" << s.self_attn->repeat;
    }
    if (s.mlp) os << " mlp|dim " << s.mlp->dim << "| x" << s.mlp->repeat;
    if (s.tail_dim > 0) {
      os << " tail pixel_shuffle->" << s.tail_dim << "-d";
    } else {
      os << " tail linear->3-d";
    }
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// forward

Var MountedParams::of(const Tensor& t) const {
  auto it = index.find(&t);
  if (it == index.end()) throw std::logic_error("parameter not mounted on this tape");
  return vars[static_cast<size_t>(it->second)];
}

namespace {

void mount_one(Tape& tape, MountedParams& m, const std::string& name, Tensor& t, bool trainable) {
  m.names.push_back(name);
  m.tensors.push_back(&t);
  m.vars.push_back(trainable ? tape.param(t) : tape.constant(t));
  m.index.emplace(&t, static_cast<int32_t>(m.vars.size()) - 1);
}

MountedParams mount_stage_constants(Tape& tape, GeneratorParams& gp, size_t si) {
  MountedParams m;
  mount_one(tape, m, "p_z", gp.p_z, false);
  visit_stage_params(gp, si, [&](const std::string& name, Tensor& t) {
    mount_one(tape, m, name, t, false);
  });
  return m;
}

struct StageResult {
  Var x_next;  // undefined after the final stage
  Var image;
};

AttentionWeightVars mounted_attention(const MountedParams& m, const AttentionWeights& w) {
  return {m.of(w.wq), m.of(w.wk), m.of(w.wv), m.of(w.wo)};
}

NormVars mounted_norm(const MountedParams& m, NormParams& np, NormKind kind) {
  return {m.of(np.gamma), m.of(np.beta), kind == NormKind::batch ? &np.state : nullptr};
}

MlpVars mounted_mlp(const MountedParams& m, const MlpParams& mp) {
  return {m.of(mp.w1), m.of(mp.b1), m.of(mp.w2), m.of(mp.b2)};
}

StageResult stage_forward(GeneratorParams& gp, size_t si, const MountedParams& m, Var x,
                          Var z_raw, Var image, NormMode mode) {
  const GeneratorConfig& cfg = gp.config;
  const StageSpec& ss = cfg.stages[si];
  StageParams& sp = gp.stages[si];
  const int64_t b = x.value().extent(0);
  const int64_t res = ss.input_res;
  const int64_t d = ss.dim();

  x = add_broadcast(x, m.of(sp.pos_embed));
  Var xs = reshape(x, {b, res * res, d});

  // cross-attention self-modulation block
  {
    AttentionWeightVars cw = mounted_attention(m, sp.cross.attn);
    Var pz = m.of(gp.p_z);
    auto inner = [&](Var q) { return cross_attention_mqa(q, z_raw, pz, cw); };
    NormVars n1 = mounted_norm(m, sp.cross.norm1, cfg.norm);
    if (cfg.cross_mlp) {
      NormVars n2 = mounted_norm(m, sp.cross.norm2, cfg.norm);
      MlpVars mv = mounted_mlp(m, sp.cross.mlp);
      xs = attention_block(xs, inner, cfg.norm, mode, n1, &mv, &n2);
    } else {
      xs = attention_block(xs, inner, cfg.norm, mode, n1, nullptr, nullptr);
    }
  }
  Var x4 = reshape(xs, {b, res, res, d});

  if (ss.kind == StageKind::low_res) {
    const SelfAttnSpec& sa = *ss.self_attn;
    if (sa.mode == AttentionMode::axial) {
      for (size_t r = 0; r < sp.self_blocks.size(); ++r) {
        SelfBlockParams& bp = sp.self_blocks[r];
        AttentionWeightVars w = mounted_attention(m, bp.attn);
        auto inner = [&](Var q) { return axial_attention(q, w); };
        NormVars n1 = mounted_norm(m, bp.norm1, cfg.norm);
        NormVars n2 = mounted_norm(m, bp.norm2, cfg.norm);
        MlpVars mv = mounted_mlp(m, bp.mlp);
        x4 = attention_block(x4, inner, cfg.norm, mode, n1, &mv, &n2);
      }
    } else if (sa.mode == AttentionMode::full) {
      Var seq = reshape(x4, {b, res * res, d});
      for (size_t r = 0; r < sp.self_blocks.size(); ++r) {
        SelfBlockParams& bp = sp.self_blocks[r];
        AttentionWeightVars w = mounted_attention(m, bp.attn);
        auto inner = [&](Var q) { return full_attention_oracle(q, w); };
        NormVars n1 = mounted_norm(m, bp.norm1, cfg.norm);
        NormVars n2 = mounted_norm(m, bp.norm2, cfg.norm);
        MlpVars mv = mounted_mlp(m, bp.mlp);
        seq = attention_block(seq, inner, cfg.norm, mode, n1, &mv, &n2);
      }
      x4 = reshape(seq, {b, res, res, d});
    } else {
      BlockedVar blk = block(x4, sa.block_size);
      for (size_t r = 0; r < sp.self_blocks.size(); ++r) {
        SelfBlockParams& bp = sp.self_blocks[r];
        AttentionWeightVars w = mounted_attention(m, bp.attn);
        AttentionMode eff = sa.mode;
        if (eff == AttentionMode::interleaved) {
          eff = r % 2 == 0 ? AttentionMode::regional_only : AttentionMode::dilated_only;
        }
        auto inner = [&](Var q) {
          BlockedVar qb = blk;
          qb.data = q;
          return multi_axis_attention(qb, qb, w, eff).data;
        };
        NormVars n1 = mounted_norm(m, bp.norm1, cfg.norm);
        NormVars n2 = mounted_norm(m, bp.norm2, cfg.norm);
        MlpVars mv = mounted_mlp(m, bp.mlp);
        blk.data = attention_block(blk.data, inner, cfg.norm, mode, n1, &mv, &n2);
      }
      x4 = unblock(blk);
    }
  } else {
    Var seq = reshape(x4, {b, res * res, d});
    for (size_t r = 0; r < sp.mlp_blocks.size(); ++r) {
      MlpBlockParams& bp = sp.mlp_blocks[r];
      NormVars n = mounted_norm(m, bp.norm, cfg.norm);
      MlpVars mv = mounted_mlp(m, bp.mlp);
      seq = residual_mlp_block(seq, cfg.norm, mode, n, mv);
    }
    x4 = reshape(seq, {b, res, res, d});
    Var rgb = affine(x4, m.of(sp.rgb.w), m.of(sp.rgb.b));
    image = image.defined() ? add(nearest_upsample(image), rgb) : rgb;
  }

  StageResult out;
  out.image = image;
  if (ss.tail_dim > 0) {
    out.x_next = affine(pixel_shuffle(x4), m.of(sp.tail.w), m.of(sp.tail.b));
  }
  return out;
}

}  // namespace

MountedParams mount_params(Tape& tape, GeneratorParams& gp, bool trainable) {
  MountedParams m;
  visit_params(gp, [&](const std::string& name, Tensor& t) {
    mount_one(tape, m, name, t, trainable);
  });
  return m;
}

Var generate_on_tape(Tape& tape, GeneratorParams& gp, const MountedParams& m, Var z,
                     NormMode mode) {
  (void)tape;
  const GeneratorConfig& cfg = gp.config;
  if (z.value().rank() != 2 || z.value().extent(1) != cfg.latent_dim) {
    throw std::invalid_argument("generate: latent batch must be [b, " +
                                std::to_string(cfg.latent_dim) + "]");
  }
  const int64_t b = z.value().extent(0);
  const int64_t r0 = cfg.init_res;
  const int64_t c0 = cfg.stages.front().dim();
  const int64_t cz = cfg.latent_embed_dim;

  Var x = reshape(affine(z, m.of(gp.x0_proj.w), m.of(gp.x0_proj.b)), {b, r0, r0, c0});
  Var z_raw = reshape(affine(z, m.of(gp.z_proj.w), m.of(gp.z_proj.b)), {b, r0 * r0, cz});

  Var image;
  for (size_t si = 0; si < cfg.stages.size(); ++si) {
    StageResult r = stage_forward(gp, si, m, x, z_raw, image, mode);
    image = r.image;
    x = r.x_next;
  }
  return image;
}

Tensor generate(GeneratorParams& gp, const Tensor& z, NormMode mode) {
  const GeneratorConfig& cfg = gp.config;
  if (z.rank() != 2 || z.extent(1) != cfg.latent_dim) {
    throw std::invalid_argument("generate: latent batch must be [b, " +
                                std::to_string(cfg.latent_dim) + "]");
  }
  if (!z.all_finite()) throw std::invalid_argument("generate: latent code must be finite");
  const int64_t b = z.extent(0);
  const int64_t r0 = cfg.init_res;
  const int64_t c0 = cfg.stages.front().dim();
  const int64_t cz = cfg.latent_embed_dim;

  // one tape per stage keeps only live activations resident
  Tensor x_val, zr_val, img_val;
  {
    Tape tape;
    Var zv = tape.constant(z);
    Var x = reshape(affine(zv, tape.constant(gp.x0_proj.w), tape.constant(gp.x0_proj.b)),
                    {b, r0, r0, c0});
    Var zr = reshape(affine(zv, tape.constant(gp.z_proj.w), tape.constant(gp.z_proj.b)),
                     {b, r0 * r0, cz});
    x_val = x.value();
    zr_val = zr.value();
  }

  bool have_image = false;
  for (size_t si = 0; si < cfg.stages.size(); ++si) {
    Tape tape;
    MountedParams m = mount_stage_constants(tape, gp, si);
    Var x = tape.constant(std::move(x_val));
    Var zr = tape.constant(zr_val);
    Var img = have_image ? tape.constant(std::move(img_val)) : Var{};
    StageResult r = stage_forward(gp, si, m, x, zr, img, mode);
    if (r.image.defined()) {
      img_val = r.image.value();
      have_image = true;
      if (!img_val.all_finite()) {
        throw std::runtime_error("generate: non-finite activations at stage " +
                                 std::to_string(si + 1));
      }
    }
    if (r.x_next.defined()) {
      x_val = r.x_next.value();
      if (!x_val.all_finite()) {
        throw std::runtime_error("generate: non-finite activations at stage " +
                                 std::to_string(si + 1));
      }
    }
  }
  return img_val;
}

std::vector<Tensor> interpolate(GeneratorParams& gp, const Tensor& z_a, const Tensor& z_b,
                                int64_t steps, NormMode mode) {
  if (steps < 2) throw std::invalid_argument("interpolate: need at least 2 steps");
  if (!z_a.same_shape(z_b)) throw std::invalid_argument("interpolate: latent shapes differ");
  std::vector<Tensor> out;
  for (int64_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(steps - 1);
    Tensor z(z_a.shape());
    for (int64_t j = 0; j < z.size(); ++j) z[j] = (1.0 - t) * z_a[j] + t * z_b[j];
    out.push_back(generate(gp, z, mode));
  }
  return out;
}

Tensor sample_latents(const GeneratorConfig& cfg, int64_t count, uint64_t seed) {
  Rng rng(seed);
  return rng.normal_tensor({count, cfg.latent_dim});
}

}  // namespace hit
