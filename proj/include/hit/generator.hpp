#pragma once

#include <optional>
#include <string>
#include <unordered_map>

#include "hit/attention.hpp"
#include "hit/rng.hpp"

namespace hit {

enum class StageKind { low_res, high_res };

struct SelfAttnSpec {
  int64_t block_size = 4;
  int64_t dim = 0;
  int64_t heads = 0;
  int64_t repeat = 1;
  AttentionMode mode = AttentionMode::multi_axis;
};

struct CrossAttnSpec {
  int64_t dim = 0;
  int64_t heads = 0;
};

struct MlpSpec {
  int64_t dim = 0;
  int64_t repeat = 1;
};

/// One generator stage. Low-resolution stages carry blocked self-attention,
/// high-resolution stages carry position-wise MLP blocks and contribute to
/// the RGB accumulation. tail_dim is the linear width after the stage's
/// pixel shuffle; 0 marks the final stage (its RGB projection is the
/// "linear, 3-d" tail).
struct StageSpec {
  int64_t input_res = 8;
  StageKind kind = StageKind::low_res;
  CrossAttnSpec cross;
  std::optional<SelfAttnSpec> self_attn;
  std::optional<MlpSpec> mlp;
  int64_t tail_dim = 0;

  int64_t dim() const { return cross.dim; }
};

struct GeneratorConfig {
  std::string name = "custom";
  int64_t latent_dim = 512;
  int64_t latent_embed_dim = 256;  // channel width of the 8x8 latent embedding
  int64_t init_res = 8;
  NormKind norm = NormKind::batch;
  bool cross_mlp = true;  // keep the MLP half of the cross-attention block
  int64_t mlp_ratio = 4;
  std::vector<StageSpec> stages;

  int64_t output_res() const;
  void validate() const;
};

/// Named architectures transcribed from the published stage tables.
GeneratorConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// Attention-stage-count sweep: keep the first n_low stages low-resolution
/// and demote the rest to MLP-only stages with the same width and depth.
GeneratorConfig attention_stage_sweep(GeneratorConfig cfg, int64_t n_low);

/// Ablation variants: override the self-attention mode in every low-res stage.
GeneratorConfig with_attention_mode(GeneratorConfig cfg, AttentionMode mode);

/// A small 3-stage configuration (8 -> 16 -> 32) used for tests and demos.
GeneratorConfig toy_config_32(int64_t dim = 16, int64_t latent = 16);
/// A single-stage 8x8 configuration for toy adversarial training.
GeneratorConfig toy_config_8(int64_t dim = 16, int64_t latent = 8);

// ---------------------------------------------------------------------------

struct LinearParams {
  Tensor w, b;
};

struct NormParams {
  Tensor gamma, beta;
  NormState state;
};

struct MlpParams {
  Tensor w1, b1, w2, b2;
};

struct CrossBlockParams {
  NormParams norm1;
  AttentionWeights attn;
  NormParams norm2;
  MlpParams mlp;
};

struct SelfBlockParams {
  NormParams norm1;
  AttentionWeights attn;
  NormParams norm2;
  MlpParams mlp;
};

struct MlpBlockParams {
  NormParams norm;
  MlpParams mlp;
};

struct StageParams {
  Tensor pos_embed;  // [res, res, d]
  CrossBlockParams cross;
  std::vector<SelfBlockParams> self_blocks;
  std::vector<MlpBlockParams> mlp_blocks;
  LinearParams rgb;   // high-res stages only
  LinearParams tail;  // absent on the final stage
};

struct GeneratorParams {
  GeneratorConfig config;
  uint64_t seed = 0;
  LinearParams x0_proj;  // latent -> 8*8*C0
  LinearParams z_proj;   // latent -> 8*8*C_Z
  Tensor p_z;            // [64, C_Z]
  std::vector<StageParams> stages;
};

/// Allocates and initializes every parameter deterministically from the seed:
/// projections are truncated normal with std 1/sqrt(fan_in), positional
/// embeddings std 0.02, norm scales one, biases zero; batch-norm running
/// stats start at the identity.
GeneratorParams build_generator(const GeneratorConfig& cfg, uint64_t seed);

/// Exact number of trainable scalars build_generator allocates.
int64_t param_count(const GeneratorConfig& cfg);
/// Per-stage counts in stage order, plus the shared prologue as entry 0.
std::vector<std::pair<std::string, int64_t>> param_count_breakdown(const GeneratorConfig& cfg);

/// Every trainable tensor, in allocation order.
void visit_params(GeneratorParams& gp,
                  const std::function<void(const std::string&, Tensor&)>& fn);

/// One-line-per-stage structural description (golden-testable).
std::string structure_dump(const GeneratorConfig& cfg);

// ---------------------------------------------------------------------------

/// Parameters mounted onto a tape: aligned (name, tensor, var) triples.
struct MountedParams {
  std::vector<std::string> names;
  std::vector<Tensor*> tensors;
  std::vector<Var> vars;
  std::unordered_map<const Tensor*, int32_t> index;

  Var of(const Tensor& t) const;
};

MountedParams mount_params(Tape& tape, GeneratorParams& gp, bool trainable = true);

/// Whole-generator forward on one tape (differentiable end to end).
/// z: [batch, latent_dim]; returns the image [batch, R, R, 3].
Var generate_on_tape(Tape& tape, GeneratorParams& gp, const MountedParams& m, Var z,
                     NormMode mode);

/// Generation driver: runs one tape per stage so activations of finished
/// stages are released; the per-stage math is identical to generate_on_tape.
/// Throws with the stage index if activations go non-finite.
Tensor generate(GeneratorParams& gp, const Tensor& z, NormMode mode = NormMode::eval);

/// Images for z = (1-t) z_a + t z_b at `steps` uniform t in [0, 1].
std::vector<Tensor> interpolate(GeneratorParams& gp, const Tensor& z_a, const Tensor& z_b,
                                int64_t steps, NormMode mode = NormMode::eval);

/// Standard-normal latent batch [count, latent_dim] drawn from the seed.
Tensor sample_latents(const GeneratorConfig& cfg, int64_t count, uint64_t seed);

}  // namespace hit
