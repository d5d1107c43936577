#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "slotvid/core/ops.hpp"
#include "slotvid/core/rng.hpp"
#include "slotvid/core/tensor.hpp"
#include "slotvid/data/synth.hpp"

namespace slotvid {

struct ModelConfig {
  int64_t patch = 7;
  int64_t d_backbone = 32;   // backbone feature channels
  int64_t color_channels = 6;  // mean-color channels of the embedder
  Real color_gain = 2.0;
  int64_t pos_channels = 4;  // trailing patch-position channels
  Real pos_gain = 1.0;
  int64_t d_encoder = 48;
  int64_t d_slot = 48;
  int64_t d_project = 16;  // shared output width of the projection heads
  int64_t num_slots = 5;
  int64_t slot_iters = 2;
  int64_t first_frame_iters = 3;
  int64_t enc_hidden = 48;
  int64_t dec_hidden = 48;
  int64_t head_hidden = 32;
};

// Frozen stand-in for a pretrained patch backbone: a seeded random linear
// map of raw patch pixels, gain-weighted mean-color channels, and patch-
// position channels (pretrained ViT features likewise mix appearance with
// position). Produces sharp but noisy per-patch features and never trains.
struct Embedder {
  int64_t patch = 7;
  int64_t feature_dim = 32;
  int64_t color_channels = 6;
  Real color_gain = 2.0;
  int64_t pos_channels = 4;
  Real pos_gain = 1.0;
  Tensor proj;  // [patch*patch*3, feature_dim - color_channels - pos_channels]
};

Embedder make_embedder(const ModelConfig& cfg, uint64_t seed);

// [T, N, D_b], detached; errors when H or W is not divisible by the patch.
Tensor extract_backbone_features(const VideoSample& video,
                                 const Embedder& emb);

struct MlpParams {
  Tensor w1, b1, w2, b2;
};

struct SlotAttentionParams {
  Tensor mu, log_sigma;        // frame-1 slot initialization
  Tensor ln_in_g, ln_in_b;     // feature norm
  Tensor ln_slot_g, ln_slot_b;  // slot norm before the query projection
  Tensor ln_mlp_g, ln_mlp_b;   // norm before the residual MLP
  Tensor wq, wk, wv;
  GruParams gru;
  MlpParams mlp;
};

struct DecoderParams {
  Tensor pos;  // [N, D_s] learned positional embedding
  Tensor w_slot, w_pos, b1;
  Tensor w2, b2;
  Tensor w_feat, b_feat;
  Tensor w_alpha, b_alpha;
};

struct ModelParams {
  ModelConfig cfg;
  int64_t num_patches = 0;
  MlpParams encoder;
  SlotAttentionParams slot_attn;
  MlpParams predictor;
  DecoderParams decoder;
  MlpParams head_z, head_y, head_v;
};

ModelParams init_model_params(const ModelConfig& cfg, int64_t num_patches,
                              uint64_t seed);

// Named handles to every trainable tensor, in a fixed traversal order.
struct ParamRegistry {
  std::vector<std::pair<std::string, Tensor>> items;

  void add(const std::string& name, const Tensor& t) {
    items.emplace_back(name, t);
  }
  const Tensor* find(const std::string& name) const {
    for (const auto& [n, t] : items)
      if (n == name) return &t;
    return nullptr;
  }
  std::vector<Tensor> tensors() const {
    std::vector<Tensor> out;
    out.reserve(items.size());
    for (const auto& [n, t] : items) out.push_back(t);
    return out;
  }
};

ParamRegistry register_params(ModelParams& p);

// One frame of iterative slot refinement. feats_t: [N, D_e], init_slots:
// [S, D_s]. Returns final slots [S, D_s] and the final-iteration attention
// [S, N], whose per-patch columns sum to 1.
std::pair<Tensor, Tensor> slot_attention_frame(
    const Tensor& feats_t, const Tensor& init_slots,
    const SlotAttentionParams& p, int64_t n_iters);

// Residual MLP transition from one frame's slots to the next frame's
// initialization. Zero weights give the identity map.
Tensor propagate_slots(const Tensor& slots_prev, const MlpParams& predictor);

Tensor encode(const Tensor& backbone, const MlpParams& encoder);

struct DecodeResult {
  Tensor decoded;   // [T, N, D_b]
  Tensor mask;      // [S, T, N]
  Tensor per_slot;  // [S, T, N, D_b]
};

DecodeResult decode(const Tensor& slots, const DecoderParams& p, int64_t N);

struct ModelOutput {
  Tensor backbone;  // [T, N, D_b], detached
  Tensor encoded;   // [T, N, D_e]
  Tensor slots;     // [T, S, D_s]
  Tensor attn;      // [S, T, N]
  Tensor mask;      // [S, T, N]
  Tensor per_slot;  // [S, T, N, D_b]
  Tensor decoded;   // [T, N, D_b]
  Tensor z, y, v;   // [T, N, C]
};

// Full video forward pass. noise_seed drives the frame-1 slot sample; every
// other part is a pure function of the inputs and parameters.
ModelOutput forward_video(const Tensor& backbone, const ModelParams& p,
                          uint64_t noise_seed);

struct PseudoLabels {
  int64_t T = 0, N = 0;
  std::vector<int32_t> l_attn, l_mask;  // flattened [T, N], values in [0, S)
};

// Per-patch argmax over slots of each map; ties go to the lowest slot index.
PseudoLabels pseudo_labels(const Tensor& attn, const Tensor& mask);

}  // namespace slotvid
