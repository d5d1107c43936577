#include <cmath>

#include "slotvid/model/model.hpp"

namespace slotvid {

namespace {

Tensor dense(Rng& rng, int64_t in_dim, int64_t out_dim, Real gain = 1.0) {
  Tensor t = Tensor::zeros({in_dim, out_dim}, true);
  const Real s = gain / std::sqrt(static_cast<Real>(in_dim));
  for (auto& v : t.data()) v = rng.normal() * s;
  return t;
}

Tensor bias(int64_t n) { return Tensor::zeros({n}, true); }

Tensor ones_param(int64_t n) { return Tensor::full({n}, 1.0, true); }

MlpParams mlp(Rng& rng, int64_t in_dim, int64_t hidden, int64_t out_dim) {
  MlpParams m;
  m.w1 = dense(rng, in_dim, hidden);
  m.b1 = bias(hidden);
  m.w2 = dense(rng, hidden, out_dim);
  m.b2 = bias(out_dim);
  return m;
}

void register_mlp(ParamRegistry& reg, const std::string& prefix,
                  MlpParams& m) {
  reg.add(prefix + ".w1", m.w1);
  reg.add(prefix + ".b1", m.b1);
  reg.add(prefix + ".w2", m.w2);
  reg.add(prefix + ".b2", m.b2);
}

}  // namespace

ModelParams init_model_params(const ModelConfig& cfg, int64_t num_patches,
                              uint64_t seed) {
  if (num_patches <= 0)
    fail("model needs a positive patch count, got " +
         std::to_string(num_patches));
  ModelParams p;
  p.cfg = cfg;
  p.num_patches = num_patches;
  Rng rng(seed);

  p.encoder = mlp(rng, cfg.d_backbone, cfg.enc_hidden, cfg.d_encoder);

  auto& sa = p.slot_attn;
  sa.mu = Tensor::zeros({cfg.d_slot}, true);
  for (auto& v : sa.mu.data()) v = rng.normal();
  sa.log_sigma = Tensor::zeros({cfg.d_slot}, true);  // unit sampling noise
  sa.ln_in_g = ones_param(cfg.d_encoder);
  sa.ln_in_b = bias(cfg.d_encoder);
  sa.ln_slot_g = ones_param(cfg.d_slot);
  sa.ln_slot_b = bias(cfg.d_slot);
  sa.ln_mlp_g = ones_param(cfg.d_slot);
  sa.ln_mlp_b = bias(cfg.d_slot);
  // Sharper-than-unit query/key gain: with only a few refinement iterations
  // per frame the attention needs contrast from the very first steps.
  sa.wq = dense(rng, cfg.d_slot, cfg.d_slot, 2.0);
  sa.wk = dense(rng, cfg.d_encoder, cfg.d_slot, 2.0);
  sa.wv = dense(rng, cfg.d_encoder, cfg.d_slot);
  sa.gru.wr = dense(rng, cfg.d_slot, cfg.d_slot);
  sa.gru.ur = dense(rng, cfg.d_slot, cfg.d_slot);
  sa.gru.br = bias(cfg.d_slot);
  sa.gru.wz = dense(rng, cfg.d_slot, cfg.d_slot);
  sa.gru.uz = dense(rng, cfg.d_slot, cfg.d_slot);
  sa.gru.bz = bias(cfg.d_slot);
  sa.gru.wn = dense(rng, cfg.d_slot, cfg.d_slot);
  sa.gru.un = dense(rng, cfg.d_slot, cfg.d_slot);
  sa.gru.bn = bias(cfg.d_slot);
  sa.mlp = mlp(rng, cfg.d_slot, cfg.d_slot, cfg.d_slot);

  p.predictor = mlp(rng, cfg.d_slot, cfg.d_slot, cfg.d_slot);

  auto& dec = p.decoder;
  dec.pos = Tensor::zeros({num_patches, cfg.d_slot}, true);
  for (auto& v : dec.pos.data()) v = rng.normal() * 0.5;
  // The slot pathway starts louder than the positional one so early masks
  // reflect slot content rather than a shared positional prior.
  dec.w_slot = dense(rng, cfg.d_slot, cfg.dec_hidden, 2.0);
  dec.w_pos = dense(rng, cfg.d_slot, cfg.dec_hidden, 0.5);
  dec.b1 = bias(cfg.dec_hidden);
  dec.w2 = dense(rng, cfg.dec_hidden, cfg.dec_hidden);
  dec.b2 = bias(cfg.dec_hidden);
  dec.w_feat = dense(rng, cfg.dec_hidden, cfg.d_backbone);
  dec.b_feat = bias(cfg.d_backbone);
  dec.w_alpha = dense(rng, cfg.dec_hidden, 1);
  dec.b_alpha = bias(1);

  p.head_z = mlp(rng, cfg.d_backbone, cfg.head_hidden, cfg.d_project);
  p.head_y = mlp(rng, cfg.d_backbone, cfg.head_hidden, cfg.d_project);
  p.head_v = mlp(rng, cfg.d_encoder, cfg.head_hidden, cfg.d_project);
  return p;
}

ParamRegistry register_params(ModelParams& p) {
  ParamRegistry reg;
  register_mlp(reg, "enc", p.encoder);
  auto& sa = p.slot_attn;
  reg.add("sa.mu", sa.mu);
  reg.add("sa.log_sigma", sa.log_sigma);
  reg.add("sa.ln_in_g", sa.ln_in_g);
  reg.add("sa.ln_in_b", sa.ln_in_b);
  reg.add("sa.ln_slot_g", sa.ln_slot_g);
  reg.add("sa.ln_slot_b", sa.ln_slot_b);
  reg.add("sa.ln_mlp_g", sa.ln_mlp_g);
  reg.add("sa.ln_mlp_b", sa.ln_mlp_b);
  reg.add("sa.wq", sa.wq);
  reg.add("sa.wk", sa.wk);
  reg.add("sa.wv", sa.wv);
  reg.add("sa.gru.wr", sa.gru.wr);
  reg.add("sa.gru.ur", sa.gru.ur);
  reg.add("sa.gru.br", sa.gru.br);
  reg.add("sa.gru.wz", sa.gru.wz);
  reg.add("sa.gru.uz", sa.gru.uz);
  reg.add("sa.gru.bz", sa.gru.bz);
  reg.add("sa.gru.wn", sa.gru.wn);
  reg.add("sa.gru.un", sa.gru.un);
  reg.add("sa.gru.bn", sa.gru.bn);
  register_mlp(reg, "sa.mlp", sa.mlp);
  register_mlp(reg, "pred", p.predictor);
  auto& dec = p.decoder;
  reg.add("dec.pos", dec.pos);
  reg.add("dec.w_slot", dec.w_slot);
  reg.add("dec.w_pos", dec.w_pos);
  reg.add("dec.b1", dec.b1);
  reg.add("dec.w2", dec.w2);
  reg.add("dec.b2", dec.b2);
  reg.add("dec.w_feat", dec.w_feat);
  reg.add("dec.b_feat", dec.b_feat);
  reg.add("dec.w_alpha", dec.w_alpha);
  reg.add("dec.b_alpha", dec.b_alpha);
  register_mlp(reg, "head_z", p.head_z);
  register_mlp(reg, "head_y", p.head_y);
  register_mlp(reg, "head_v", p.head_v);
  return reg;
}

}  // namespace slotvid
