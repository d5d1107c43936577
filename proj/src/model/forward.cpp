#include <cmath>

#include "slotvid/model/model.hpp"

namespace slotvid {

namespace {

Tensor mlp_forward(const Tensor& x, const MlpParams& m) {
  Tensor h = relu(matmul(x, m.w1) + m.b1);
  return matmul(h, m.w2) + m.b2;
}

}  // namespace

Tensor encode(const Tensor& backbone, const MlpParams& encoder) {
  return mlp_forward(backbone, encoder);
}

Tensor propagate_slots(const Tensor& slots_prev, const MlpParams& predictor) {
  return slots_prev + mlp_forward(slots_prev, predictor);
}

std::pair<Tensor, Tensor> slot_attention_frame(
    const Tensor& feats_t, const Tensor& init_slots,
    const SlotAttentionParams& p, int64_t n_iters) {
  if (feats_t.dim() != 2 || init_slots.dim() != 2)
    fail("slot attention expects feats [N,D_e] and slots [S,D_s], got " +
         shape_str(feats_t.shape()) + " and " + shape_str(init_slots.shape()));
  if (n_iters < 1)
    fail("slot attention needs at least one iteration, got " +
         std::to_string(n_iters));
  const int64_t d_slot = init_slots.size(1);
  const Real logit_scale = 1.0 / std::sqrt(static_cast<Real>(d_slot));

  Tensor fn = layer_norm(feats_t, 1, p.ln_in_g, p.ln_in_b);
  Tensor k = matmul(fn, p.wk);  // [N, D_s]
  Tensor v = matmul(fn, p.wv);  // [N, D_s]

  Tensor slots = init_slots;
  Tensor attn;
  for (int64_t it = 0; it < n_iters; ++it) {
    Tensor q = matmul(layer_norm(slots, 1, p.ln_slot_g, p.ln_slot_b), p.wq);
    Tensor logits = scale(matmul(k, transpose(q)), logit_scale);  // [N, S]
    attn = softmax(logits, 1);  // slots compete for each patch
    Tensor weight = divide(attn, affine(sum_axis(attn, 0, true), 1.0, 1e-8));
    Tensor updates = matmul(transpose(weight), v);  // [S, D_s]
    slots = gru_cell(updates, slots, p.gru);
    Tensor sn = layer_norm(slots, 1, p.ln_mlp_g, p.ln_mlp_b);
    slots = slots + mlp_forward(sn, p.mlp);
  }
  return {slots, transpose(attn)};  // attention as [S, N]
}

DecodeResult decode(const Tensor& slots, const DecoderParams& p, int64_t N) {
  if (slots.dim() != 3)
    fail("decode expects slots [T,S,D_s], got " + shape_str(slots.shape()));
  if (p.pos.size(0) != N)
    fail("decoder positional embedding covers " +
         std::to_string(p.pos.size(0)) + " patches but the input has " +
         std::to_string(N));
  const int64_t T = slots.size(0);
  const int64_t S = slots.size(1);
  const int64_t d_slot = slots.size(2);
  const int64_t H1 = p.w_slot.size(1);

  Tensor pos_term = matmul(p.pos, p.w_pos);  // [N, H1], shared across frames

  std::vector<Tensor> decoded_frames, mask_frames, feat_frames;
  for (int64_t t = 0; t < T; ++t) {
    Tensor slots_t = reshape(index_select(slots, {t}), {S, d_slot});
    Tensor slot_term = reshape(matmul(slots_t, p.w_slot), {S, 1, H1});
    Tensor h1 = relu(add(add(slot_term, pos_term), p.b1));  // [S, N, H1]
    Tensor h2 = relu(matmul(h1, p.w2) + p.b2);
    Tensor feat = matmul(h2, p.w_feat) + p.b_feat;  // [S, N, D_b]
    Tensor alpha = reshape(matmul(h2, p.w_alpha) + p.b_alpha, {S, N});
    Tensor mask_t = softmax(alpha, 0);  // [S, N], columns sum to 1
    Tensor mixed = mul(feat, reshape(mask_t, {S, N, 1}));
    decoded_frames.push_back(sum_axis(mixed, 0, false));  // [N, D_b]
    mask_frames.push_back(mask_t);
    feat_frames.push_back(feat);
  }
  DecodeResult out;
  out.decoded = stack(decoded_frames, 0);   // [T, N, D_b]
  out.mask = stack(mask_frames, 1);         // [S, T, N]
  out.per_slot = stack(feat_frames, 1);     // [S, T, N, D_b]
  return out;
}

ModelOutput forward_video(const Tensor& backbone, const ModelParams& p,
                          uint64_t noise_seed) {
  if (backbone.dim() != 3)
    fail("forward expects backbone features [T,N,D_b], got " +
         shape_str(backbone.shape()));
  if (backbone.size(2) != p.cfg.d_backbone)
    fail("backbone feature width " + std::to_string(backbone.size(2)) +
         " does not match the model's " + std::to_string(p.cfg.d_backbone));
  const int64_t T = backbone.size(0);
  const int64_t N = backbone.size(1);
  const int64_t S = p.cfg.num_slots;
  const int64_t d_slot = p.cfg.d_slot;
  const int64_t d_enc = p.cfg.d_encoder;

  ModelOutput out;
  out.backbone = backbone;
  out.encoded = encode(backbone, p.encoder);  // [T, N, D_e]

  Rng rng(noise_seed);
  Tensor noise = Tensor::zeros({S, d_slot}, false);
  for (auto& x : noise.data()) x = rng.normal();
  Tensor init0 = add(mul(noise, exp(p.slot_attn.log_sigma)), p.slot_attn.mu);

  std::vector<Tensor> slot_frames, attn_frames;
  Tensor slots_prev;
  for (int64_t t = 0; t < T; ++t) {
    Tensor feats_t = reshape(index_select(out.encoded, {t}), {N, d_enc});
    Tensor init = (t == 0) ? init0 : propagate_slots(slots_prev, p.predictor);
    const int64_t iters =
        (t == 0) ? p.cfg.first_frame_iters : p.cfg.slot_iters;
    auto [slots_t, attn_t] =
        slot_attention_frame(feats_t, init, p.slot_attn, iters);
    slot_frames.push_back(slots_t);
    attn_frames.push_back(attn_t);
    slots_prev = slots_t;
  }
  out.slots = stack(slot_frames, 0);  // [T, S, D_s]
  out.attn = stack(attn_frames, 1);   // [S, T, N]

  DecodeResult dec = decode(out.slots, p.decoder, N);
  out.decoded = dec.decoded;
  out.mask = dec.mask;
  out.per_slot = dec.per_slot;

  out.z = mlp_forward(out.decoded, p.head_z);
  out.y = mlp_forward(out.backbone, p.head_y);
  out.v = mlp_forward(out.encoded, p.head_v);
  return out;
}

PseudoLabels pseudo_labels(const Tensor& attn, const Tensor& mask) {
  if (attn.dim() != 3 || mask.dim() != 3)
    fail("pseudo labels expect [S,T,N] maps, got " + shape_str(attn.shape()) +
         " and " + shape_str(mask.shape()));
  if (attn.shape() != mask.shape())
    fail("attention and mask maps disagree in shape: " + shape_str(attn.shape()) +
         " vs " + shape_str(mask.shape()));
  const int64_t S = attn.size(0);
  const int64_t T = attn.size(1);
  const int64_t N = attn.size(2);
  PseudoLabels out;
  out.T = T;
  out.N = N;
  out.l_attn.resize(static_cast<size_t>(T * N));
  out.l_mask.resize(static_cast<size_t>(T * N));
  auto argmax_over_slots = [&](const std::vector<Real>& vals,
                               std::vector<int32_t>& labels) {
    for (int64_t t = 0; t < T; ++t) {
      for (int64_t n = 0; n < N; ++n) {
        int32_t best = 0;
        Real best_val = vals[static_cast<size_t>(t * N + n)];
        for (int64_t s = 1; s < S; ++s) {
          const Real v = vals[static_cast<size_t>((s * T + t) * N + n)];
          if (v > best_val) {
            best_val = v;
            best = static_cast<int32_t>(s);
          }
        }
        labels[static_cast<size_t>(t * N + n)] = best;
      }
    }
  };
  argmax_over_slots(attn.data(), out.l_attn);
  argmax_over_slots(mask.data(), out.l_mask);
  return out;
}

}  // namespace slotvid
