#include <cmath>

#include "slotvid/model/model.hpp"

namespace slotvid {

Embedder make_embedder(const ModelConfig& cfg, uint64_t seed) {
  if (cfg.color_channels <= 0 || cfg.color_channels % 3 != 0)
    fail("embedder color channels must be a positive multiple of 3, got " +
         std::to_string(cfg.color_channels));
  if (cfg.pos_channels != 0 && cfg.pos_channels != 4)
    fail("embedder position channels must be 0 or 4, got " +
         std::to_string(cfg.pos_channels));
  if (cfg.color_channels + cfg.pos_channels >= cfg.d_backbone)
    fail("embedder needs color and position channels (" +
         std::to_string(cfg.color_channels) + "+" +
         std::to_string(cfg.pos_channels) +
         ") below the backbone width (" + std::to_string(cfg.d_backbone) +
         ")");
  Embedder emb;
  emb.patch = cfg.patch;
  emb.feature_dim = cfg.d_backbone;
  emb.color_channels = cfg.color_channels;
  emb.color_gain = cfg.color_gain;
  emb.pos_channels = cfg.pos_channels;
  emb.pos_gain = cfg.pos_gain;
  const int64_t in_dim = cfg.patch * cfg.patch * 3;
  const int64_t out_dim =
      cfg.d_backbone - cfg.color_channels - cfg.pos_channels;
  emb.proj = Tensor::zeros({in_dim, out_dim}, false);
  Rng rng(seed);
  // Pixels live in [0,1], so a plain 1/sqrt(in) projection would yield
  // features with std well below one; the 3x keeps them near unit scale,
  // which in turn keeps the reconstruction loss comparable to the
  // contrastive terms.
  const Real s = 3.0 / std::sqrt(static_cast<Real>(in_dim));
  for (auto& v : emb.proj.data()) v = rng.normal() * s;
  return emb;
}

Tensor extract_backbone_features(const VideoSample& video,
                                 const Embedder& emb) {
  const int64_t p = emb.patch;
  if (video.H % p != 0 || video.W % p != 0)
    fail("frame size " + std::to_string(video.H) + "x" +
         std::to_string(video.W) + " is not divisible by patch size " +
         std::to_string(p));
  const int64_t gh = video.H / p;
  const int64_t gw = video.W / p;
  const int64_t N = gh * gw;
  const int64_t in_dim = p * p * 3;
  const int64_t proj_dim =
      emb.feature_dim - emb.color_channels - emb.pos_channels;
  Tensor out = Tensor::zeros({video.T, N, emb.feature_dim}, false);
  std::vector<Real> patch_vec(static_cast<size_t>(in_dim));
  const auto& proj = emb.proj.data();
  for (int64_t t = 0; t < video.T; ++t) {
    for (int64_t gy = 0; gy < gh; ++gy) {
      for (int64_t gx = 0; gx < gw; ++gx) {
        Real mean[3] = {0, 0, 0};
        size_t idx = 0;
        for (int64_t dy = 0; dy < p; ++dy) {
          for (int64_t dx = 0; dx < p; ++dx) {
            for (int64_t c = 0; c < 3; ++c) {
              const Real v = video.pixel(t, gy * p + dy, gx * p + dx, c);
              patch_vec[idx++] = v;
              mean[c] += v;
            }
          }
        }
        for (int c = 0; c < 3; ++c) mean[c] /= static_cast<Real>(p * p);
        Real* row = out.data().data() +
                    (t * N + gy * gw + gx) * emb.feature_dim;
        for (int64_t j = 0; j < proj_dim; ++j) {
          Real acc = 0;
          for (int64_t i = 0; i < in_dim; ++i)
            acc += patch_vec[static_cast<size_t>(i)] * proj[i * proj_dim + j];
          row[j] = acc;
        }
        for (int64_t j = 0; j < emb.color_channels; ++j)
          row[proj_dim + j] = mean[j % 3] * emb.color_gain;
        if (emb.pos_channels == 4) {
          // Patch-center coordinates in [-1, 1] plus their squares; a slot
          // aggregating these over its patches recovers the centroid and
          // spatial extent of what it binds to.
          const Real u =
              (2.0 * (static_cast<Real>(gx) + 0.5) / static_cast<Real>(gw)) -
              1.0;
          const Real w =
              (2.0 * (static_cast<Real>(gy) + 0.5) / static_cast<Real>(gh)) -
              1.0;
          Real* pr = row + proj_dim + emb.color_channels;
          pr[0] = u * emb.pos_gain;
          pr[1] = w * emb.pos_gain;
          pr[2] = u * u * emb.pos_gain;
          pr[3] = w * w * emb.pos_gain;
        }
      }
    }
  }
  return out;
}

}  // namespace slotvid
