#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "json.hpp"
#include "slotvid/core/rng.hpp"
#include "slotvid/train/trainer.hpp"

namespace slotvid {

namespace {

constexpr uint64_t kTagEvalNoise = 0x6576616c;
constexpr uint64_t kTagEvalSet = 0x65766c73;

// Decoder-mask segmentation of one clip: per-patch argmax labels expanded
// to pixel resolution by nearest-neighbor blocks.
LabelField predict_labels(const ModelParams& params, const Embedder& emb,
                          const VideoSample& video, uint64_t noise_seed) {
  const Tensor feats = extract_backbone_features(video, emb);
  MathModeScope mm(MathMode::training);
  const ModelOutput out = forward_video(feats, params, noise_seed);
  const PseudoLabels labels = pseudo_labels(out.attn, out.mask);
  const int64_t gh = video.H / emb.patch;
  const int64_t gw = video.W / emb.patch;
  const LabelField coarse =
      label_field_from_patches(labels.l_mask, labels.T, gh, gw);
  return upsample_labels(coarse, video.H, video.W);
}

}  // namespace

std::vector<VideoSample> make_eval_videos(const TrainConfig& cfg,
                                          int64_t count) {
  std::vector<VideoSample> videos;
  videos.reserve(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) {
    GeneratorConfig gc = generator_config(
        cfg, seed_combine(seed_combine(cfg.seed, kTagEvalSet),
                          static_cast<uint64_t>(i)));
    videos.push_back(generate(gc));
  }
  return videos;
}

std::vector<VideoMetrics> evaluate_videos(
    const ModelParams& params, const Embedder& emb,
    const std::vector<VideoSample>& videos, uint64_t seed) {
  std::vector<VideoMetrics> rows;
  rows.reserve(videos.size());
  for (size_t i = 0; i < videos.size(); ++i) {
    const VideoSample& video = videos[i];
    const LabelField pred = predict_labels(
        params, emb, video,
        seed_combine(seed_combine(seed, kTagEvalNoise), i));
    const LabelField gt = label_field_from_masks(video);
    VideoMetrics r;
    r.video_id = static_cast<int64_t>(i);
    r.fg_ari_video = fg_ari(pred, gt, MetricLevel::video);
    r.fg_ari_image = fg_ari(pred, gt, MetricLevel::image);
    r.mbo_video = mbo(pred, gt, MetricLevel::video);
    r.mbo_image = mbo(pred, gt, MetricLevel::image);
    rows.push_back(r);
  }
  return rows;
}

void export_masks(const ModelParams& params, const Embedder& emb,
                  const std::vector<VideoSample>& videos, uint64_t seed,
                  const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const int64_t maxval = std::max<int64_t>(1, params.cfg.num_slots - 1);

  nlohmann::json manifest;
  manifest["num_slots"] = params.cfg.num_slots;
  manifest["maxval"] = maxval;
  manifest["videos"] = nlohmann::json::array();

  for (size_t i = 0; i < videos.size(); ++i) {
    const VideoSample& video = videos[i];
    const LabelField pred = predict_labels(
        params, emb, video,
        seed_combine(seed_combine(seed, kTagEvalNoise), i));

    nlohmann::json entry;
    entry["id"] = i;
    entry["height"] = video.H;
    entry["width"] = video.W;
    entry["frames"] = nlohmann::json::array();
    for (int64_t t = 0; t < video.T; ++t) {
      char name[64];
      std::snprintf(name, sizeof name, "video_%03zu_frame_%02lld.pgm", i,
                    static_cast<long long>(t));
      const fs::path path = fs::path(out_dir) / name;
      std::ofstream os(path, std::ios::binary);
      if (!os) fail("cannot write mask image '" + path.string() + "'");
      os << "P5\n" << video.W << " " << video.H << "\n" << maxval << "\n";
      for (int64_t y = 0; y < video.H; ++y)
        for (int64_t x = 0; x < video.W; ++x)
          os.put(static_cast<char>(pred.at(t, y, x) & 0xff));
      if (!os) fail("failed writing mask image '" + path.string() + "'");
      entry["frames"].push_back(name);
    }
    manifest["videos"].push_back(entry);
  }

  const fs::path mpath = fs::path(out_dir) / "manifest.json";
  std::ofstream ms(mpath);
  if (!ms) fail("cannot write manifest '" + mpath.string() + "'");
  ms << manifest.dump(2) << "\n";
  if (!ms) fail("failed writing manifest '" + mpath.string() + "'");
}

void write_loss_csv_header(std::ostream& os) {
  os << "step,eta,recon,slot_contrast,cl_dec,cl_enc,reg,total\n";
}

void write_loss_csv_row(std::ostream& os, const StepStats& s) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                static_cast<long long>(s.step), s.eta, s.recon,
                s.slot_contrast, s.cl_dec, s.cl_enc, s.reg, s.total);
  os << buf;
}

void write_metrics_csv(std::ostream& os,
                       const std::vector<VideoMetrics>& rows) {
  os << "video_id,fg_ari_video,fg_ari_image,mbo_video,mbo_image\n";
  char buf[512];
  for (const VideoMetrics& r : rows) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(r.video_id), r.fg_ari_video,
                  r.fg_ari_image, r.mbo_video, r.mbo_image);
    os << buf;
  }
}

}  // namespace slotvid
