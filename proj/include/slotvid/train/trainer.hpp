#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "slotvid/data/synth.hpp"
#include "slotvid/losses/losses.hpp"
#include "slotvid/metrics/metrics.hpp"
#include "slotvid/model/checkpoint.hpp"
#include "slotvid/model/model.hpp"

namespace slotvid {

// Everything a run needs, readable from a key=value config file. Unknown
// keys are rejected so typos fail loudly.
struct TrainConfig {
  // model
  int64_t patch = 7;
  int64_t d_backbone = 32;
  int64_t color_channels = 6;
  Real color_gain = 2.0;
  int64_t pos_channels = 4;
  Real pos_gain = 1.0;
  int64_t d_encoder = 48;
  int64_t d_slot = 48;
  int64_t d_project = 16;
  int64_t num_slots = 5;
  int64_t slot_iters = 2;
  int64_t first_frame_iters = 3;
  int64_t enc_hidden = 48;
  int64_t dec_hidden = 48;
  int64_t head_hidden = 32;

  // synthetic data; an empty dataset path means videos come from a procedural
  // pool of pool_size clips derived from the run seed (pool_size = 0 draws a
  // fresh clip every step instead of cycling a finite pool)
  std::string dataset;
  int64_t pool_size = 64;
  int64_t frames = 4;
  int64_t height = 56;
  int64_t width = 56;
  int64_t min_objects = 2;
  int64_t max_objects = 3;
  int64_t min_radius = 12;
  int64_t max_radius = 16;
  Real min_speed = 0.0;
  Real max_speed = 2.5;
  int64_t palette_size = 6;
  Real texture_amplitude = 0.05;
  bool allow_occlusion = true;

  // optimization
  int64_t steps = 3000;
  int64_t batch_size = 1;
  Real lr = 4e-4;
  Real adam_beta1 = 0.9;
  Real adam_beta2 = 0.999;
  Real adam_eps = 1e-8;
  Real warmup_frac = 0.05;
  Real tau = 0.1;
  Real lambda_r = 0.1;
  Real lambda_c = 0.1;
  Real reg_until = 0.1;
  Real cl_from = 0.2;
  int64_t num_anchors = 16;
  int64_t num_neighbors = 4;
  int64_t penalized_slots = -1;  // -1: floor(num_slots / 2)
  std::string objective = "full";  // "full" or "base"
  uint64_t seed = 0;

  // evaluation
  int64_t eval_videos = 10;
};

TrainConfig parse_train_config(const std::string& path);
void apply_config_entry(TrainConfig& cfg, const std::string& key,
                        const std::string& value);
void validate_train_config(const TrainConfig& cfg);

ModelConfig model_config(const TrainConfig& cfg);
GeneratorConfig generator_config(const TrainConfig& cfg, uint64_t seed);
StageSchedule stage_schedule(const TrainConfig& cfg);
int64_t penalized_count(const TrainConfig& cfg);

// Bias-corrected Adam over a fixed parameter list.
struct AdamMoments {
  std::vector<Tensor> m, v;  // aligned with the parameter list
  int64_t step = 0;
};

AdamMoments init_adam(const std::vector<Tensor>& params);
void adam_step(const std::vector<Tensor>& params, AdamMoments& moments,
               Real lr, Real beta1 = 0.9, Real beta2 = 0.999,
               Real eps = 1e-8);

// Linear ramp from lr/warmup_steps up to lr over the first warmup_frac of
// the run, constant afterwards.
Real lr_at_step(const TrainConfig& cfg, int64_t step_index);

struct StepStats {
  int64_t step = 0;
  Real eta = 0;
  Real recon = 0, slot_contrast = 0, cl_dec = 0, cl_enc = 0, reg = 0;
  Real total = 0;
};

// One video per optimization step, sampled procedurally from the run seed
// and the step index alone, so a resumed run replays the exact stream.
class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);

  static Trainer from_checkpoint(const TrainConfig& cfg,
                                 const std::string& path);

  StepStats step();
  int64_t current_step() const { return step_; }
  const TrainConfig& config() const { return cfg_; }
  const ModelParams& params() const { return params_; }
  const Embedder& embedder() const { return embedder_; }

  void save(const std::string& path) const;

  // The clip consumed by batch element b of step s has draw index
  // s * batch_size + b; the mapping is pure so resumed runs replay it.
  VideoSample training_video(int64_t draw) const;

 private:
  TrainConfig cfg_;
  StageSchedule sched_;
  ModelParams params_;
  Embedder embedder_;
  ParamRegistry registry_;
  AdamMoments moments_;
  std::vector<VideoSample> dataset_;  // empty when generating procedurally
  int64_t step_ = 0;
  int64_t penalized_ = 0;
  bool srl_ = true;

  Real lr_at(int64_t step_index) const;
  std::vector<int64_t> sample_anchors(uint64_t draw, int64_t total) const;
};

struct VideoMetrics {
  int64_t video_id = 0;
  double fg_ari_video = 0, fg_ari_image = 0;
  double mbo_video = 0, mbo_image = 0;
};

// Held-out clips drawn from a stream independent of the training videos.
std::vector<VideoSample> make_eval_videos(const TrainConfig& cfg,
                                          int64_t count);

// Runs the model on each clip and scores its decoder masks against the
// ground truth at both levels.
std::vector<VideoMetrics> evaluate_videos(
    const ModelParams& params, const Embedder& emb,
    const std::vector<VideoSample>& videos, uint64_t seed);

// Per-frame object-id images (one 8-bit PGM per frame) plus a JSON manifest
// describing the files.
void export_masks(const ModelParams& params, const Embedder& emb,
                  const std::vector<VideoSample>& videos, uint64_t seed,
                  const std::string& out_dir);

void write_loss_csv_header(std::ostream& os);
void write_loss_csv_row(std::ostream& os, const StepStats& s);
void write_metrics_csv(std::ostream& os,
                       const std::vector<VideoMetrics>& rows);

int cli_main(int argc, const char* const* argv);

}  // namespace slotvid
