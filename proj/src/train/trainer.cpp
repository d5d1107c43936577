#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "slotvid/core/rng.hpp"
#include "slotvid/train/trainer.hpp"

namespace slotvid {

namespace {

// Stream tags keep the per-purpose RNG sequences independent of each other
// while everything still derives from the single run seed.
constexpr uint64_t kTagParams = 0x70617261;
constexpr uint64_t kTagEmbed = 0x656d6265;
constexpr uint64_t kTagVideo = 0x76696465;
constexpr uint64_t kTagNoise = 0x6e6f6973;
constexpr uint64_t kTagAnchors = 0x616e6368;

uint64_t stream_seed(uint64_t base, uint64_t tag, uint64_t index) {
  return seed_combine(seed_combine(base, tag), index);
}

}  // namespace

Trainer::Trainer(const TrainConfig& cfg)
    : cfg_(cfg), sched_(stage_schedule(cfg)) {
  validate_train_config(cfg_);
  const ModelConfig mc = model_config(cfg_);
  const int64_t num_patches =
      (cfg_.height / cfg_.patch) * (cfg_.width / cfg_.patch);
  params_ = init_model_params(mc, num_patches,
                              seed_combine(cfg_.seed, kTagParams));
  embedder_ = make_embedder(mc, seed_combine(cfg_.seed, kTagEmbed));
  registry_ = register_params(params_);
  moments_ = init_adam(registry_.tensors());
  penalized_ = penalized_count(cfg_);
  srl_ = (cfg_.objective == "full");
  if (!cfg_.dataset.empty()) {
    dataset_ = read_dataset(cfg_.dataset);
    if (dataset_.empty())
      fail("training dataset '" + cfg_.dataset + "' holds no videos");
  }
}

VideoSample Trainer::training_video(int64_t draw) const {
  if (!dataset_.empty()) {
    Rng rng(stream_seed(cfg_.seed, kTagVideo, static_cast<uint64_t>(draw)));
    return dataset_[static_cast<size_t>(
        rng.uniform_int(static_cast<int64_t>(dataset_.size())))];
  }
  // A finite pool cycles draw indices through pool_size procedural clips so
  // the run revisits each clip many times; pool_size = 0 keeps every draw
  // unique.
  const uint64_t index =
      cfg_.pool_size > 0
          ? static_cast<uint64_t>(draw % cfg_.pool_size)
          : static_cast<uint64_t>(draw);
  GeneratorConfig gc =
      generator_config(cfg_, stream_seed(cfg_.seed, kTagVideo, index));
  return generate(gc);
}

Real lr_at_step(const TrainConfig& cfg, int64_t step_index) {
  const int64_t warm = static_cast<int64_t>(
      std::llround(cfg.warmup_frac * static_cast<Real>(cfg.steps)));
  if (warm > 0 && step_index < warm)
    return cfg.lr * static_cast<Real>(step_index + 1) /
           static_cast<Real>(warm);
  return cfg.lr;
}

Real Trainer::lr_at(int64_t step_index) const {
  return lr_at_step(cfg_, step_index);
}

std::vector<int64_t> Trainer::sample_anchors(uint64_t draw,
                                             int64_t total) const {
  Rng rng(stream_seed(cfg_.seed, kTagAnchors, draw));
  const int64_t k = std::min(cfg_.num_anchors, total);
  std::vector<int64_t> pool(static_cast<size_t>(total));
  std::iota(pool.begin(), pool.end(), int64_t{0});
  for (int64_t i = 0; i < k; ++i) {
    const int64_t j = i + rng.uniform_int(total - i);
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
  }
  pool.resize(static_cast<size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

StepStats Trainer::step() {
  if (step_ >= cfg_.steps)
    fail("training already ran its configured " + std::to_string(cfg_.steps) +
         " steps");
  const Real eta = static_cast<Real>(step_) / static_cast<Real>(cfg_.steps);
  const bool reg_on = srl_ && reg_active(eta, sched_);
  const bool cl_on = srl_ && cl_active(eta, sched_);
  const int64_t B = cfg_.batch_size;

  MathModeScope mm(MathMode::training);
  Tape::Scope scope;
  std::vector<Tensor> totals;
  StepStats st;
  st.step = step_;
  st.eta = eta;

  for (int64_t b = 0; b < B; ++b) {
    const int64_t draw = step_ * B + b;
    const VideoSample video = training_video(draw);
    const Tensor feats = extract_backbone_features(video, embedder_);
    ModelOutput out = forward_video(
        feats, params_,
        stream_seed(cfg_.seed, kTagNoise, static_cast<uint64_t>(draw)));
    const PseudoLabels labels = pseudo_labels(out.attn, out.mask);

    LossBreakdown parts;
    parts.recon = loss_recon(out.decoded, out.backbone);
    parts.slot_contrast = loss_slot_contrast(out.slots, cfg_.tau);
    if (reg_on) {
      const std::vector<int64_t> pen =
          select_penalized_slots(out.attn, penalized_);
      parts.reg = loss_reg(out.attn, pen);
    }
    if (cl_on) {
      const std::vector<int64_t> anchors = sample_anchors(
          static_cast<uint64_t>(draw), labels.T * labels.N);
      parts.cl_dec = loss_cl_dec(out.z, out.y, labels, anchors, cfg_.tau);
      parts.cl_enc = loss_cl_enc(out.v, out.backbone, labels, anchors,
                                 cfg_.num_neighbors, cfg_.tau);
    }
    Tensor total;
    if (srl_) {
      total = stage_total(parts, eta, sched_);
    } else {
      total = add(parts.recon, parts.slot_contrast);
      parts.total = total;
    }
    totals.push_back(total);

    st.recon += parts.recon.item();
    st.slot_contrast += parts.slot_contrast.item();
    if (cl_on) {
      st.cl_dec += parts.cl_dec.item();
      st.cl_enc += parts.cl_enc.item();
    }
    if (reg_on) st.reg += parts.reg.item();
    st.total += total.item();
  }

  Tensor total = totals[0];
  for (size_t i = 1; i < totals.size(); ++i) total = add(total, totals[i]);
  if (B > 1) total = scale(total, 1.0 / static_cast<Real>(B));
  st.recon /= static_cast<Real>(B);
  st.slot_contrast /= static_cast<Real>(B);
  st.cl_dec /= static_cast<Real>(B);
  st.cl_enc /= static_cast<Real>(B);
  st.reg /= static_cast<Real>(B);
  st.total /= static_cast<Real>(B);
  if (!std::isfinite(st.recon) || !std::isfinite(st.slot_contrast) ||
      !std::isfinite(st.cl_dec) || !std::isfinite(st.cl_enc) ||
      !std::isfinite(st.reg) || !std::isfinite(st.total)) {
    std::ostringstream os;
    os << "non-finite loss at step " << step_ << ": recon=" << st.recon
       << " slot_contrast=" << st.slot_contrast << " cl_dec=" << st.cl_dec
       << " cl_enc=" << st.cl_enc << " reg=" << st.reg
       << " total=" << st.total;
    fail(os.str());
  }

  scope.tape().backward(total);
  adam_step(registry_.tensors(), moments_, lr_at(step_), cfg_.adam_beta1,
            cfg_.adam_beta2, cfg_.adam_eps);
  ++step_;
  return st;
}

void Trainer::save(const std::string& path) const {
  Checkpoint ck;
  const auto meta_int = [&](const char* key, int64_t v) {
    ck.meta.emplace_back(key, static_cast<Real>(v));
  };
  meta_int("step", step_);
  meta_int("opt.step", moments_.step);
  meta_int("patch", cfg_.patch);
  meta_int("d_backbone", cfg_.d_backbone);
  meta_int("color_channels", cfg_.color_channels);
  ck.meta.emplace_back("color_gain", cfg_.color_gain);
  meta_int("pos_channels", cfg_.pos_channels);
  ck.meta.emplace_back("pos_gain", cfg_.pos_gain);
  meta_int("d_encoder", cfg_.d_encoder);
  meta_int("d_slot", cfg_.d_slot);
  meta_int("d_project", cfg_.d_project);
  meta_int("num_slots", cfg_.num_slots);
  meta_int("slot_iters", cfg_.slot_iters);
  meta_int("first_frame_iters", cfg_.first_frame_iters);
  meta_int("enc_hidden", cfg_.enc_hidden);
  meta_int("dec_hidden", cfg_.dec_hidden);
  meta_int("head_hidden", cfg_.head_hidden);
  meta_int("num_patches", params_.num_patches);

  for (const auto& [name, t] : registry_.items) ck.tensors.emplace_back(name, t);
  ck.tensors.emplace_back("embedder.proj", embedder_.proj);
  for (size_t i = 0; i < registry_.items.size(); ++i) {
    ck.tensors.emplace_back("opt.m." + registry_.items[i].first,
                            moments_.m[i]);
    ck.tensors.emplace_back("opt.v." + registry_.items[i].first,
                            moments_.v[i]);
  }
  save_checkpoint(path, ck);
}

namespace {

void copy_into(Tensor dst, const Tensor* src, const std::string& name,
               const std::string& path) {
  if (src == nullptr)
    fail("checkpoint '" + path + "' is missing tensor '" + name + "'");
  if (src->shape() != dst.shape())
    fail("checkpoint tensor '" + name + "' has shape " +
         shape_str(src->shape()) + ", expected " + shape_str(dst.shape()));
  dst.data() = src->data();
}

}  // namespace

Trainer Trainer::from_checkpoint(const TrainConfig& cfg,
                                 const std::string& path) {
  Trainer tr(cfg);
  const Checkpoint ck = load_checkpoint(path);

  const auto expect = [&](const char* key, Real want) {
    const Real got = ck.meta_value(key);
    if (got != want)
      fail("checkpoint '" + path + "' was built with " + key + "=" +
           std::to_string(got) + " but the config asks for " +
           std::to_string(want));
  };
  expect("patch", static_cast<Real>(cfg.patch));
  expect("d_backbone", static_cast<Real>(cfg.d_backbone));
  expect("color_channels", static_cast<Real>(cfg.color_channels));
  expect("color_gain", cfg.color_gain);
  expect("pos_channels", static_cast<Real>(cfg.pos_channels));
  expect("pos_gain", cfg.pos_gain);
  expect("d_encoder", static_cast<Real>(cfg.d_encoder));
  expect("d_slot", static_cast<Real>(cfg.d_slot));
  expect("d_project", static_cast<Real>(cfg.d_project));
  expect("num_slots", static_cast<Real>(cfg.num_slots));
  expect("slot_iters", static_cast<Real>(cfg.slot_iters));
  expect("first_frame_iters", static_cast<Real>(cfg.first_frame_iters));
  expect("enc_hidden", static_cast<Real>(cfg.enc_hidden));
  expect("dec_hidden", static_cast<Real>(cfg.dec_hidden));
  expect("head_hidden", static_cast<Real>(cfg.head_hidden));
  expect("num_patches", static_cast<Real>(tr.params_.num_patches));

  for (const auto& [name, t] : tr.registry_.items)
    copy_into(t, ck.tensor(name), name, path);
  copy_into(tr.embedder_.proj, ck.tensor("embedder.proj"), "embedder.proj",
            path);
  for (size_t i = 0; i < tr.registry_.items.size(); ++i) {
    const std::string& name = tr.registry_.items[i].first;
    copy_into(tr.moments_.m[i], ck.tensor("opt.m." + name), "opt.m." + name,
              path);
    copy_into(tr.moments_.v[i], ck.tensor("opt.v." + name), "opt.v." + name,
              path);
  }
  tr.moments_.step = static_cast<int64_t>(ck.meta_value("opt.step"));
  tr.step_ = static_cast<int64_t>(ck.meta_value("step"));
  return tr;
}

}  // namespace slotvid
