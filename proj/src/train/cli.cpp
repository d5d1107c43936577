#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "slotvid/core/rng.hpp"
#include "slotvid/train/trainer.hpp"

namespace slotvid {

namespace {

namespace fs = std::filesystem;

constexpr uint64_t kTagDataset = 0x64617461;

TrainConfig resolve_config(const std::string& config_path,
                           const std::vector<std::string>& sets,
                           bool seed_given, uint64_t seed) {
  TrainConfig cfg;
  if (!config_path.empty()) cfg = parse_train_config(config_path);
  for (const std::string& kv : sets) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos)
      fail("--set expects key=value, got '" + kv + "'");
    apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (seed_given) cfg.seed = seed;
  validate_train_config(cfg);
  return cfg;
}

std::vector<VideoSample> dataset_or_generated(const TrainConfig& cfg,
                                              const std::string& dataset,
                                              int64_t count) {
  if (!dataset.empty()) {
    std::vector<VideoSample> videos = read_dataset(dataset);
    if (count > 0 && static_cast<int64_t>(videos.size()) > count)
      videos.resize(static_cast<size_t>(count));
    return videos;
  }
  return make_eval_videos(cfg, count > 0 ? count : cfg.eval_videos);
}

void run_gen_data(const TrainConfig& cfg, const std::string& out,
                  int64_t count) {
  std::vector<VideoSample> samples;
  samples.reserve(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) {
    GeneratorConfig gc = generator_config(
        cfg, seed_combine(seed_combine(cfg.seed, kTagDataset),
                          static_cast<uint64_t>(i)));
    samples.push_back(generate(gc));
  }
  write_dataset(samples, out);
  std::cout << "wrote " << samples.size() << " videos to " << out << "\n";
}

void run_train(const TrainConfig& cfg, const std::string& out_dir,
               const std::string& resume, int64_t save_every) {
  fs::create_directories(out_dir);
  Trainer trainer =
      resume.empty() ? Trainer(cfg) : Trainer::from_checkpoint(cfg, resume);

  const fs::path loss_path = fs::path(out_dir) / "loss.csv";
  const bool fresh =
      !fs::exists(loss_path) || fs::file_size(loss_path) == 0;
  std::ofstream loss(loss_path, std::ios::app);
  if (!loss) fail("cannot open '" + loss_path.string() + "' for writing");
  if (fresh) write_loss_csv_header(loss);

  const fs::path ckpt_path = fs::path(out_dir) / "model.ckpt";
  while (trainer.current_step() < cfg.steps) {
    const StepStats st = trainer.step();
    write_loss_csv_row(loss, st);
    if ((st.step + 1) % 200 == 0 || st.step + 1 == cfg.steps)
      std::cerr << "step " << (st.step + 1) << "/" << cfg.steps
                << " total=" << st.total << "\n";
    if (save_every > 0 && (st.step + 1) % save_every == 0 &&
        st.step + 1 < cfg.steps)
      trainer.save(ckpt_path.string());
  }
  loss.flush();
  if (!loss) fail("failed writing '" + loss_path.string() + "'");
  trainer.save(ckpt_path.string());
  std::cout << "trained " << cfg.steps << " steps; checkpoint at "
            << ckpt_path.string() << "\n";
}

void run_eval(const TrainConfig& cfg, const std::string& ckpt,
              const std::string& out, const std::string& dataset,
              int64_t count) {
  const Trainer trainer = Trainer::from_checkpoint(cfg, ckpt);
  const std::vector<VideoSample> videos =
      dataset_or_generated(cfg, dataset, count);
  const std::vector<VideoMetrics> rows = evaluate_videos(
      trainer.params(), trainer.embedder(), videos, cfg.seed);

  std::ofstream os(out);
  if (!os) fail("cannot open '" + out + "' for writing");
  write_metrics_csv(os, rows);
  os.flush();
  if (!os) fail("failed writing '" + out + "'");

  double fa_v = 0, fa_i = 0, mb_v = 0, mb_i = 0;
  for (const VideoMetrics& r : rows) {
    fa_v += r.fg_ari_video;
    fa_i += r.fg_ari_image;
    mb_v += r.mbo_video;
    mb_i += r.mbo_image;
  }
  const double n = static_cast<double>(rows.size());
  std::cout << "videos=" << rows.size() << " fg_ari_video=" << fa_v / n
            << " fg_ari_image=" << fa_i / n << " mbo_video=" << mb_v / n
            << " mbo_image=" << mb_i / n << "\n";
}

void run_export(const TrainConfig& cfg, const std::string& ckpt,
                const std::string& out_dir, const std::string& dataset,
                int64_t count) {
  const Trainer trainer = Trainer::from_checkpoint(cfg, ckpt);
  const std::vector<VideoSample> videos =
      dataset_or_generated(cfg, dataset, count);
  export_masks(trainer.params(), trainer.embedder(), videos, cfg.seed,
               out_dir);
  std::cout << "exported masks for " << videos.size() << " videos to "
            << out_dir << "\n";
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"object-centric video model: data generation, training, "
               "evaluation, mask export"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  uint64_t seed = 0;
  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--set", sets, "override one config entry (key=value)");
  CLI::Option* seed_opt =
      app.add_option("--seed", seed, "override the run seed");

  CLI::App* gen = app.add_subcommand("gen-data", "render a dataset file");
  std::string gen_out;
  int64_t gen_count = 16;
  gen->add_option("--out", gen_out, "dataset file to write")->required();
  gen->add_option("--count", gen_count, "number of videos")
      ->check(CLI::PositiveNumber);

  CLI::App* train = app.add_subcommand("train", "run the training loop");
  std::string train_out, train_resume;
  int64_t save_every = 0;
  train->add_option("--out", train_out,
                    "output directory (loss.csv, model.ckpt)")
      ->required();
  train->add_option("--resume", train_resume, "checkpoint to continue from");
  train->add_option("--save-every", save_every,
                    "also checkpoint every N steps");

  CLI::App* eval = app.add_subcommand("eval", "score a checkpoint");
  std::string eval_ckpt, eval_out, eval_dataset;
  int64_t eval_count = 0;
  eval->add_option("--ckpt", eval_ckpt, "checkpoint to score")->required();
  eval->add_option("--out", eval_out, "metrics CSV to write")->required();
  eval->add_option("--dataset", eval_dataset,
                   "score this dataset file instead of generated clips");
  eval->add_option("--count", eval_count, "number of videos");

  CLI::App* exp = app.add_subcommand("export-masks",
                                     "write predicted masks as PGM images");
  std::string exp_ckpt, exp_out, exp_dataset;
  int64_t exp_count = 4;
  exp->add_option("--ckpt", exp_ckpt, "checkpoint to run")->required();
  exp->add_option("--out", exp_out, "output directory")->required();
  exp->add_option("--dataset", exp_dataset,
                  "render this dataset file instead of generated clips");
  exp->add_option("--count", exp_count, "number of videos");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return 1;
  }

  try {
    const TrainConfig cfg =
        resolve_config(config_path, sets, seed_opt->count() > 0, seed);
    if (gen->parsed()) run_gen_data(cfg, gen_out, gen_count);
    if (train->parsed()) run_train(cfg, train_out, train_resume, save_every);
    if (eval->parsed())
      run_eval(cfg, eval_ckpt, eval_out, eval_dataset, eval_count);
    if (exp->parsed())
      run_export(cfg, exp_ckpt, exp_out, exp_dataset, exp_count);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace slotvid
