#include "slotvid/train/trainer.hpp"

#include <fstream>
#include <sstream>

namespace slotvid {

namespace {

template <class... Args>
[[noreturn]] void failf(const Args&... args) {
  std::ostringstream os;
  (os << ... << args);
  fail(os.str());
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int64_t parse_int(const std::string& key, const std::string& value) {
  size_t pos = 0;
  int64_t out = 0;
  try {
    out = std::stoll(value, &pos);
  } catch (const std::exception&) {
    failf("config key '", key, "' expects an integer, got '", value, "'");
  }
  if (pos != value.size())
    failf("config key '", key, "' expects an integer, got '", value, "'");
  return out;
}

Real parse_real(const std::string& key, const std::string& value) {
  size_t pos = 0;
  Real out = 0;
  try {
    out = std::stod(value, &pos);
  } catch (const std::exception&) {
    failf("config key '", key, "' expects a number, got '", value, "'");
  }
  if (pos != value.size())
    failf("config key '", key, "' expects a number, got '", value, "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  failf("config key '", key, "' expects 0/1/true/false, got '", value, "'");
  return false;
}

uint64_t parse_seed(const std::string& key, const std::string& value) {
  size_t pos = 0;
  uint64_t out = 0;
  try {
    out = std::stoull(value, &pos);
  } catch (const std::exception&) {
    failf("config key '", key, "' expects an unsigned integer, got '", value,
         "'");
  }
  if (pos != value.size())
    failf("config key '", key, "' expects an unsigned integer, got '", value,
         "'");
  return out;
}

}  // namespace

void apply_config_entry(TrainConfig& cfg, const std::string& key,
                        const std::string& value) {
  if (key == "patch") cfg.patch = parse_int(key, value);
  else if (key == "d_backbone") cfg.d_backbone = parse_int(key, value);
  else if (key == "color_channels") cfg.color_channels = parse_int(key, value);
  else if (key == "color_gain") cfg.color_gain = parse_real(key, value);
  else if (key == "pos_channels") cfg.pos_channels = parse_int(key, value);
  else if (key == "pos_gain") cfg.pos_gain = parse_real(key, value);
  else if (key == "d_encoder") cfg.d_encoder = parse_int(key, value);
  else if (key == "d_slot") cfg.d_slot = parse_int(key, value);
  else if (key == "d_project") cfg.d_project = parse_int(key, value);
  else if (key == "num_slots") cfg.num_slots = parse_int(key, value);
  else if (key == "slot_iters") cfg.slot_iters = parse_int(key, value);
  else if (key == "first_frame_iters")
    cfg.first_frame_iters = parse_int(key, value);
  else if (key == "enc_hidden") cfg.enc_hidden = parse_int(key, value);
  else if (key == "dec_hidden") cfg.dec_hidden = parse_int(key, value);
  else if (key == "head_hidden") cfg.head_hidden = parse_int(key, value);
  else if (key == "dataset") cfg.dataset = value;
  else if (key == "pool_size") cfg.pool_size = parse_int(key, value);
  else if (key == "frames") cfg.frames = parse_int(key, value);
  else if (key == "height") cfg.height = parse_int(key, value);
  else if (key == "width") cfg.width = parse_int(key, value);
  else if (key == "min_objects") cfg.min_objects = parse_int(key, value);
  else if (key == "max_objects") cfg.max_objects = parse_int(key, value);
  else if (key == "min_radius") cfg.min_radius = parse_int(key, value);
  else if (key == "max_radius") cfg.max_radius = parse_int(key, value);
  else if (key == "min_speed") cfg.min_speed = parse_real(key, value);
  else if (key == "max_speed") cfg.max_speed = parse_real(key, value);
  else if (key == "palette_size") cfg.palette_size = parse_int(key, value);
  else if (key == "texture_amplitude")
    cfg.texture_amplitude = parse_real(key, value);
  else if (key == "allow_occlusion")
    cfg.allow_occlusion = parse_bool(key, value);
  else if (key == "steps") cfg.steps = parse_int(key, value);
  else if (key == "batch_size") cfg.batch_size = parse_int(key, value);
  else if (key == "lr") cfg.lr = parse_real(key, value);
  else if (key == "adam_beta1") cfg.adam_beta1 = parse_real(key, value);
  else if (key == "adam_beta2") cfg.adam_beta2 = parse_real(key, value);
  else if (key == "adam_eps") cfg.adam_eps = parse_real(key, value);
  else if (key == "warmup_frac") cfg.warmup_frac = parse_real(key, value);
  else if (key == "tau") cfg.tau = parse_real(key, value);
  else if (key == "lambda_r") cfg.lambda_r = parse_real(key, value);
  else if (key == "lambda_c") cfg.lambda_c = parse_real(key, value);
  else if (key == "reg_until") cfg.reg_until = parse_real(key, value);
  else if (key == "cl_from") cfg.cl_from = parse_real(key, value);
  else if (key == "num_anchors") cfg.num_anchors = parse_int(key, value);
  else if (key == "num_neighbors") cfg.num_neighbors = parse_int(key, value);
  else if (key == "penalized_slots")
    cfg.penalized_slots = parse_int(key, value);
  else if (key == "objective") {
    if (value != "full" && value != "base")
      failf("config key 'objective' must be 'full' or 'base', got '", value,
           "'");
    cfg.objective = value;
  } else if (key == "seed") cfg.seed = parse_seed(key, value);
  else if (key == "eval_videos") cfg.eval_videos = parse_int(key, value);
  else failf("unknown config key '", key, "'");
}

TrainConfig parse_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) failf("cannot open config file '", path, "'");
  TrainConfig cfg;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      failf("config line ", lineno, " of '", path,
           "' is not of the form key=value: '", line, "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) failf("config line ", lineno, " has an empty key");
    apply_config_entry(cfg, key, value);
  }
  validate_train_config(cfg);
  return cfg;
}

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.patch < 1) failf("patch must be positive");
  if (cfg.height < cfg.patch || cfg.width < cfg.patch)
    failf("frame size ", cfg.height, "x", cfg.width,
         " is smaller than the patch size ", cfg.patch);
  if (cfg.height % cfg.patch != 0 || cfg.width % cfg.patch != 0)
    failf("frame size ", cfg.height, "x", cfg.width,
         " is not divisible by patch size ", cfg.patch);
  if (cfg.frames < 1) failf("frames must be positive");
  if (cfg.num_slots < 1) failf("num_slots must be positive");
  if (cfg.steps < 1) failf("steps must be positive");
  if (cfg.batch_size < 1) failf("batch_size must be positive");
  if (!(cfg.lr > 0)) failf("lr must be positive");
  if (cfg.adam_beta1 < 0 || cfg.adam_beta1 >= 1 || cfg.adam_beta2 < 0 ||
      cfg.adam_beta2 >= 1)
    failf("adam betas must lie in [0, 1)");
  if (!(cfg.adam_eps > 0)) failf("adam_eps must be positive");
  if (cfg.warmup_frac < 0 || cfg.warmup_frac > 0.5)
    failf("warmup_frac must lie in [0, 0.5], got ", cfg.warmup_frac);
  if (!(cfg.tau > 0)) failf("tau must be positive");
  if (cfg.num_anchors < 1) failf("num_anchors must be positive");
  if (cfg.num_neighbors < 1) failf("num_neighbors must be positive");
  if (cfg.min_objects < 1 || cfg.max_objects < cfg.min_objects)
    failf("object count range [", cfg.min_objects, ", ", cfg.max_objects,
         "] is invalid");
  if (cfg.pool_size < 0) failf("pool_size must be nonnegative");
  if (cfg.eval_videos < 1) failf("eval_videos must be positive");
  int64_t m = penalized_count(cfg);
  if (cfg.objective == "full" && (m < 1 || m >= cfg.num_slots))
    failf("penalized slot count ", m, " out of range [1, ", cfg.num_slots - 1,
         "]");
}

ModelConfig model_config(const TrainConfig& cfg) {
  ModelConfig mc;
  mc.patch = cfg.patch;
  mc.d_backbone = cfg.d_backbone;
  mc.color_channels = cfg.color_channels;
  mc.color_gain = cfg.color_gain;
  mc.pos_channels = cfg.pos_channels;
  mc.pos_gain = cfg.pos_gain;
  mc.d_encoder = cfg.d_encoder;
  mc.d_slot = cfg.d_slot;
  mc.d_project = cfg.d_project;
  mc.num_slots = cfg.num_slots;
  mc.slot_iters = cfg.slot_iters;
  mc.first_frame_iters = cfg.first_frame_iters;
  mc.enc_hidden = cfg.enc_hidden;
  mc.dec_hidden = cfg.dec_hidden;
  mc.head_hidden = cfg.head_hidden;
  return mc;
}

GeneratorConfig generator_config(const TrainConfig& cfg, uint64_t seed) {
  GeneratorConfig gc;
  gc.T = cfg.frames;
  gc.H = cfg.height;
  gc.W = cfg.width;
  gc.min_objects = cfg.min_objects;
  gc.max_objects = cfg.max_objects;
  gc.min_radius = cfg.min_radius;
  gc.max_radius = cfg.max_radius;
  gc.min_speed = cfg.min_speed;
  gc.max_speed = cfg.max_speed;
  gc.palette_size = cfg.palette_size;
  gc.texture_amplitude = cfg.texture_amplitude;
  gc.allow_occlusion = cfg.allow_occlusion;
  gc.seed = seed;
  return gc;
}

StageSchedule stage_schedule(const TrainConfig& cfg) {
  StageSchedule s;
  s.lambda_r = cfg.lambda_r;
  s.lambda_c = cfg.lambda_c;
  s.tau = cfg.tau;
  s.reg_until = cfg.reg_until;
  s.cl_from = cfg.cl_from;
  return s;
}

int64_t penalized_count(const TrainConfig& cfg) {
  if (cfg.penalized_slots > 0) return cfg.penalized_slots;
  return cfg.num_slots / 2;
}

}  // namespace slotvid
