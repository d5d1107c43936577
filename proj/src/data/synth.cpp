#include "slotvid/data/synth.hpp"

#include <algorithm>
#include <cmath>

#include "slotvid/core/binio.hpp"
#include "slotvid/core/rng.hpp"

namespace slotvid {

namespace {

constexpr char kDatasetMagic[8] = {'S', 'L', 'V', 'D', 'S', 'E', 'T', '1'};
constexpr uint32_t kDatasetVersion = 1;
constexpr Real kBackgroundBase = 0.2;
constexpr int64_t kNoiseCell = 8;

std::array<float, 3> hsv_to_rgb(Real h, Real s, Real v) {
  Real r = 0, g = 0, b = 0;
  Real hh = h * 6.0;
  int sector = static_cast<int>(hh) % 6;
  Real f = hh - std::floor(hh);
  Real p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
  return {static_cast<float>(r), static_cast<float>(g),
          static_cast<float>(b)};
}

bool inside_shape(ShapeKind kind, int64_t r, int64_t dy, int64_t dx) {
  switch (kind) {
    case ShapeKind::disk:
      return dx * dx + dy * dy <= r * r;
    case ShapeKind::square:
      return std::abs(dx) <= r && std::abs(dy) <= r;
    case ShapeKind::triangle: {
      int64_t from_apex = dy + r;  // 0 at the apex, 2r at the base
      return from_apex >= 0 && from_apex <= 2 * r &&
             2 * std::abs(dx) <= from_apex;
    }
  }
  return false;
}

// Keeps a center coordinate inside [lo, hi], reflecting the velocity.
void bounce(int64_t& pos, int64_t& vel, int64_t lo, int64_t hi) {
  pos += vel;
  while (pos < lo || pos > hi) {
    if (pos < lo) {
      pos = 2 * lo - pos;
    } else {
      pos = 2 * hi - pos;
    }
    vel = -vel;
  }
}

struct MotionState {
  int64_t x, y, vx, vy;
};

Real circumradius(const ObjectMeta& o) {
  return o.kind == ShapeKind::disk ? static_cast<Real>(o.radius)
                                   : static_cast<Real>(o.radius) *
                                         std::sqrt(2.0);
}

}  // namespace

std::array<float, 3> palette_color(int64_t index, int64_t palette_size) {
  require(palette_size >= 1, "palette_size must be at least 1");
  int64_t i = ((index % palette_size) + palette_size) % palette_size;
  Real hue = static_cast<Real>(i) / static_cast<Real>(palette_size);
  return hsv_to_rgb(hue, 0.85, 0.95);
}

VideoSample generate(const GeneratorConfig& config) {
  require(config.T >= 1 && config.H >= 1 && config.W >= 1,
          "generator needs positive T, H, W");
  require(config.min_objects >= 1 &&
              config.min_objects <= config.max_objects,
          "object count range invalid");
  require(!config.shapes.empty(), "shape family set is empty");
  require(config.min_radius >= 1 && config.min_radius <= config.max_radius,
          "radius range invalid");
  require(config.min_speed >= 0 && config.min_speed <= config.max_speed,
          "speed range invalid");
  require(config.texture_amplitude >= 0, "texture amplitude must be >= 0");

  Rng rng(config.seed);
  VideoSample out;
  out.T = config.T;
  out.H = config.H;
  out.W = config.W;
  out.seed = config.seed;
  out.num_objects =
      config.min_objects +
      rng.uniform_int(config.max_objects - config.min_objects + 1);

  std::vector<int64_t> color_perm(static_cast<size_t>(config.palette_size));
  for (size_t i = 0; i < color_perm.size(); ++i)
    color_perm[i] = static_cast<int64_t>(i);
  for (size_t i = color_perm.size(); i > 1; --i)
    std::swap(color_perm[i - 1],
              color_perm[static_cast<size_t>(rng.uniform_int(
                  static_cast<int64_t>(i)))]);

  // Velocities come from the integer lattice so motion translates the raster
  // exactly; the speed band is enforced on the Euclidean norm.
  std::vector<std::pair<int64_t, int64_t>> velocity_pool;
  int64_t vmax = static_cast<int64_t>(std::floor(config.max_speed));
  for (int64_t vy = -vmax; vy <= vmax; ++vy)
    for (int64_t vx = -vmax; vx <= vmax; ++vx) {
      Real speed = std::sqrt(static_cast<Real>(vx * vx + vy * vy));
      if (speed >= config.min_speed && speed <= config.max_speed)
        velocity_pool.emplace_back(vx, vy);
    }
  require(!velocity_pool.empty(),
          "speed range contains no integer-component velocity");

  // Shape, size and color are drawn once; placement may be redrawn when
  // occlusion is disallowed.
  for (int64_t k = 0; k < out.num_objects; ++k) {
    ObjectMeta o;
    o.kind = config.shapes[static_cast<size_t>(
        rng.uniform_int(static_cast<int64_t>(config.shapes.size())))];
    o.radius = config.min_radius +
               rng.uniform_int(config.max_radius - config.min_radius + 1);
    require(2 * o.radius <= config.W - 1 && 2 * o.radius <= config.H - 1,
            "object larger than frame: radius " + std::to_string(o.radius) +
                " in " + std::to_string(config.H) + "x" +
                std::to_string(config.W));
    o.color = palette_color(
        color_perm[static_cast<size_t>(k) % color_perm.size()],
        config.palette_size);
    out.objects.push_back(o);
  }

  auto place_all = [&]() {
    for (ObjectMeta& o : out.objects) {
      int64_t xlo = o.radius, xhi = config.W - 1 - o.radius;
      int64_t ylo = o.radius, yhi = config.H - 1 - o.radius;
      o.x0 = xlo + rng.uniform_int(xhi - xlo + 1);
      o.y0 = ylo + rng.uniform_int(yhi - ylo + 1);
      auto [vx, vy] = velocity_pool[static_cast<size_t>(
          rng.uniform_int(static_cast<int64_t>(velocity_pool.size())))];
      o.vx = xlo == xhi ? 0 : vx;
      o.vy = ylo == yhi ? 0 : vy;
    }
  };

  auto trajectory = [&]() {
    std::vector<std::vector<MotionState>> traj;
    std::vector<MotionState> cur;
    for (const ObjectMeta& o : out.objects)
      cur.push_back({o.x0, o.y0, o.vx, o.vy});
    traj.push_back(cur);
    for (int64_t t = 1; t < config.T; ++t) {
      for (size_t k = 0; k < cur.size(); ++k) {
        const ObjectMeta& o = out.objects[k];
        bounce(cur[k].x, cur[k].vx, o.radius, config.W - 1 - o.radius);
        bounce(cur[k].y, cur[k].vy, o.radius, config.H - 1 - o.radius);
      }
      traj.push_back(cur);
    }
    return traj;
  };

  std::vector<std::vector<MotionState>> traj;
  if (config.allow_occlusion || out.num_objects == 1) {
    place_all();
    traj = trajectory();
  } else {
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      place_all();
      traj = trajectory();
      placed = true;
      for (int64_t t = 0; t < config.T && placed; ++t)
        for (size_t i = 0; i < out.objects.size() && placed; ++i)
          for (size_t j = i + 1; j < out.objects.size(); ++j) {
            Real dx = static_cast<Real>(traj[static_cast<size_t>(t)][i].x -
                                        traj[static_cast<size_t>(t)][j].x);
            Real dy = static_cast<Real>(traj[static_cast<size_t>(t)][i].y -
                                        traj[static_cast<size_t>(t)][j].y);
            if (std::sqrt(dx * dx + dy * dy) <
                circumradius(out.objects[i]) + circumradius(out.objects[j])) {
              placed = false;
              break;
            }
          }
    }
    require(placed, "could not place " + std::to_string(out.num_objects) +
                        " objects without occlusion in 200 attempts");
  }

  // Static value-noise background, shared by every frame.
  int64_t gw = config.W / kNoiseCell + 2, gh = config.H / kNoiseCell + 2;
  std::vector<Real> grid(static_cast<size_t>(gw * gh));
  for (Real& v : grid) v = rng.uniform();
  std::vector<float> background(static_cast<size_t>(config.H * config.W * 3));
  for (int64_t y = 0; y < config.H; ++y)
    for (int64_t x = 0; x < config.W; ++x) {
      Real fy = static_cast<Real>(y) / kNoiseCell;
      Real fx = static_cast<Real>(x) / kNoiseCell;
      int64_t gy = static_cast<int64_t>(fy), gx = static_cast<int64_t>(fx);
      Real ty = fy - gy, tx = fx - gx;
      auto at = [&](int64_t yy, int64_t xx) {
        return grid[static_cast<size_t>(yy * gw + xx)];
      };
      Real n = at(gy, gx) * (1 - ty) * (1 - tx) +
               at(gy, gx + 1) * (1 - ty) * tx +
               at(gy + 1, gx) * ty * (1 - tx) + at(gy + 1, gx + 1) * ty * tx;
      Real v = kBackgroundBase + config.texture_amplitude * (n - 0.5);
      float fv = static_cast<float>(std::clamp(v, 0.0, 1.0));
      for (int64_t c = 0; c < 3; ++c)
        background[static_cast<size_t>((y * config.W + x) * 3 + c)] = fv;
    }

  out.frames.assign(static_cast<size_t>(config.T * config.H * config.W * 3),
                    0.0f);
  out.gt_masks.assign(static_cast<size_t>(config.T * config.H * config.W), 0);
  for (int64_t t = 0; t < config.T; ++t) {
    std::copy(background.begin(), background.end(),
              out.frames.begin() +
                  static_cast<int64_t>(t * config.H * config.W * 3));
    for (size_t k = 0; k < out.objects.size(); ++k) {
      const ObjectMeta& o = out.objects[k];
      const MotionState& m = traj[static_cast<size_t>(t)][k];
      for (int64_t y = m.y - o.radius; y <= m.y + o.radius; ++y)
        for (int64_t x = m.x - o.radius; x <= m.x + o.radius; ++x) {
          if (y < 0 || y >= config.H || x < 0 || x >= config.W) continue;
          if (!inside_shape(o.kind, o.radius, y - m.y, x - m.x)) continue;
          size_t pix = static_cast<size_t>((t * config.H + y) * config.W + x);
          out.gt_masks[pix] = static_cast<uint16_t>(k + 1);
          for (int64_t c = 0; c < 3; ++c)
            out.frames[pix * 3 + static_cast<size_t>(c)] =
                o.color[static_cast<size_t>(c)];
        }
    }
  }
  return out;
}

void write_dataset(const std::vector<VideoSample>& samples,
                   const std::string& path) {
  BinWriter w(path);
  w.bytes(kDatasetMagic, sizeof(kDatasetMagic));
  w.u32(kDatasetVersion);
  w.u64(samples.size());
  for (const VideoSample& s : samples) {
    w.u32(static_cast<uint32_t>(s.T));
    w.u32(static_cast<uint32_t>(s.H));
    w.u32(static_cast<uint32_t>(s.W));
    w.u32(static_cast<uint32_t>(s.num_objects));
    w.u64(s.seed);
    require(s.frames.size() == static_cast<size_t>(s.T * s.H * s.W * 3),
            "sample frame buffer does not match its header");
    require(s.gt_masks.size() == static_cast<size_t>(s.T * s.H * s.W),
            "sample mask buffer does not match its header");
    for (float v : s.frames) w.f32(v);
    for (uint16_t v : s.gt_masks) w.u16(v);
  }
  w.close();
}

std::vector<VideoSample> read_dataset(const std::string& path) {
  BinReader r(path);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  require(std::equal(magic, magic + 8, kDatasetMagic),
          path + ": not a dataset file (bad magic at offset 0)");
  uint32_t version = r.u32();
  require(version == kDatasetVersion,
          path + ": unsupported dataset version " + std::to_string(version) +
              " (expected " + std::to_string(kDatasetVersion) + ")");
  uint64_t count = r.u64();
  std::vector<VideoSample> samples;
  samples.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    VideoSample s;
    s.T = r.u32();
    s.H = r.u32();
    s.W = r.u32();
    s.num_objects = r.u32();
    s.seed = r.u64();
    require(s.T >= 1 && s.H >= 1 && s.W >= 1 &&
                s.T * s.H * s.W <= (int64_t{1} << 31),
            path + ": implausible sample header at offset " +
                std::to_string(r.offset() - 24));
    s.frames.resize(static_cast<size_t>(s.T * s.H * s.W * 3));
    for (float& v : s.frames) v = r.f32();
    s.gt_masks.resize(static_cast<size_t>(s.T * s.H * s.W));
    for (uint16_t& v : s.gt_masks) v = r.u16();
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace slotvid
