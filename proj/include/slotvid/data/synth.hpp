#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "slotvid/core/tensor.hpp"

namespace slotvid {

enum class ShapeKind { disk, square, triangle };

// Per-object generation record. In-memory only; the dataset file stores just
// the rendered frames and masks (plus seed), which fully determine a sample.
struct ObjectMeta {
  ShapeKind kind = ShapeKind::disk;
  int64_t radius = 0;  // half-extent in pixels
  std::array<float, 3> color{};
  int64_t x0 = 0, y0 = 0;  // frame-0 center
  int64_t vx = 0, vy = 0;  // pixels per frame
};

struct VideoSample {
  int64_t T = 0, H = 0, W = 0;
  int64_t num_objects = 0;  // mask ids run 1..num_objects, 0 is background
  uint64_t seed = 0;
  std::vector<float> frames;      // [T,H,W,3], values in [0,1]
  std::vector<uint16_t> gt_masks;  // [T,H,W]
  std::vector<ObjectMeta> objects;  // not serialized

  float pixel(int64_t t, int64_t y, int64_t x, int64_t c) const {
    return frames[static_cast<size_t>(((t * H + y) * W + x) * 3 + c)];
  }
  uint16_t mask_at(int64_t t, int64_t y, int64_t x) const {
    return gt_masks[static_cast<size_t>((t * H + y) * W + x)];
  }
};

struct GeneratorConfig {
  int64_t T = 4, H = 56, W = 56;
  int64_t min_objects = 2, max_objects = 3;
  std::vector<ShapeKind> shapes{ShapeKind::disk, ShapeKind::square,
                                ShapeKind::triangle};
  int64_t min_radius = 6, max_radius = 10;
  Real min_speed = 0.0, max_speed = 2.5;
  int64_t palette_size = 6;
  Real texture_amplitude = 0.05;
  bool allow_occlusion = true;
  uint64_t seed = 0;
};

// Evenly spaced saturated hues; index wraps modulo palette_size.
std::array<float, 3> palette_color(int64_t index, int64_t palette_size);

// Renders one video: colored shapes on a value-noise background, constant
// integer velocities with border bounce, later-listed objects occluding
// earlier ones, masks taken from the same rasterization as the pixels.
VideoSample generate(const GeneratorConfig& config);

void write_dataset(const std::vector<VideoSample>& samples,
                   const std::string& path);
std::vector<VideoSample> read_dataset(const std::string& path);

}  // namespace slotvid
