#pragma once

#include <cstdint>
#include <vector>

#include "slotvid/data/synth.hpp"

namespace slotvid {

// Dense integer labeling of every pixel in a clip. Ground-truth fields use
// 0 for background; predicted fields may use any non-negative ids.
struct LabelField {
  int64_t T = 0, H = 0, W = 0;
  std::vector<int32_t> labels;  // [T, H, W]

  int32_t at(int64_t t, int64_t y, int64_t x) const {
    return labels[static_cast<size_t>((t * H + y) * W + x)];
  }
};

// video: one score over the whole clip (object identity must persist across
// frames). image: per-frame scores averaged, skipping frames the metric
// cannot be computed on.
enum class MetricLevel { video, image };

LabelField label_field_from_masks(const VideoSample& v);

// Wraps flattened per-patch labels (t * gh * gw + row-major patch index)
// into a [T, gh, gw] field.
LabelField label_field_from_patches(const std::vector<int32_t>& labels,
                                    int64_t T, int64_t gh, int64_t gw);

// Nearest-neighbor expansion of a patch-level field to pixel resolution;
// H and W must be integer multiples of the coarse grid.
LabelField upsample_labels(const LabelField& coarse, int64_t H, int64_t W);

// Adjusted Rand index restricted to ground-truth foreground pixels. Pair
// counts are exact 64-bit integers; only the final ratio is floating point.
// A degenerate denominator scores 1. Errors when no foreground exists.
double fg_ari(const LabelField& pred, const LabelField& gt,
              MetricLevel level);

// Mean best overlap: every ground-truth segment takes its best IoU against
// the predicted segments (predictions may be reused), averaged over
// segments. Errors when the ground truth has no objects.
double mbo(const LabelField& pred, const LabelField& gt, MetricLevel level);

}  // namespace slotvid
