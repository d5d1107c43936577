#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>

#include "slotvid/metrics/metrics.hpp"

namespace slotvid {

namespace {

void check_fields(const LabelField& pred, const LabelField& gt) {
  if (pred.T != gt.T || pred.H != gt.H || pred.W != gt.W)
    fail("label fields disagree in size: " + std::to_string(pred.T) + "x" +
         std::to_string(pred.H) + "x" + std::to_string(pred.W) + " vs " +
         std::to_string(gt.T) + "x" + std::to_string(gt.H) + "x" +
         std::to_string(gt.W));
  const size_t want = static_cast<size_t>(pred.T * pred.H * pred.W);
  if (pred.labels.size() != want || gt.labels.size() != want)
    fail("label buffers do not match their declared size");
}

uint64_t pairs2(uint64_t n) { return n * (n - 1) / 2; }

// Contingency counts over ground-truth foreground pixels in [t0, t1).
struct FgContingency {
  std::map<std::pair<int32_t, int32_t>, uint64_t> joint;  // (pred, gt)
  std::map<int32_t, uint64_t> pred_sum, gt_sum;
  uint64_t n = 0;
};

FgContingency gather_fg(const LabelField& pred, const LabelField& gt,
                        int64_t t0, int64_t t1) {
  FgContingency c;
  for (int64_t t = t0; t < t1; ++t)
    for (int64_t y = 0; y < gt.H; ++y)
      for (int64_t x = 0; x < gt.W; ++x) {
        const int32_t g = gt.at(t, y, x);
        if (g <= 0) continue;
        const int32_t p = pred.at(t, y, x);
        ++c.joint[{p, g}];
        ++c.pred_sum[p];
        ++c.gt_sum[g];
        ++c.n;
      }
  return c;
}

double ari_from(const FgContingency& c) {
  const uint64_t tp = pairs2(c.n);
  if (tp == 0) return 1.0;  // a single pixel is trivially consistent
  uint64_t n11 = 0, pp = 0, gp = 0;
  for (const auto& [key, cnt] : c.joint) n11 += pairs2(cnt);
  for (const auto& [key, cnt] : c.pred_sum) pp += pairs2(cnt);
  for (const auto& [key, cnt] : c.gt_sum) gp += pairs2(cnt);
  const double expected = static_cast<double>(pp) *
                          static_cast<double>(gp) /
                          static_cast<double>(tp);
  const double maximum = 0.5 * (static_cast<double>(pp) +
                                static_cast<double>(gp));
  const double den = maximum - expected;
  if (den == 0.0) return 1.0;
  return (static_cast<double>(n11) - expected) / den;
}

// Per-segment intersection counts over [t0, t1); ground truth keeps only
// object ids, predictions keep every label.
struct SegmentCounts {
  std::map<std::pair<int32_t, int32_t>, uint64_t> inter;  // (gt, pred)
  std::map<int32_t, uint64_t> gt_size, pred_size;
};

SegmentCounts gather_segments(const LabelField& pred, const LabelField& gt,
                              int64_t t0, int64_t t1) {
  SegmentCounts c;
  for (int64_t t = t0; t < t1; ++t)
    for (int64_t y = 0; y < gt.H; ++y)
      for (int64_t x = 0; x < gt.W; ++x) {
        const int32_t g = gt.at(t, y, x);
        const int32_t p = pred.at(t, y, x);
        ++c.pred_size[p];
        if (g > 0) {
          ++c.gt_size[g];
          ++c.inter[{g, p}];
        }
      }
  return c;
}

double mbo_from(const SegmentCounts& c) {
  double acc = 0;
  for (const auto& [g, gsize] : c.gt_size) {
    double best = 0;
    for (const auto& [key, inter] : c.inter) {
      if (key.first != g) continue;
      const uint64_t psize = c.pred_size.at(key.second);
      const double iou = static_cast<double>(inter) /
                         static_cast<double>(gsize + psize - inter);
      if (iou > best) best = iou;
    }
    acc += best;
  }
  return acc / static_cast<double>(c.gt_size.size());
}

}  // namespace

LabelField label_field_from_masks(const VideoSample& v) {
  LabelField f;
  f.T = v.T;
  f.H = v.H;
  f.W = v.W;
  f.labels.reserve(v.gt_masks.size());
  for (uint16_t m : v.gt_masks) f.labels.push_back(static_cast<int32_t>(m));
  return f;
}

LabelField label_field_from_patches(const std::vector<int32_t>& labels,
                                    int64_t T, int64_t gh, int64_t gw) {
  if (static_cast<int64_t>(labels.size()) != T * gh * gw)
    fail("patch label count " + std::to_string(labels.size()) +
         " does not match " + std::to_string(T) + "x" + std::to_string(gh) +
         "x" + std::to_string(gw));
  LabelField f;
  f.T = T;
  f.H = gh;
  f.W = gw;
  f.labels = labels;
  return f;
}

LabelField upsample_labels(const LabelField& coarse, int64_t H, int64_t W) {
  if (coarse.H <= 0 || coarse.W <= 0 || H % coarse.H != 0 ||
      W % coarse.W != 0)
    fail("cannot upsample a " + std::to_string(coarse.H) + "x" +
         std::to_string(coarse.W) + " grid to " + std::to_string(H) + "x" +
         std::to_string(W));
  const int64_t sy = H / coarse.H;
  const int64_t sx = W / coarse.W;
  LabelField f;
  f.T = coarse.T;
  f.H = H;
  f.W = W;
  f.labels.resize(static_cast<size_t>(coarse.T * H * W));
  for (int64_t t = 0; t < coarse.T; ++t)
    for (int64_t y = 0; y < H; ++y)
      for (int64_t x = 0; x < W; ++x)
        f.labels[static_cast<size_t>((t * H + y) * W + x)] =
            coarse.at(t, y / sy, x / sx);
  return f;
}

double fg_ari(const LabelField& pred, const LabelField& gt,
              MetricLevel level) {
  check_fields(pred, gt);
  if (level == MetricLevel::video) {
    FgContingency c = gather_fg(pred, gt, 0, gt.T);
    if (c.n == 0)
      fail("ground truth contains no foreground pixels");
    return ari_from(c);
  }
  double acc = 0;
  int64_t used = 0;
  for (int64_t t = 0; t < gt.T; ++t) {
    FgContingency c = gather_fg(pred, gt, t, t + 1);
    if (c.n == 0) continue;  // nothing to score in this frame
    acc += ari_from(c);
    ++used;
  }
  if (used == 0) fail("ground truth contains no foreground pixels");
  return acc / static_cast<double>(used);
}

double mbo(const LabelField& pred, const LabelField& gt, MetricLevel level) {
  check_fields(pred, gt);
  if (level == MetricLevel::video) {
    SegmentCounts c = gather_segments(pred, gt, 0, gt.T);
    if (c.gt_size.empty())
      fail("ground truth contains no objects");
    return mbo_from(c);
  }
  double acc = 0;
  int64_t used = 0;
  for (int64_t t = 0; t < gt.T; ++t) {
    SegmentCounts c = gather_segments(pred, gt, t, t + 1);
    if (c.gt_size.empty()) continue;
    acc += mbo_from(c);
    ++used;
  }
  if (used == 0) fail("ground truth contains no objects");
  return acc / static_cast<double>(used);
}

}  // namespace slotvid
