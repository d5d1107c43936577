#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "slotvid/metrics/metrics.hpp"
#include "support/metric_oracles.hpp"

using namespace slotvid;
using slotvid::testing::oracle_fg_ari;
using slotvid::testing::oracle_mbo;
using slotvid::testing::random_field;

namespace {

LabelField field(int64_t T, int64_t H, int64_t W,
                 std::vector<int32_t> labels) {
  LabelField f;
  f.T = T;
  f.H = H;
  f.W = W;
  f.labels = std::move(labels);
  return f;
}

}  // namespace

TEST_CASE("perfect and relabeled predictions score a full ARI") {
  LabelField gt = field(1, 2, 3, {1, 1, 0, 2, 2, 0});
  LabelField same = field(1, 2, 3, {1, 1, 9, 2, 2, 9});
  LabelField renamed = field(1, 2, 3, {7, 7, 1, 3, 3, 1});
  for (MetricLevel lvl : {MetricLevel::video, MetricLevel::image}) {
    CHECK(fg_ari(same, gt, lvl) == 1.0);
    CHECK(fg_ari(renamed, gt, lvl) == 1.0);
  }
}

TEST_CASE("classic anti-correlated labeling scores -0.5") {
  LabelField gt = field(1, 1, 4, {1, 1, 2, 2});
  LabelField pred = field(1, 1, 4, {5, 6, 5, 6});
  CHECK(fg_ari(pred, gt, MetricLevel::video) ==
        doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("degenerate single-cluster cases score 1") {
  LabelField gt = field(1, 1, 4, {1, 1, 1, 1});
  LabelField pred = field(1, 1, 4, {3, 3, 3, 3});
  CHECK(fg_ari(pred, gt, MetricLevel::video) == 1.0);
  // a single foreground pixel has no pairs at all
  LabelField tiny_gt = field(1, 1, 3, {0, 2, 0});
  LabelField tiny_pred = field(1, 1, 3, {4, 5, 6});
  CHECK(fg_ari(tiny_pred, tiny_gt, MetricLevel::video) == 1.0);
}

TEST_CASE("metrics reject missing foreground and size mismatches") {
  LabelField empty_gt = field(1, 2, 2, {0, 0, 0, 0});
  LabelField pred = field(1, 2, 2, {1, 2, 3, 4});
  CHECK_THROWS_WITH_AS(fg_ari(pred, empty_gt, MetricLevel::video),
                       doctest::Contains("foreground"), std::runtime_error);
  CHECK_THROWS_WITH_AS(fg_ari(pred, empty_gt, MetricLevel::image),
                       doctest::Contains("foreground"), std::runtime_error);
  CHECK_THROWS_WITH_AS(mbo(pred, empty_gt, MetricLevel::video),
                       doctest::Contains("objects"), std::runtime_error);
  CHECK_THROWS_WITH_AS(mbo(pred, empty_gt, MetricLevel::image),
                       doctest::Contains("objects"), std::runtime_error);

  LabelField small = field(1, 2, 1, {1, 1});
  CHECK_THROWS_WITH_AS(fg_ari(small, empty_gt, MetricLevel::video),
                       doctest::Contains("disagree"), std::runtime_error);
}

TEST_CASE("best overlap reuses predictions and averages over objects") {
  LabelField gt = field(1, 1, 4, {1, 1, 2, 2});
  LabelField blob = field(1, 1, 4, {7, 7, 7, 7});
  CHECK(mbo(blob, gt, MetricLevel::video) ==
        doctest::Approx(0.5).epsilon(1e-12));

  LabelField split = field(1, 1, 4, {7, 7, 8, 9});
  CHECK(mbo(split, gt, MetricLevel::video) ==
        doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("identity swaps hurt video scores but not image scores") {
  // same segmentation every frame, but the predicted ids trade places
  LabelField gt = field(2, 1, 4, {1, 1, 2, 2, 1, 1, 2, 2});
  LabelField swapped = field(2, 1, 4, {1, 1, 2, 2, 2, 2, 1, 1});
  CHECK(fg_ari(swapped, gt, MetricLevel::image) == 1.0);
  CHECK(fg_ari(swapped, gt, MetricLevel::video) < 1.0);
  CHECK(mbo(swapped, gt, MetricLevel::image) == 1.0);
  CHECK(mbo(swapped, gt, MetricLevel::video) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("image level skips frames without foreground") {
  LabelField gt = field(2, 1, 3, {0, 0, 0, 1, 1, 2});
  LabelField pred = field(2, 1, 3, {4, 4, 4, 5, 5, 6});
  CHECK(fg_ari(pred, gt, MetricLevel::image) == 1.0);
  CHECK(mbo(pred, gt, MetricLevel::image) == 1.0);
}

TEST_CASE("predicted id permutations never change a score") {
  Rng rng(607);
  for (int round = 0; round < 10; ++round) {
    LabelField gt = random_field(rng, 2, 5, 5, 0, 3, true);
    LabelField pred = random_field(rng, 2, 5, 5, 0, 4);
    LabelField remap = pred;
    const int32_t perm[5] = {30, 12, 44, 7, 21};
    for (auto& v : remap.labels) v = perm[v];
    for (MetricLevel lvl : {MetricLevel::video, MetricLevel::image}) {
      CHECK(fg_ari(pred, gt, lvl) == fg_ari(remap, gt, lvl));
      CHECK(mbo(pred, gt, lvl) == mbo(remap, gt, lvl));
    }
  }
}

TEST_CASE("contingency metrics match quadratic pair-counting oracles") {
  Rng rng(808);
  for (int round = 0; round < 150; ++round) {
    const int64_t T = 1 + rng.uniform_int(3);
    const int64_t H = 4 + rng.uniform_int(5);
    const int64_t W = 4 + rng.uniform_int(5);
    LabelField gt = random_field(rng, T, H, W, 0, 3, true);
    LabelField pred = random_field(rng, T, H, W, 0, 4);
    for (MetricLevel lvl : {MetricLevel::video, MetricLevel::image}) {
      CHECK(std::abs(fg_ari(pred, gt, lvl) - oracle_fg_ari(pred, gt, lvl)) <=
            1e-10);
      CHECK(std::abs(mbo(pred, gt, lvl) - oracle_mbo(pred, gt, lvl)) <=
            1e-12);
    }
  }
}

TEST_CASE("patch labels wrap and upsample to pixel fields") {
  LabelField coarse = label_field_from_patches({1, 2, 3, 4}, 1, 2, 2);
  LabelField up = upsample_labels(coarse, 4, 4);
  CHECK(up.T == 1);
  CHECK(up.H == 4);
  CHECK(up.W == 4);
  for (int64_t y = 0; y < 4; ++y)
    for (int64_t x = 0; x < 4; ++x)
      CHECK(up.at(0, y, x) == coarse.at(0, y / 2, x / 2));

  CHECK_THROWS_WITH_AS(upsample_labels(coarse, 5, 4),
                       doctest::Contains("upsample"), std::runtime_error);
  CHECK_THROWS_WITH_AS(label_field_from_patches({1, 2, 3}, 1, 2, 2),
                       doctest::Contains("match"), std::runtime_error);
}

TEST_CASE("generator masks flow into label fields") {
  GeneratorConfig gc;
  gc.T = 2;
  gc.H = 24;
  gc.W = 24;
  gc.min_radius = 3;
  gc.max_radius = 5;
  gc.seed = 99;
  VideoSample vid = generate(gc);
  LabelField gt = label_field_from_masks(vid);
  CHECK(gt.T == 2);
  CHECK(gt.H == 24);
  // the ground truth against itself is a perfect segmentation
  CHECK(fg_ari(gt, gt, MetricLevel::video) == 1.0);
  CHECK(mbo(gt, gt, MetricLevel::video) == 1.0);
  CHECK(fg_ari(gt, gt, MetricLevel::image) == 1.0);
}
