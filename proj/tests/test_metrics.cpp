#include "doctest.h"

#include "roinet/metrics.hpp"
#include "roinet/rng.hpp"
#include "test_oracles.hpp"

using namespace roinet;
using testutil::naive_seg_counts;
using testutil::rand_mask;

TEST_SUITE("metrics") {

TEST_CASE("accuracy and confusion orientation") {
  // truth 0 predicted 1 lands at confusion[0][1].
  const std::vector<int> pred{1, 1, 2, 0};
  const std::vector<int> truth{0, 1, 2, 0};
  CHECK(accuracy(pred, truth) == doctest::Approx(0.75));
  const auto cm = confusion_matrix(pred, truth, 3);
  CHECK(cm[0][1] == 1);
  CHECK(cm[0][0] == 1);
  CHECK(cm[1][1] == 1);
  CHECK(cm[2][2] == 1);
  CHECK_THROWS_AS(confusion_matrix({3}, {0}, 3), ContractError);
  CHECK_THROWS_AS(accuracy({0}, {0, 1}), ContractError);
}

TEST_CASE("the worked 2x2 case") {
  // pred [[0,1],[1,1]] vs gt [[0,0],[1,1]]:
  // class 0: inter 1, union 2 -> 1/2; class 1: inter 2, union 3 -> 2/3.
  LabelMask pred(2, 2), gt(2, 2);
  pred.v = {0, 1, 1, 1};
  gt.v = {0, 0, 1, 1};
  PerClassResult iou = mean_iou(pred, gt, 2);
  CHECK(iou.per_class[0] == doctest::Approx(0.5));
  CHECK(iou.per_class[1] == doctest::Approx(2.0 / 3.0));
  CHECK(iou.mean == doctest::Approx(7.0 / 12.0));

  // Per-class pixel accuracy is recall: class 0 -> 1/2... no wait, gt class 0
  // has 2 pixels, 1 predicted 0 -> 0.5; class 1 has 2 pixels, both 1 -> 1.0.
  PerClassResult acc = per_class_pixel_accuracy(pred, gt, 2);
  CHECK(acc.per_class[0] == doctest::Approx(0.5));
  CHECK(acc.per_class[1] == doctest::Approx(1.0));
}

TEST_CASE("metrics match the brute-force oracle on random masks") {
  Rng rng(123);
  for (int it = 0; it < 30; ++it) {
    LabelMask pred = rand_mask(rng, 8, 8, 3);
    LabelMask gt = rand_mask(rng, 8, 8, 3);
    const auto naive = naive_seg_counts(pred, gt, 3);
    const auto counts = seg_counts(pred, gt, 3);
    REQUIRE(counts.size() == 3);
    for (int c = 0; c < 3; ++c) {
      CHECK(counts[c].correct == naive[c].correct);
      CHECK(counts[c].gt_total == naive[c].gt_total);
      CHECK(counts[c].pred_total == naive[c].pred_total);
      CHECK(counts[c].union_total == naive[c].union_total);
    }

    PerClassResult iou = mean_iou(pred, gt, 3);
    PerClassResult acc = per_class_pixel_accuracy(pred, gt, 3);
    for (int c = 0; c < 3; ++c) {
      if (naive[c].union_total == 0) {
        CHECK(iou.per_class[c] == -1.0);
        continue;
      }
      CHECK(iou.per_class[c] ==
            doctest::Approx(static_cast<double>(naive[c].correct) /
                            static_cast<double>(naive[c].union_total))
                .epsilon(1e-15));
      // IoU can exceed neither recall nor precision.
      if (naive[c].gt_total > 0) CHECK(iou.per_class[c] <= acc.per_class[c] + 1e-15);
      if (naive[c].pred_total > 0)
        CHECK(iou.per_class[c] <= static_cast<double>(naive[c].correct) /
                                          static_cast<double>(naive[c].pred_total) +
                                      1e-15);
    }
  }
}

TEST_CASE("absent classes are excluded from the mean") {
  LabelMask pred(2, 2), gt(2, 2);
  pred.v = {0, 0, 0, 0};
  gt.v = {0, 0, 0, 0};
  PerClassResult iou = mean_iou(pred, gt, 3);
  CHECK(iou.per_class[0] == doctest::Approx(1.0));
  CHECK(iou.per_class[1] == -1.0);
  CHECK(iou.per_class[2] == -1.0);
  CHECK(iou.mean == doctest::Approx(1.0));
}

TEST_CASE("counts pool across images before division") {
  // Image A: class 1 perfectly segmented but tiny. Image B: class 1 large
  // and badly segmented. Pooled IoU must be closer to B's than the mean of
  // the two per-image IoUs.
  LabelMask pa(2, 2), ga(2, 2);
  pa.v = {1, 0, 0, 0};
  ga.v = {1, 0, 0, 0};  // IoU_1 = 1
  LabelMask pb(4, 4), gb(4, 4);
  for (int i = 0; i < 16; ++i) {
    gb.v[static_cast<std::size_t>(i)] = 1;
    pb.v[static_cast<std::size_t>(i)] = i < 4 ? 1 : 0;  // IoU_1 = 4/16
  }
  std::vector<SegCounts> pooled = seg_counts(pa, ga, 2);
  accumulate_seg_counts(pooled, seg_counts(pb, gb, 2));
  PerClassResult iou = iou_from_counts(pooled);
  CHECK(iou.per_class[1] == doctest::Approx(5.0 / 17.0));  // (1+4)/(1+16)
  const double per_image_mean = (1.0 + 0.25) / 2.0;
  CHECK(iou.per_class[1] < per_image_mean);
}

TEST_CASE("degenerate inputs raise contract errors") {
  LabelMask pred(2, 2), gt(2, 3);
  CHECK_THROWS_AS(seg_counts(pred, gt, 2), DimensionError);
  // No class present anywhere (num_classes window misses every label).
  std::vector<SegCounts> empty(2);
  CHECK_THROWS_AS(iou_from_counts(empty), ContractError);
}

}  // TEST_SUITE
