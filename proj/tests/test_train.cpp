#include "doctest.h"

#include <algorithm>
#include <set>

#include "roinet/network.hpp"
#include "roinet/synth.hpp"
#include "roinet/train.hpp"

using namespace roinet;

namespace {

const std::vector<int> kTinyBlocks{4, 4, 8, 8};

std::vector<Sample> tiny_dataset(int per_class, std::uint64_t seed) {
  GenConfig g;
  g.size = 32;
  g.class_counts = {per_class, per_class, per_class};
  g.master_seed = seed;
  return gen_dataset(g);
}

StageConfig quick_stage(int epochs, double lr) {
  StageConfig c;
  c.epochs = epochs;
  c.lr = lr;
  c.batch_size = 4;
  c.seed = 11;
  return c;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("split is stratified, disjoint and exhaustive") {
  GenConfig g;
  g.size = 32;
  g.class_counts = {11, 6, 9};
  g.master_seed = 3;
  const std::vector<Sample> ds = gen_dataset(g);
  const SplitIndices split = split_dataset(ds, 0.5, 17);

  // round(0.5 * 11) = 6, round(0.5 * 6) = 3, round(0.5 * 9) = 5 (llround
  // rounds half away from zero).
  int train_per_class[3] = {0, 0, 0};
  for (int i : split.train) ++train_per_class[ds[static_cast<std::size_t>(i)].label];
  CHECK(train_per_class[0] == 6);
  CHECK(train_per_class[1] == 3);
  CHECK(train_per_class[2] == 5);
  CHECK(split.train.size() + split.test.size() == ds.size());

  std::set<int> seen(split.train.begin(), split.train.end());
  for (int i : split.test) CHECK(seen.insert(i).second);
  CHECK(seen.size() == ds.size());

  // Deterministic in the seed, different under another seed.
  const SplitIndices again = split_dataset(ds, 0.5, 17);
  CHECK(again.train == split.train);
  const SplitIndices other = split_dataset(ds, 0.5, 18);
  CHECK(other.train != split.train);

  CHECK_THROWS_AS(split_dataset(ds, 1.0, 17), ContractError);
  CHECK_THROWS_AS(split_dataset(ds, 0.0, 17), ContractError);
}

TEST_CASE("inverse-frequency weights are normalized and zero absent classes") {
  // Two tiny hand masks: class 0 has 6 pixels, class 1 has 2, class 2 absent.
  std::vector<Sample> ds(2);
  for (Sample& s : ds) {
    s.image = Tensor::zeros({3, 2, 2});
    s.mask = LabelMask(2, 2);
  }
  ds[0].mask.v = {0, 0, 0, 1};
  ds[1].mask.v = {0, 0, 0, 1};
  const std::vector<double> w = pixel_class_weights(ds, {0, 1}, 3, "inverse");
  REQUIRE(w.size() == 3);
  CHECK(w[2] == 0.0);
  // w_c = total / (present * count_c): w0 = 8/(2*6), w1 = 8/(2*2).
  CHECK(w[0] == doctest::Approx(2.0 / 3.0));
  CHECK(w[1] == doctest::Approx(2.0));
  CHECK(w[0] * 6 == doctest::Approx(w[1] * 2));  // equal per-class mass

  const std::vector<double> ones = pixel_class_weights(ds, {0, 1}, 3, "none");
  CHECK(ones == std::vector<double>{1.0, 1.0, 1.0});
  CHECK_THROWS_AS(pixel_class_weights(ds, {0, 1}, 3, "sqrt"), ConfigError);
}

TEST_CASE("roi stage learns on a tiny overfit set") {
  const std::vector<Sample> ds = tiny_dataset(2, 21);
  std::vector<int> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);

  Rng rng(31);
  Network roi(build_roi_spec(3, 32, kTinyBlocks), rng);
  const std::vector<double> w = pixel_class_weights(ds, idx, 3, "inverse");
  const std::vector<double> losses = train_roi_stage(roi, ds, idx, quick_stage(8, 0.05), w);
  REQUIRE(losses.size() == 8);
  CHECK(losses.back() < losses.front());
  CHECK(std::isfinite(losses.back()));

  const MetricsReport rep = evaluate_roi(roi, ds, idx);
  CHECK(rep.mean_pixel_acc > 0.0);
  CHECK(rep.mean_iou > 0.0);
  CHECK(rep.n_test == static_cast<int>(ds.size()));
}

TEST_CASE("training is deterministic under a fixed seed") {
  const std::vector<Sample> ds = tiny_dataset(2, 22);
  std::vector<int> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);

  auto run = [&] {
    Rng rng(7);
    Network cls(build_classifier_spec(3, 3, 32, kTinyBlocks), rng);
    return train_plain(cls, ds, idx, quick_stage(3, 0.02));
  };
  const std::vector<double> a = run();
  const std::vector<double> b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("divergence is reported as a training error naming the epoch") {
  const std::vector<Sample> ds = tiny_dataset(1, 23);
  std::vector<int> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);

  Rng rng(8);
  Network cls(build_classifier_spec(3, 3, 32, kTinyBlocks), rng);
  // A learning rate this large pushes the weights past the double range on
  // the first update, so the next forward pass overflows.
  CHECK_THROWS_WITH_AS(train_plain(cls, ds, idx, quick_stage(50, 1e200)),
                       doctest::Contains("diverged"), TrainingError);
}

TEST_CASE("stage b consumes frozen roi probabilities") {
  const std::vector<Sample> ds = tiny_dataset(2, 24);
  std::vector<int> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);

  Rng rng(9);
  Network roi(build_roi_spec(3, 32, kTinyBlocks), rng);
  Network cls(build_classifier_spec(6, 3, 32, kTinyBlocks), rng);
  const Tensor before = roi.params()[0].tensor;
  const std::vector<double> losses =
      train_cls_stage(cls, roi, ds, idx, quick_stage(2, 0.02), false);
  CHECK(losses.size() == 2);
  // The segmentation net is frozen during stage B.
  const Tensor& after = roi.params()[0].tensor;
  for (long long i = 0; i < before.numel(); ++i) CHECK(before[i] == after[i]);

  // Ground-truth variant runs too (one-hot masks instead of predictions).
  const std::vector<double> gt_losses =
      train_cls_stage(cls, roi, ds, idx, quick_stage(1, 0.02), true);
  CHECK(gt_losses.size() == 1);

  // A 3-channel classifier cannot absorb the 6-channel stage input.
  Network plain(build_classifier_spec(3, 3, 32, kTinyBlocks), rng);
  CHECK_THROWS_AS(train_cls_stage(plain, roi, ds, idx, quick_stage(1, 0.02), false),
                  ConfigError);
}

TEST_CASE("fused training moves segmentation parameters too") {
  const std::vector<Sample> ds = tiny_dataset(2, 25);
  std::vector<int> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);

  Rng rng(10);
  Network roi(build_roi_spec(3, 32, kTinyBlocks), rng);
  Network cls(build_classifier_spec(6, 3, 32, kTinyBlocks), rng);
  Network fused = fuse_networks(roi, cls);
  const Tensor before = fused.params()[0].tensor;
  train_end_to_end(fused, ds, idx, quick_stage(2, 0.005));
  bool moved = false;
  const Tensor& after = fused.params()[0].tensor;
  for (long long i = 0; i < before.numel(); ++i)
    if (before[i] != after[i]) moved = true;
  CHECK(moved);

  const MetricsReport rep = evaluate_classifier(fused, ds, idx);
  CHECK(rep.accuracy >= 0.0);
  CHECK(rep.accuracy <= 1.0);
  CHECK(rep.confusion.size() == 3);
}

TEST_CASE("roi probability maps are normalized per pixel") {
  const std::vector<Sample> ds = tiny_dataset(1, 26);
  Rng rng(12);
  Network roi(build_roi_spec(3, 32, kTinyBlocks), rng);
  const Tensor probs = roi_probabilities(roi, ds[0].image);
  CHECK(probs.shape() == Shape{3, 32, 32});
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += probs(k, r, c);
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
  const LabelMask pred = roi_predict_mask(roi, ds[0].image);
  CHECK(pred.h == 32);
  CHECK(pred.w == 32);
}

}  // TEST_SUITE
