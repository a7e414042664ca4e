#ifndef ROINET_TRAIN_HPP
#define ROINET_TRAIN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "roinet/metrics.hpp"
#include "roinet/network.hpp"
#include "roinet/synth.hpp"

namespace roinet {

// Knobs for one training stage. The same struct serves every stage; the
// caller fills epochs/lr from its per-stage configuration.
struct StageConfig {
  int epochs = 40;
  double lr = 0.05;
  int batch_size = 8;
  double momentum = 0.9;
  std::uint64_t seed = 1009;
};

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> test;
};

// Stratified split: per class, round(ratio * n_c) training samples, rest
// test. Deterministic in seed; train/test are disjoint and exhaustive.
SplitIndices split_dataset(const std::vector<Sample>& ds, double ratio,
                           std::uint64_t seed);

// Inverse-frequency pixel weights over the training masks (mode "inverse"):
// w_c = total / (present_classes * count_c), so every present class carries
// equal total mass and the loss scale matches the unweighted one. Absent
// classes get weight 0; mode "none" gives all ones.
std::vector<double> pixel_class_weights(const std::vector<Sample>& ds,
                                        const std::vector<int>& train_idx,
                                        int num_classes, const std::string& mode);

// Segmentation pretraining: minimizes the weighted per-pixel softmax loss on
// ground-truth masks. Returns per-epoch mean losses. NaN/Inf during training
// raises TrainingError naming the epoch.
std::vector<double> train_roi_stage(Network& roi, const std::vector<Sample>& ds,
                                    const std::vector<int>& train_idx,
                                    const StageConfig& cfg,
                                    const std::vector<double>& class_weights);

// Classifier pretraining on channel-concatenated inputs: the image plus the
// frozen segmentation network's per-pixel probabilities (or the one-hot
// ground truth with use_ground_truth). roi is never updated.
std::vector<double> train_cls_stage(Network& cls, const Network& roi,
                                    const std::vector<Sample>& ds,
                                    const std::vector<int>& train_idx,
                                    const StageConfig& cfg, bool use_ground_truth);

// End-to-end fine-tuning of the fused network with the classification loss.
std::vector<double> train_end_to_end(Network& fused, const std::vector<Sample>& ds,
                                     const std::vector<int>& train_idx,
                                     const StageConfig& cfg);

// The comparison baseline: a 3-channel classifier trained on raw images.
std::vector<double> train_plain(Network& cls, const std::vector<Sample>& ds,
                                const std::vector<int>& train_idx,
                                const StageConfig& cfg);

// Classification evaluation for any network taking 3-channel images (plain
// or fused). Argmax ties resolve to the lowest class index.
MetricsReport evaluate_classifier(const Network& net, const std::vector<Sample>& ds,
                                  const std::vector<int>& idx);

// Segmentation evaluation: per-pixel argmax against ground truth, counts
// pooled over the whole set before division.
MetricsReport evaluate_roi(const Network& roi, const std::vector<Sample>& ds,
                           const std::vector<int>& idx);

// [K,H,W] probability map for one image, plus its argmax mask.
Tensor roi_probabilities(const Network& roi, const Tensor& image);
LabelMask roi_predict_mask(const Network& roi, const Tensor& image);

}  // namespace roinet

#endif  // ROINET_TRAIN_HPP
