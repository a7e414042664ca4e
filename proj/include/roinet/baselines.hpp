#ifndef ROINET_BASELINES_HPP
#define ROINET_BASELINES_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "roinet/metrics.hpp"
#include "roinet/network.hpp"
#include "roinet/synth.hpp"
#include "roinet/train.hpp"

namespace roinet {

// --- clustering-based features ----------------------------------------------

// Mean RGB over all training pixels labeled spot. The generator's exact
// masks stand in for manual marking.
std::array<double, 3> mean_disease_color(const std::vector<Sample>& ds,
                                         const std::vector<int>& train_idx);

// Binary membership: pixel in the disease region iff its Euclidean RGB
// distance to `color` is below `threshold`. Purely pointwise.
LabelMask cluster_segment(const Tensor& image, const std::array<double, 3>& color,
                          double threshold);

// Histogram features of the region and its complement: per block a
// 3x16-bin RGB histogram and a 256-bin 8-neighbor LBP histogram, each
// L1-normalized. Regions under 32 pixels fall back to the whole image.
// Dimension: 2 * (3*16 + 256) = 608.
std::vector<double> region_features(const Tensor& image, const LabelMask& region);

// --- linear max-margin classifier ---------------------------------------------

struct LinearClassifier {
  int num_classes = 0;
  int dim = 0;
  std::vector<double> weights;  // [num_classes][dim]
  std::vector<double> bias;     // [num_classes]

  double score(int cls, const std::vector<double>& x) const;
  int predict(const std::vector<double>& x) const;  // ties to lowest index
};

// One-vs-rest hinge loss with L2 regularization, full-batch deterministic
// subgradient descent with step 1/(lambda*(t+1)) over a fixed epoch count.
LinearClassifier train_linear_classifier(const std::vector<std::vector<double>>& x,
                                         const std::vector<int>& labels,
                                         double lambda, int epochs);

// --- multiscale deep features + Fisher vectors --------------------------------

Tensor resize_bilinear(const Tensor& image, int out_h, int out_w);

// Nine-step geometric ladder 2^(i/4), i in [-4,4], as absolute pixel extents
// snapped to multiples of 8 (the tap stride) for a given base size.
std::vector<int> multiscale_extents(int base_size);

// Channel fibers of the classifier's descriptor tap, pooled over scales.
// Extents below 16 pixels are skipped with a warning; all skipped is a data
// error.
std::vector<std::vector<double>> extract_deep_features(
    const Tensor& image, const Network& net, const std::vector<int>& extents,
    std::vector<std::string>* warnings);

struct GmmModel {
  int components = 0;
  int dim = 0;
  std::vector<double> weights;    // [K]
  std::vector<double> means;      // [K][D]
  std::vector<double> variances;  // [K][D], diagonal, floored
};

constexpr double kGmmVarianceFloor = 1e-6;

// Diagonal EM from a k-means++ style seeding. Per-iteration total
// log-likelihood (appended to ll_log when given) is non-decreasing within
// 1e-9.
GmmModel gmm_fit(const std::vector<std::vector<double>>& x, int components,
                 int iterations, std::uint64_t seed,
                 std::vector<double>* ll_log = nullptr);

// Total log-likelihood of descriptors under the model.
double gmm_log_likelihood(const std::vector<std::vector<double>>& x,
                          const GmmModel& gmm);

// Exact gradient of the total log-likelihood w.r.t. means then variances,
// laid out [K*D means | K*D variances]. This is the finite-difference
// checkable core of the encoding.
std::vector<double> fisher_gradients(const std::vector<std::vector<double>>& x,
                                     const GmmModel& gmm);

// Fisher vector: the gradients above with the standard per-component
// weight/variance scaling, then signed square root and L2 normalization.
std::vector<double> fisher_encode(const std::vector<std::vector<double>>& x,
                                  const GmmModel& gmm);

// --- bilinear pooling -----------------------------------------------------------

// Sum over locations of outer(fiberA, fiberB), flattened row-major, then
// signed square root + L2 normalization. All-zero pooled output skips
// normalization.
std::vector<double> bilinear_pool(const Tensor& feat_a, const Tensor& feat_b);

// --- harness ---------------------------------------------------------------------

struct BaselineConfig {
  int gmm_components = 16;
  int gmm_iterations = 50;
  double svm_lambda = 1e-4;
  int svm_epochs = 400;
  int cluster_thresholds = 16;
  std::uint64_t seed = 1009;
};

// Full pipeline for one method ("clustering", "mdfep", "bilinear"):
// features on the training split, classifier training, test-split report.
// mdfep/bilinear need the trained 3-channel classifier for the tap.
MetricsReport run_baseline(const std::string& method, const std::vector<Sample>& ds,
                           const SplitIndices& split, const BaselineConfig& cfg,
                           const Network* cls_net);

}  // namespace roinet

#endif  // ROINET_BASELINES_HPP
