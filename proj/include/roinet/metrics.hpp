#ifndef ROINET_METRICS_HPP
#define ROINET_METRICS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "roinet/mask.hpp"

namespace roinet {

// Fraction of positions where pred == truth.
double accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

// Entry (i,j) = number of samples with true class i predicted as j.
std::vector<std::vector<long long>> confusion_matrix(const std::vector<int>& pred,
                                                     const std::vector<int>& truth,
                                                     int num_classes);

// Integer overlap counts per class, poolable across images before division.
struct SegCounts {
  long long correct = 0;       // gt == c and pred == c
  long long gt_total = 0;      // gt == c
  long long pred_total = 0;    // pred == c
  long long union_total = 0;   // gt == c or pred == c
};

std::vector<SegCounts> seg_counts(const LabelMask& pred, const LabelMask& gt,
                                  int num_classes);
void accumulate_seg_counts(std::vector<SegCounts>& into,
                           const std::vector<SegCounts>& from);

struct PerClassResult {
  std::vector<double> per_class;  // -1 marks classes excluded from the mean
  double mean = 0.0;
};

// Per class: correct / gt_total. Classes absent from the ground truth are
// excluded from the mean.
PerClassResult pixel_accuracy_from_counts(const std::vector<SegCounts>& counts);
// Per class: correct / union. Classes with an empty union are excluded.
PerClassResult iou_from_counts(const std::vector<SegCounts>& counts);

// Single-pair conveniences over the count path.
PerClassResult per_class_pixel_accuracy(const LabelMask& pred, const LabelMask& gt,
                                        int num_classes);
PerClassResult mean_iou(const LabelMask& pred, const LabelMask& gt, int num_classes);

// One evaluation row. Segmentation fields are negative when the evaluation
// was classification-only (rendered as empty CSV cells).
struct MetricsReport {
  std::string method;
  std::uint64_t seed = 0;
  double accuracy = -1.0;
  std::vector<std::vector<long long>> confusion;
  double mean_pixel_acc = -1.0;
  double mean_iou = -1.0;
  std::vector<double> per_class_iou;
  int n_test = 0;
};

}  // namespace roinet

#endif  // ROINET_METRICS_HPP
