#include "roinet/metrics.hpp"

#include "roinet/errors.hpp"

namespace roinet {

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.empty() || pred.size() != truth.size())
    throw ContractError("accuracy needs equal-length non-empty label lists");
  long long correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == truth[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

std::vector<std::vector<long long>> confusion_matrix(const std::vector<int>& pred,
                                                     const std::vector<int>& truth,
                                                     int num_classes) {
  if (pred.size() != truth.size())
    throw ContractError("confusion matrix needs equal-length label lists");
  std::vector<std::vector<long long>> m(
      static_cast<std::size_t>(num_classes),
      std::vector<long long>(static_cast<std::size_t>(num_classes), 0));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int t = truth[i], p = pred[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes)
      throw ContractError("label outside [0, " + std::to_string(num_classes) + ")");
    ++m[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return m;
}

std::vector<SegCounts> seg_counts(const LabelMask& pred, const LabelMask& gt,
                                  int num_classes) {
  if (!pred.same_shape(gt))
    throw DimensionError("mask shapes differ: " + std::to_string(pred.h) + "x" +
                         std::to_string(pred.w) + " vs " + std::to_string(gt.h) +
                         "x" + std::to_string(gt.w));
  pred.check_labels(num_classes);
  gt.check_labels(num_classes);
  std::vector<SegCounts> c(static_cast<std::size_t>(num_classes));
  for (long long i = 0; i < gt.numel(); ++i) {
    const int t = gt.v[static_cast<std::size_t>(i)];
    const int p = pred.v[static_cast<std::size_t>(i)];
    ++c[static_cast<std::size_t>(t)].gt_total;
    ++c[static_cast<std::size_t>(p)].pred_total;
    if (t == p) {
      ++c[static_cast<std::size_t>(t)].correct;
      ++c[static_cast<std::size_t>(t)].union_total;
    } else {
      ++c[static_cast<std::size_t>(t)].union_total;
      ++c[static_cast<std::size_t>(p)].union_total;
    }
  }
  return c;
}

void accumulate_seg_counts(std::vector<SegCounts>& into,
                           const std::vector<SegCounts>& from) {
  if (into.empty()) {
    into = from;
    return;
  }
  if (into.size() != from.size())
    throw ContractError("segmentation count vectors have different class counts");
  for (std::size_t c = 0; c < into.size(); ++c) {
    into[c].correct += from[c].correct;
    into[c].gt_total += from[c].gt_total;
    into[c].pred_total += from[c].pred_total;
    into[c].union_total += from[c].union_total;
  }
}

PerClassResult pixel_accuracy_from_counts(const std::vector<SegCounts>& counts) {
  PerClassResult r;
  double sum = 0.0;
  int present = 0;
  for (const SegCounts& c : counts) {
    if (c.gt_total == 0) {
      r.per_class.push_back(-1.0);
      continue;
    }
    const double v = static_cast<double>(c.correct) / static_cast<double>(c.gt_total);
    r.per_class.push_back(v);
    sum += v;
    ++present;
  }
  if (present == 0) throw ContractError("no class present in ground truth");
  r.mean = sum / present;
  return r;
}

PerClassResult iou_from_counts(const std::vector<SegCounts>& counts) {
  PerClassResult r;
  double sum = 0.0;
  int present = 0;
  for (const SegCounts& c : counts) {
    if (c.union_total == 0) {
      r.per_class.push_back(-1.0);
      continue;
    }
    const double v =
        static_cast<double>(c.correct) / static_cast<double>(c.union_total);
    r.per_class.push_back(v);
    sum += v;
    ++present;
  }
  if (present == 0) throw ContractError("no class present in either mask");
  r.mean = sum / present;
  return r;
}

PerClassResult per_class_pixel_accuracy(const LabelMask& pred, const LabelMask& gt,
                                        int num_classes) {
  return pixel_accuracy_from_counts(seg_counts(pred, gt, num_classes));
}

PerClassResult mean_iou(const LabelMask& pred, const LabelMask& gt, int num_classes) {
  return iou_from_counts(seg_counts(pred, gt, num_classes));
}

}  // namespace roinet
