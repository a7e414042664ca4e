#ifndef ROINET_TESTS_TEST_ORACLES_HPP
#define ROINET_TESTS_TEST_ORACLES_HPP

// Shared oracle helpers: central finite differences against tape gradients,
// random tensor builders, and a brute-force segmentation counter. Everything
// here is deliberately naive; the library must match it, not the reverse.

#include <cmath>
#include <functional>
#include <vector>

#include "roinet/autodiff.hpp"
#include "roinet/mask.hpp"
#include "roinet/rng.hpp"
#include "roinet/tensor.hpp"

namespace testutil {

using roinet::LabelMask;
using roinet::Rng;
using roinet::Shape;
using roinet::Tape;
using roinet::Tensor;
using roinet::Var;

inline Tensor rand_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (long long i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Keeps every element at least `margin` away from zero so kinked ops (relu,
// maxpool ties) sit on a smooth branch under finite differences.
inline Tensor rand_tensor_off_kink(Rng& rng, Shape shape, double margin = 0.05) {
  Tensor t = rand_tensor(rng, std::move(shape));
  for (long long i = 0; i < t.numel(); ++i)
    t[i] += t[i] >= 0.0 ? margin : -margin;
  return t;
}

using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

inline double eval_loss(const std::vector<Tensor>& inputs, const LossBuilder& build) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(tape.leaf(t, false));
  Var loss = build(tape, vars);
  return tape.value(loss)[0];
}

// Max guarded relative error between tape gradients and central differences
// over every element of every input: |fd - g| / max(1, |fd|, |g|).
inline double fd_max_rel_error(const std::vector<Tensor>& inputs,
                               const LossBuilder& build, double eps = 1e-5) {
  std::vector<Tensor> grads;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) vars.push_back(tape.leaf(t, true));
    Var loss = build(tape, vars);
    tape.backward(loss);
    for (const Var& v : vars) grads.push_back(tape.grad(v));
  }

  double worst = 0.0;
  std::vector<Tensor> work = inputs;
  for (std::size_t i = 0; i < work.size(); ++i) {
    for (long long j = 0; j < work[i].numel(); ++j) {
      const double saved = work[i][j];
      work[i][j] = saved + eps;
      const double up = eval_loss(work, build);
      work[i][j] = saved - eps;
      const double dn = eval_loss(work, build);
      work[i][j] = saved;
      const double fd = (up - dn) / (2.0 * eps);
      const double g = grads[i][j];
      const double rel =
          std::abs(fd - g) / std::max({1.0, std::abs(fd), std::abs(g)});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

// Brute-force per-class counting straight from the definition; the library's
// pooled-counts implementation must reproduce these numbers exactly.
struct NaiveSegCounts {
  long long correct = 0, gt_total = 0, pred_total = 0, union_total = 0;
};

inline std::vector<NaiveSegCounts> naive_seg_counts(const LabelMask& pred,
                                                    const LabelMask& gt,
                                                    int num_classes) {
  std::vector<NaiveSegCounts> out(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    NaiveSegCounts& k = out[static_cast<std::size_t>(c)];
    for (long long i = 0; i < gt.numel(); ++i) {
      const bool in_gt = gt.v[static_cast<std::size_t>(i)] == c;
      const bool in_pred = pred.v[static_cast<std::size_t>(i)] == c;
      if (in_gt) ++k.gt_total;
      if (in_pred) ++k.pred_total;
      if (in_gt && in_pred) ++k.correct;
      if (in_gt || in_pred) ++k.union_total;
    }
  }
  return out;
}

inline LabelMask rand_mask(Rng& rng, int h, int w, int num_classes) {
  LabelMask m(h, w);
  for (auto& v : m.v)
    v = static_cast<std::uint8_t>(rng.uniform_int(0, num_classes - 1));
  return m;
}

}  // namespace testutil

#endif  // ROINET_TESTS_TEST_ORACLES_HPP
