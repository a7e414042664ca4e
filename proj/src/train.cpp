#include "roinet/train.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "roinet/optim.hpp"

namespace roinet {

namespace {

// Stacks dataset images (selected by batch indices) into one NCHW tensor.
Tensor stack_images(const std::vector<Sample>& ds, const std::vector<int>& batch) {
  const Tensor& first = ds[static_cast<std::size_t>(batch[0])].image;
  const int C = first.dim(0), H = first.dim(1), W = first.dim(2);
  Tensor out({static_cast<int>(batch.size()), C, H, W});
  const std::size_t per = static_cast<std::size_t>(C) * H * W;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Tensor& img = ds[static_cast<std::size_t>(batch[i])].image;
    if (img.dim(0) != C || img.dim(1) != H || img.dim(2) != W)
      throw DimensionError("dataset images have mixed shapes");
    std::copy(img.data(), img.data() + per, out.data() + i * per);
  }
  return out;
}

Tensor stack_tensors(const std::vector<Tensor>& items, const std::vector<int>& batch) {
  const Tensor& first = items[static_cast<std::size_t>(batch[0])];
  const int C = first.dim(0), H = first.dim(1), W = first.dim(2);
  Tensor out({static_cast<int>(batch.size()), C, H, W});
  const std::size_t per = static_cast<std::size_t>(C) * H * W;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Tensor& t = items[static_cast<std::size_t>(batch[i])];
    std::copy(t.data(), t.data() + per, out.data() + i * per);
  }
  return out;
}

// Shared minibatch loop. build_loss records the forward graph for one batch
// on the given tape (with trainable parameter leaves) and returns the scalar
// loss plus the emitted parameter handles.
std::vector<double> run_epochs(
    Network& net, const std::vector<int>& train_idx, const StageConfig& cfg,
    const char* stage_name,
    const std::function<Var(Tape&, const std::vector<int>&, std::vector<Var>&)>&
        build_loss) {
  if (train_idx.empty()) throw ContractError("empty training set");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be positive");
  SgdMomentum opt(cfg.momentum);
  Rng shuffle_rng(seed_from(cfg.seed, stage_name));
  std::vector<int> order = train_idx;
  std::vector<double> epoch_losses;
  epoch_losses.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    long long seen = 0;
    // Remainder batches are dropped: a 2-sample tail has a 4x noisier mean
    // gradient, and with momentum 0.9 that one kick per epoch destabilizes
    // the small-batch regime. The shuffle still cycles every sample through.
    // A set smaller than one batch trains whole.
    const std::size_t bs = std::min(order.size(), static_cast<std::size_t>(cfg.batch_size));
    for (std::size_t at = 0; at + bs <= order.size(); at += bs) {
      const std::size_t end = at + bs;
      const std::vector<int> batch(order.begin() + static_cast<std::ptrdiff_t>(at),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
      try {
        Tape tape;
        std::vector<Var> param_vars;
        Var loss = build_loss(tape, batch, param_vars);
        const double value = tape.value(loss)[0];
        if (!std::isfinite(value))
          throw NumericError("non-finite loss");
        tape.backward(loss);
        std::vector<Tensor*> params;
        std::vector<const Tensor*> grads;
        params.reserve(param_vars.size());
        grads.reserve(param_vars.size());
        for (std::size_t p = 0; p < param_vars.size(); ++p) {
          params.push_back(&net.params()[p].tensor);
          grads.push_back(&tape.grad(param_vars[p]));
        }
        opt.step(params, grads, cfg.lr);
        loss_sum += value * static_cast<double>(batch.size());
        seen += static_cast<long long>(batch.size());
      } catch (const NumericError& e) {
        throw TrainingError(std::string(stage_name) + " diverged at epoch " +
                            std::to_string(epoch + 1) + ": " + e.what());
      }
    }
    epoch_losses.push_back(loss_sum / static_cast<double>(seen));
  }
  return epoch_losses;
}

// Per-pixel probabilities of a frozen segmentation net as extra channels.
Tensor fused_input(const Network& roi, const Tensor& image) {
  Tensor probs = roi_probabilities(roi, image);
  const int K = probs.dim(0), H = probs.dim(1), W = probs.dim(2);
  Tensor out({3 + K, H, W});
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::copy(image.data(), image.data() + 3 * plane, out.data());
  std::copy(probs.data(), probs.data() + static_cast<std::size_t>(K) * plane,
            out.data() + 3 * plane);
  return out;
}

Tensor one_hot_input(const Tensor& image, const LabelMask& mask, int K) {
  const int H = image.dim(1), W = image.dim(2);
  Tensor out({3 + K, H, W});
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::copy(image.data(), image.data() + 3 * plane, out.data());
  for (long long i = 0; i < mask.numel(); ++i)
    out[3 * static_cast<long long>(plane) +
        mask.v[static_cast<std::size_t>(i)] * static_cast<long long>(plane) + i] = 1.0;
  return out;
}

std::vector<int> argmax_rows(const Tensor& probs) {
  const int N = probs.dim(0), K = probs.dim(1);
  std::vector<int> out(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) {
    int best = 0;
    for (int k = 1; k < K; ++k)
      if (probs(n, k) > probs(n, best)) best = k;
    out[static_cast<std::size_t>(n)] = best;
  }
  return out;
}

}  // namespace

SplitIndices split_dataset(const std::vector<Sample>& ds, double ratio,
                           std::uint64_t seed) {
  if (ratio <= 0.0 || ratio >= 1.0)
    throw ContractError("split ratio must lie strictly between 0 and 1");
  int max_label = 0;
  for (const Sample& s : ds) max_label = std::max(max_label, s.label);
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(max_label) + 1);
  for (std::size_t i = 0; i < ds.size(); ++i)
    by_class[static_cast<std::size_t>(ds[i].label)].push_back(static_cast<int>(i));
  for (std::size_t c = 0; c < by_class.size(); ++c)
    if (by_class[c].size() < 2)
      throw DataError("class " + std::to_string(c) + " has fewer than 2 samples");
  Rng rng(seed_from(seed, "split"));
  SplitIndices out;
  for (auto& idx : by_class) {
    rng.shuffle(idx);
    const long long n_train = std::llround(ratio * static_cast<double>(idx.size()));
    if (n_train < 1 || n_train >= static_cast<long long>(idx.size()))
      throw ContractError("split ratio leaves an empty train or test side");
    for (std::size_t i = 0; i < idx.size(); ++i)
      (static_cast<long long>(i) < n_train ? out.train : out.test).push_back(idx[i]);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::vector<double> pixel_class_weights(const std::vector<Sample>& ds,
                                        const std::vector<int>& train_idx,
                                        int num_classes, const std::string& mode) {
  if (mode == "none") return std::vector<double>(static_cast<std::size_t>(num_classes), 1.0);
  if (mode != "inverse")
    throw ConfigError("unknown class weight mode '" + mode + "'");
  std::vector<long long> counts(static_cast<std::size_t>(num_classes), 0);
  long long total = 0;
  for (int i : train_idx) {
    const LabelMask& m = ds[static_cast<std::size_t>(i)].mask;
    m.check_labels(num_classes);
    for (auto v : m.v) ++counts[v];
    total += m.numel();
  }
  if (total == 0) throw DataError("no mask pixels in the training set");
  std::vector<double> w(static_cast<std::size_t>(num_classes), 0.0);
  int present = 0;
  for (long long c : counts)
    if (c > 0) ++present;
  for (std::size_t c = 0; c < w.size(); ++c)
    if (counts[c] > 0)
      w[c] = static_cast<double>(total) /
             (static_cast<double>(present) * static_cast<double>(counts[c]));
  return w;
}

std::vector<double> train_roi_stage(Network& roi, const std::vector<Sample>& ds,
                                    const std::vector<int>& train_idx,
                                    const StageConfig& cfg,
                                    const std::vector<double>& class_weights) {
  for (int i : train_idx)
    if (ds[static_cast<std::size_t>(i)].mask.numel() == 0)
      throw DataError("training sample without a mask");
  return run_epochs(roi, train_idx, cfg, "stage-a",
                    [&](Tape& tape, const std::vector<int>& batch,
                        std::vector<Var>& param_vars) {
                      Var x = tape.leaf(stack_images(ds, batch), false);
                      auto r = roi.forward(tape, x, true);
                      param_vars = r.params;
                      std::vector<const LabelMask*> masks;
                      masks.reserve(batch.size());
                      for (int i : batch)
                        masks.push_back(&ds[static_cast<std::size_t>(i)].mask);
                      return pixel_softmax_loss(r.nodes.back(), masks, class_weights);
                    });
}

std::vector<double> train_cls_stage(Network& cls, const Network& roi,
                                    const std::vector<Sample>& ds,
                                    const std::vector<int>& train_idx,
                                    const StageConfig& cfg, bool use_ground_truth) {
  const int K = roi.spec().num_classes;
  if (cls.spec().in_channels != 3 + K)
    throw ConfigError("classifier pretraining needs a " + std::to_string(3 + K) +
                      "-channel classifier");
  // The segmentation net is frozen for this stage, so its output per sample
  // is constant: compute each fused input once, not once per epoch.
  std::vector<Tensor> inputs(ds.size());
  for (int i : train_idx) {
    const Sample& s = ds[static_cast<std::size_t>(i)];
    inputs[static_cast<std::size_t>(i)] =
        use_ground_truth ? one_hot_input(s.image, s.mask, K) : fused_input(roi, s.image);
  }
  return run_epochs(cls, train_idx, cfg, "stage-b",
                    [&](Tape& tape, const std::vector<int>& batch,
                        std::vector<Var>& param_vars) {
                      Var x = tape.leaf(stack_tensors(inputs, batch), false);
                      auto r = cls.forward(tape, x, true);
                      param_vars = r.params;
                      std::vector<int> labels;
                      labels.reserve(batch.size());
                      for (int i : batch)
                        labels.push_back(ds[static_cast<std::size_t>(i)].label);
                      return cross_entropy(r.nodes.back(), labels);
                    });
}

namespace {

std::vector<double> train_classification(Network& net, const std::vector<Sample>& ds,
                                         const std::vector<int>& train_idx,
                                         const StageConfig& cfg, const char* name) {
  return run_epochs(net, train_idx, cfg, name,
                    [&](Tape& tape, const std::vector<int>& batch,
                        std::vector<Var>& param_vars) {
                      Var x = tape.leaf(stack_images(ds, batch), false);
                      auto r = net.forward(tape, x, true);
                      param_vars = r.params;
                      std::vector<int> labels;
                      labels.reserve(batch.size());
                      for (int i : batch)
                        labels.push_back(ds[static_cast<std::size_t>(i)].label);
                      return cross_entropy(r.nodes.back(), labels);
                    });
}

}  // namespace

std::vector<double> train_end_to_end(Network& fused, const std::vector<Sample>& ds,
                                     const std::vector<int>& train_idx,
                                     const StageConfig& cfg) {
  return train_classification(fused, ds, train_idx, cfg, "stage-c");
}

std::vector<double> train_plain(Network& cls, const std::vector<Sample>& ds,
                                const std::vector<int>& train_idx,
                                const StageConfig& cfg) {
  if (cls.spec().in_channels != 3)
    throw ConfigError("plain training expects a 3-channel classifier");
  return train_classification(cls, ds, train_idx, cfg, "plain");
}

MetricsReport evaluate_classifier(const Network& net, const std::vector<Sample>& ds,
                                  const std::vector<int>& idx) {
  if (idx.empty()) throw ContractError("empty evaluation set");
  const int K = net.spec().num_classes;
  std::vector<int> preds, labels;
  preds.reserve(idx.size());
  labels.reserve(idx.size());
  const int eval_batch = 16;
  for (std::size_t at = 0; at < idx.size(); at += eval_batch) {
    const std::size_t end = std::min(idx.size(), at + eval_batch);
    const std::vector<int> batch(idx.begin() + static_cast<std::ptrdiff_t>(at),
                                 idx.begin() + static_cast<std::ptrdiff_t>(end));
    Tensor probs = net.infer(stack_images(ds, batch));
    for (int p : argmax_rows(probs)) preds.push_back(p);
    for (int i : batch) labels.push_back(ds[static_cast<std::size_t>(i)].label);
  }
  MetricsReport r;
  r.accuracy = accuracy(preds, labels);
  r.confusion = confusion_matrix(preds, labels, K);
  r.n_test = static_cast<int>(idx.size());
  return r;
}

Tensor roi_probabilities(const Network& roi, const Tensor& image) {
  Tensor batch = image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)});
  Tensor scores = roi.infer(batch);
  Tape tape;
  Var s = tape.leaf(std::move(scores), false);
  Tensor probs = tape.value(softmax(s));
  return probs.reshaped({probs.dim(1), probs.dim(2), probs.dim(3)});
}

LabelMask roi_predict_mask(const Network& roi, const Tensor& image) {
  Tensor probs = roi_probabilities(roi, image);
  const int K = probs.dim(0), H = probs.dim(1), W = probs.dim(2);
  LabelMask mask(H, W);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (std::size_t i = 0; i < plane; ++i) {
    int best = 0;
    for (int k = 1; k < K; ++k)
      if (probs[static_cast<long long>(k * plane + i)] >
          probs[static_cast<long long>(best * plane + i)])
        best = k;
    mask.v[i] = static_cast<std::uint8_t>(best);
  }
  return mask;
}

MetricsReport evaluate_roi(const Network& roi, const std::vector<Sample>& ds,
                           const std::vector<int>& idx) {
  if (idx.empty()) throw ContractError("empty evaluation set");
  const int K = roi.spec().num_classes;
  std::vector<SegCounts> pooled;
  for (int i : idx) {
    const Sample& s = ds[static_cast<std::size_t>(i)];
    const LabelMask pred = roi_predict_mask(roi, s.image);
    accumulate_seg_counts(pooled, seg_counts(pred, s.mask, K));
  }
  MetricsReport r;
  const PerClassResult acc = pixel_accuracy_from_counts(pooled);
  const PerClassResult iou = iou_from_counts(pooled);
  r.mean_pixel_acc = acc.mean;
  r.mean_iou = iou.mean;
  r.per_class_iou = iou.per_class;
  r.n_test = static_cast<int>(idx.size());
  return r;
}

}  // namespace roinet
