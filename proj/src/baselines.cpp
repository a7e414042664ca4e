#include "roinet/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <string>

#include "roinet/errors.hpp"
#include "roinet/rng.hpp"

namespace roinet {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_image(const Tensor& image) {
  if (image.rank() != 3 || image.shape()[0] != 3)
    throw DimensionError("expected [3,H,W] image, got " + shape_str(image.shape()));
}

std::vector<int> labels_of(const std::vector<Sample>& ds, const std::vector<int>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(ds[static_cast<std::size_t>(i)].label);
  return out;
}

}  // namespace

// --- clustering-based features ----------------------------------------------

std::array<double, 3> mean_disease_color(const std::vector<Sample>& ds,
                                         const std::vector<int>& train_idx) {
  double sum[3] = {0.0, 0.0, 0.0};
  long long count = 0;
  for (int i : train_idx) {
    const Sample& s = ds[static_cast<std::size_t>(i)];
    const int h = s.mask.h, w = s.mask.w;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        if (s.mask.at(r, c) == 2) {
          for (int ch = 0; ch < 3; ++ch) sum[ch] += s.image(ch, r, c);
          ++count;
        }
  }
  if (count == 0) throw DataError("no spot pixels in training masks");
  return {sum[0] / count, sum[1] / count, sum[2] / count};
}

LabelMask cluster_segment(const Tensor& image, const std::array<double, 3>& color,
                          double threshold) {
  check_image(image);
  if (!(threshold > 0.0)) throw ContractError("cluster threshold must be positive");
  const int h = image.shape()[1], w = image.shape()[2];
  LabelMask out(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double d2 = 0.0;
      for (int ch = 0; ch < 3; ++ch) {
        const double d = image(ch, r, c) - color[static_cast<std::size_t>(ch)];
        d2 += d * d;
      }
      out.at(r, c) = std::sqrt(d2) < threshold ? 1 : 0;
    }
  return out;
}

namespace {

constexpr int kRgbBins = 16;
constexpr int kLbpBins = 256;
constexpr long long kMinRegionPixels = 32;

void l1_normalize(double* block, int n) {
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += block[i];
  if (total > 0.0)
    for (int i = 0; i < n; ++i) block[i] /= total;
}

// One region block: 3x16 RGB histogram then 256-bin LBP histogram, each
// L1-normalized. `in` selects region pixels; LBP codes only form on interior
// pixels where the full 8-neighborhood exists.
void region_block(const Tensor& image, const std::vector<std::uint8_t>& in,
                  double* out) {
  const int h = image.shape()[1], w = image.shape()[2];
  double* rgb = out;
  double* lbp = out + 3 * kRgbBins;
  std::fill(out, out + 3 * kRgbBins + kLbpBins, 0.0);

  std::vector<double> gray(static_cast<std::size_t>(h) * w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const std::size_t at = static_cast<std::size_t>(r) * w + c;
      gray[at] = (image(0, r, c) + image(1, r, c) + image(2, r, c)) / 3.0;
      if (!in[at]) continue;
      for (int ch = 0; ch < 3; ++ch) {
        int bin = static_cast<int>(image(ch, r, c) * kRgbBins);
        bin = std::clamp(bin, 0, kRgbBins - 1);
        rgb[ch * kRgbBins + bin] += 1.0;
      }
    }

  // Clockwise from the top-left neighbor; neighbor >= center sets the bit.
  static const int dr[8] = {-1, -1, -1, 0, 1, 1, 1, 0};
  static const int dc[8] = {-1, 0, 1, 1, 1, 0, -1, -1};
  for (int r = 1; r < h - 1; ++r)
    for (int c = 1; c < w - 1; ++c) {
      const std::size_t at = static_cast<std::size_t>(r) * w + c;
      if (!in[at]) continue;
      int code = 0;
      for (int k = 0; k < 8; ++k)
        if (gray[static_cast<std::size_t>(r + dr[k]) * w + (c + dc[k])] >= gray[at])
          code |= 1 << k;
      lbp[code] += 1.0;
    }

  l1_normalize(rgb, 3 * kRgbBins);
  l1_normalize(lbp, kLbpBins);
}

}  // namespace

std::vector<double> region_features(const Tensor& image, const LabelMask& region) {
  check_image(image);
  const int h = image.shape()[1], w = image.shape()[2];
  if (region.h != h || region.w != w)
    throw DimensionError("region mask shape mismatch");

  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<std::uint8_t> in(n), out_of(n), whole(n, 1);
  long long in_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    in[i] = region.v[i] != 0 ? 1 : 0;
    out_of[i] = 1 - in[i];
    in_count += in[i];
  }
  const long long out_count = static_cast<long long>(n) - in_count;

  const int block = 3 * kRgbBins + kLbpBins;
  std::vector<double> feat(2 * static_cast<std::size_t>(block));
  region_block(image, in_count < kMinRegionPixels ? whole : in, feat.data());
  region_block(image, out_count < kMinRegionPixels ? whole : out_of,
               feat.data() + block);
  return feat;
}

// --- linear max-margin classifier ---------------------------------------------

double LinearClassifier::score(int cls, const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != dim)
    throw DimensionError("feature dimension " + std::to_string(x.size()) +
                         " != classifier dimension " + std::to_string(dim));
  const double* w = weights.data() + static_cast<std::size_t>(cls) * dim;
  double s = bias[static_cast<std::size_t>(cls)];
  for (int d = 0; d < dim; ++d) s += w[d] * x[static_cast<std::size_t>(d)];
  return s;
}

int LinearClassifier::predict(const std::vector<double>& x) const {
  int best = 0;
  double best_s = score(0, x);
  for (int c = 1; c < num_classes; ++c) {
    const double s = score(c, x);
    if (s > best_s) {
      best_s = s;
      best = c;
    }
  }
  return best;
}

LinearClassifier train_linear_classifier(const std::vector<std::vector<double>>& x,
                                         const std::vector<int>& labels,
                                         double lambda, int epochs) {
  if (x.empty() || x.size() != labels.size())
    throw ContractError("feature/label count mismatch");
  if (!(lambda > 0.0) || epochs < 1)
    throw ContractError("need lambda > 0 and epochs >= 1");
  const int n = static_cast<int>(x.size());
  const int dim = static_cast<int>(x[0].size());
  int num_classes = 0;
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(x[static_cast<std::size_t>(i)].size()) != dim)
      throw DimensionError("ragged feature matrix");
    if (labels[static_cast<std::size_t>(i)] < 0)
      throw ContractError("negative class label");
    num_classes = std::max(num_classes, labels[static_cast<std::size_t>(i)] + 1);
  }
  std::set<int> present(labels.begin(), labels.end());
  if (present.size() < 2) throw ContractError("need at least 2 classes present");

  LinearClassifier clf;
  clf.num_classes = num_classes;
  clf.dim = dim;
  clf.weights.assign(static_cast<std::size_t>(num_classes) * dim, 0.0);
  clf.bias.assign(static_cast<std::size_t>(num_classes), 0.0);

  std::vector<double> gw(static_cast<std::size_t>(dim));
  for (int t = 0; t < epochs; ++t) {
    const double eta = 1.0 / (lambda * (t + 1));
    for (int c = 0; c < num_classes; ++c) {
      double* w = clf.weights.data() + static_cast<std::size_t>(c) * dim;
      std::fill(gw.begin(), gw.end(), 0.0);
      double gb = 0.0;
      for (int i = 0; i < n; ++i) {
        const std::vector<double>& xi = x[static_cast<std::size_t>(i)];
        const double y = labels[static_cast<std::size_t>(i)] == c ? 1.0 : -1.0;
        double s = clf.bias[static_cast<std::size_t>(c)];
        for (int d = 0; d < dim; ++d) s += w[d] * xi[static_cast<std::size_t>(d)];
        if (y * s < 1.0) {
          for (int d = 0; d < dim; ++d) gw[static_cast<std::size_t>(d)] += y * xi[static_cast<std::size_t>(d)];
          gb += y;
        }
      }
      // Algebraic form of 1 - eta * lambda; stays finite for lambda = inf,
      // where eta = 0 and the model remains identically zero.
      const double shrink = static_cast<double>(t) / (t + 1);
      for (int d = 0; d < dim; ++d)
        w[d] = shrink * w[d] + eta * gw[static_cast<std::size_t>(d)] / n;
      clf.bias[static_cast<std::size_t>(c)] += eta * gb / n;
    }
  }
  return clf;
}

// --- multiscale deep features + Fisher vectors --------------------------------

Tensor resize_bilinear(const Tensor& image, int out_h, int out_w) {
  check_image(image);
  if (out_h < 1 || out_w < 1) throw ContractError("resize extent must be positive");
  const int h = image.shape()[1], w = image.shape()[2];
  Tensor out = Tensor::zeros({3, out_h, out_w});
  for (int r = 0; r < out_h; ++r) {
    double sr = (r + 0.5) * h / out_h - 0.5;
    sr = std::clamp(sr, 0.0, static_cast<double>(h - 1));
    const int r0 = static_cast<int>(sr);
    const int r1 = std::min(r0 + 1, h - 1);
    const double fr = sr - r0;
    for (int c = 0; c < out_w; ++c) {
      double sc = (c + 0.5) * w / out_w - 0.5;
      sc = std::clamp(sc, 0.0, static_cast<double>(w - 1));
      const int c0 = static_cast<int>(sc);
      const int c1 = std::min(c0 + 1, w - 1);
      const double fc = sc - c0;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = image(ch, r0, c0) * (1.0 - fc) + image(ch, r0, c1) * fc;
        const double bot = image(ch, r1, c0) * (1.0 - fc) + image(ch, r1, c1) * fc;
        out(ch, r, c) = top * (1.0 - fr) + bot * fr;
      }
    }
  }
  return out;
}

std::vector<int> multiscale_extents(int base_size) {
  if (base_size < 8) throw ContractError("base size too small for the tap stride");
  std::vector<int> out;
  for (int i = -4; i <= 4; ++i) {
    const double raw = base_size * std::pow(2.0, i / 4.0);
    int snapped = static_cast<int>(std::llround(raw / 8.0)) * 8;
    if (snapped < 8) snapped = 8;
    out.push_back(snapped);
  }
  return out;
}

// The tap sits under three 2x pools, so extents must carry three halvings and
// leave at least a 2x2 map: 16 pixels, multiples of 8.
constexpr int kMinTapExtent = 16;

std::vector<std::vector<double>> extract_deep_features(
    const Tensor& image, const Network& net, const std::vector<int>& extents,
    std::vector<std::string>* warnings) {
  check_image(image);
  if (extents.empty()) throw ContractError("need at least one scale");
  const int tap = net.spec().feature_node;

  std::vector<std::vector<double>> out;
  int used = 0;
  for (int e : extents) {
    if (e < kMinTapExtent || e % 8 != 0) {
      if (warnings)
        warnings->push_back("scale extent " + std::to_string(e) +
                            " below receptive minimum, skipped");
      continue;
    }
    ++used;
    Tensor scaled = resize_bilinear(image, e, e);
    Tensor batch = scaled.reshaped({1, 3, e, e});
    Tensor fmap = net.infer_node(batch, tap);
    const int ch = fmap.shape()[1], fh = fmap.shape()[2], fw = fmap.shape()[3];
    for (int r = 0; r < fh; ++r)
      for (int c = 0; c < fw; ++c) {
        std::vector<double> d(static_cast<std::size_t>(ch));
        for (int k = 0; k < ch; ++k) d[static_cast<std::size_t>(k)] = fmap(0, k, r, c);
        out.push_back(std::move(d));
      }
  }
  if (used == 0) throw DataError("all scales below the receptive minimum");
  return out;
}

namespace {

void check_gmm_input(const std::vector<std::vector<double>>& x, int dim) {
  for (const auto& xi : x)
    if (static_cast<int>(xi.size()) != dim)
      throw DimensionError("descriptor dimension mismatch");
}

// Log responsibilities via log-sum-exp; returns per-point log-likelihoods and
// fills gamma [N][K] when given.
double gmm_e_step(const std::vector<std::vector<double>>& x, const GmmModel& g,
                  std::vector<double>* gamma) {
  const int n = static_cast<int>(x.size());
  const int K = g.components, D = g.dim;
  std::vector<double> log_norm(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    double s = std::log(g.weights[static_cast<std::size_t>(k)]);
    for (int d = 0; d < D; ++d)
      s -= 0.5 * std::log(kTwoPi * g.variances[static_cast<std::size_t>(k) * D + d]);
    log_norm[static_cast<std::size_t>(k)] = s;
  }
  double total = 0.0;
  std::vector<double> lp(static_cast<std::size_t>(K));
  for (int i = 0; i < n; ++i) {
    const double* xi = x[static_cast<std::size_t>(i)].data();
    double mx = -1e300;
    for (int k = 0; k < K; ++k) {
      double q = 0.0;
      const double* mu = g.means.data() + static_cast<std::size_t>(k) * D;
      const double* v = g.variances.data() + static_cast<std::size_t>(k) * D;
      for (int d = 0; d < D; ++d) {
        const double z = xi[d] - mu[d];
        q += z * z / v[d];
      }
      lp[static_cast<std::size_t>(k)] = log_norm[static_cast<std::size_t>(k)] - 0.5 * q;
      mx = std::max(mx, lp[static_cast<std::size_t>(k)]);
    }
    double denom = 0.0;
    for (int k = 0; k < K; ++k) denom += std::exp(lp[static_cast<std::size_t>(k)] - mx);
    const double lse = mx + std::log(denom);
    total += lse;
    if (gamma)
      for (int k = 0; k < K; ++k)
        (*gamma)[static_cast<std::size_t>(i) * K + k] =
            std::exp(lp[static_cast<std::size_t>(k)] - lse);
  }
  return total;
}

}  // namespace

GmmModel gmm_fit(const std::vector<std::vector<double>>& x, int components,
                 int iterations, std::uint64_t seed, std::vector<double>* ll_log) {
  const int n = static_cast<int>(x.size());
  if (components < 1) throw ContractError("need at least one component");
  if (n < components)
    throw ContractError("descriptor count " + std::to_string(n) + " < components " +
                        std::to_string(components));
  const int D = static_cast<int>(x[0].size());
  check_gmm_input(x, D);

  GmmModel g;
  g.components = components;
  g.dim = D;
  g.weights.assign(static_cast<std::size_t>(components), 1.0 / components);
  g.means.resize(static_cast<std::size_t>(components) * D);
  g.variances.assign(static_cast<std::size_t>(components) * D, 0.0);

  // k-means++ style seeding: first center uniform, then distance-weighted.
  Rng rng(seed);
  std::vector<int> centers;
  centers.push_back(rng.uniform_int(0, n - 1));
  std::vector<double> d2(static_cast<std::size_t>(n), 1e300);
  for (int k = 1; k < components; ++k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double* xi = x[static_cast<std::size_t>(i)].data();
      const double* c = x[static_cast<std::size_t>(centers.back())].data();
      double q = 0.0;
      for (int d = 0; d < D; ++d) {
        const double z = xi[d] - c[d];
        q += z * z;
      }
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], q);
      total += d2[static_cast<std::size_t>(i)];
    }
    int pick;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        r -= d2[static_cast<std::size_t>(i)];
        if (r <= 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.uniform_int(0, n - 1);
    }
    centers.push_back(pick);
  }
  for (int k = 0; k < components; ++k)
    for (int d = 0; d < D; ++d)
      g.means[static_cast<std::size_t>(k) * D + d] =
          x[static_cast<std::size_t>(centers[static_cast<std::size_t>(k)])][static_cast<std::size_t>(d)];

  // Global per-dimension variance as the shared starting spread.
  std::vector<double> mean(static_cast<std::size_t>(D), 0.0);
  for (const auto& xi : x)
    for (int d = 0; d < D; ++d) mean[static_cast<std::size_t>(d)] += xi[static_cast<std::size_t>(d)];
  for (int d = 0; d < D; ++d) mean[static_cast<std::size_t>(d)] /= n;
  std::vector<double> var(static_cast<std::size_t>(D), 0.0);
  for (const auto& xi : x)
    for (int d = 0; d < D; ++d) {
      const double z = xi[static_cast<std::size_t>(d)] - mean[static_cast<std::size_t>(d)];
      var[static_cast<std::size_t>(d)] += z * z;
    }
  for (int d = 0; d < D; ++d)
    var[static_cast<std::size_t>(d)] = std::max(var[static_cast<std::size_t>(d)] / n, kGmmVarianceFloor);
  for (int k = 0; k < components; ++k)
    for (int d = 0; d < D; ++d)
      g.variances[static_cast<std::size_t>(k) * D + d] = var[static_cast<std::size_t>(d)];

  std::vector<double> gamma(static_cast<std::size_t>(n) * components);
  for (int it = 0; it < iterations; ++it) {
    const double ll = gmm_e_step(x, g, &gamma);
    if (!std::isfinite(ll)) throw NumericError("non-finite GMM log-likelihood");
    if (ll_log) ll_log->push_back(ll);

    for (int k = 0; k < components; ++k) {
      double nk = 0.0;
      for (int i = 0; i < n; ++i) nk += gamma[static_cast<std::size_t>(i) * components + k];
      g.weights[static_cast<std::size_t>(k)] = nk / n;
      if (nk < 1e-300) continue;  // dead component keeps its previous shape
      double* mu = g.means.data() + static_cast<std::size_t>(k) * D;
      double* v = g.variances.data() + static_cast<std::size_t>(k) * D;
      for (int d = 0; d < D; ++d) {
        double m1 = 0.0, m2 = 0.0;
        for (int i = 0; i < n; ++i) {
          const double w = gamma[static_cast<std::size_t>(i) * components + k];
          const double xv = x[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
          m1 += w * xv;
          m2 += w * xv * xv;
        }
        mu[d] = m1 / nk;
        v[d] = std::max(m2 / nk - mu[d] * mu[d], kGmmVarianceFloor);
      }
    }
    double wsum = 0.0;
    for (double w : g.weights) wsum += w;
    for (double& w : g.weights) w /= wsum;
  }
  return g;
}

double gmm_log_likelihood(const std::vector<std::vector<double>>& x, const GmmModel& g) {
  check_gmm_input(x, g.dim);
  return gmm_e_step(x, g, nullptr);
}

std::vector<double> fisher_gradients(const std::vector<std::vector<double>>& x,
                                     const GmmModel& g) {
  check_gmm_input(x, g.dim);
  const int n = static_cast<int>(x.size());
  const int K = g.components, D = g.dim;
  std::vector<double> gamma(static_cast<std::size_t>(n) * K);
  gmm_e_step(x, g, &gamma);

  std::vector<double> grad(2 * static_cast<std::size_t>(K) * D, 0.0);
  double* gmu = grad.data();
  double* gv = grad.data() + static_cast<std::size_t>(K) * D;
  for (int i = 0; i < n; ++i) {
    const double* xi = x[static_cast<std::size_t>(i)].data();
    for (int k = 0; k < K; ++k) {
      const double w = gamma[static_cast<std::size_t>(i) * K + k];
      const double* mu = g.means.data() + static_cast<std::size_t>(k) * D;
      const double* v = g.variances.data() + static_cast<std::size_t>(k) * D;
      for (int d = 0; d < D; ++d) {
        const double z = xi[d] - mu[d];
        gmu[static_cast<std::size_t>(k) * D + d] += w * z / v[d];
        gv[static_cast<std::size_t>(k) * D + d] +=
            w * (z * z / (2.0 * v[d] * v[d]) - 1.0 / (2.0 * v[d]));
      }
    }
  }
  return grad;
}

std::vector<double> fisher_encode(const std::vector<std::vector<double>>& x,
                                  const GmmModel& g) {
  check_gmm_input(x, g.dim);
  const int K = g.components, D = g.dim;
  const std::size_t half = static_cast<std::size_t>(K) * D;
  if (x.empty()) return std::vector<double>(2 * half, 0.0);

  std::vector<double> fv = fisher_gradients(x, g);
  const double n = static_cast<double>(x.size());
  for (int k = 0; k < K; ++k) {
    const double wk = g.weights[static_cast<std::size_t>(k)];
    const double mu_scale = 1.0 / (n * std::sqrt(wk));
    const double var_scale = 1.0 / (n * std::sqrt(2.0 * wk));
    for (int d = 0; d < D; ++d) {
      const std::size_t at = static_cast<std::size_t>(k) * D + d;
      const double v = g.variances[at];
      fv[at] *= mu_scale * std::sqrt(v);
      fv[half + at] *= var_scale * 2.0 * v;
    }
  }
  for (double& e : fv) e = e < 0.0 ? -std::sqrt(-e) : std::sqrt(e);
  double norm = 0.0;
  for (double e : fv) norm += e * e;
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (double& e : fv) e /= norm;
  return fv;
}

// --- bilinear pooling -----------------------------------------------------------

std::vector<double> bilinear_pool(const Tensor& feat_a, const Tensor& feat_b) {
  if (feat_a.rank() != 3 || feat_b.rank() != 3)
    throw DimensionError("bilinear pooling expects [C,H,W] features");
  const int ca = feat_a.shape()[0], h = feat_a.shape()[1], w = feat_a.shape()[2];
  const int cb = feat_b.shape()[0];
  if (feat_b.shape()[1] != h || feat_b.shape()[2] != w)
    throw DimensionError("bilinear pooling spatial extents differ: " +
                         shape_str(feat_a.shape()) + " vs " + shape_str(feat_b.shape()));

  std::vector<double> acc(static_cast<std::size_t>(ca) * cb, 0.0);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int i = 0; i < ca; ++i) {
        const double a = feat_a(i, r, c);
        for (int j = 0; j < cb; ++j)
          acc[static_cast<std::size_t>(i) * cb + j] += a * feat_b(j, r, c);
      }

  for (double& e : acc) e = e < 0.0 ? -std::sqrt(-e) : std::sqrt(e);
  double norm = 0.0;
  for (double e : acc) norm += e * e;
  norm = std::sqrt(norm);
  if (norm > 0.0)
    for (double& e : acc) e /= norm;
  return acc;
}

// --- harness ---------------------------------------------------------------------

namespace {

MetricsReport score_features(const std::string& method, const BaselineConfig& cfg,
                             const std::vector<std::vector<double>>& train_x,
                             const std::vector<int>& train_y,
                             const std::vector<std::vector<double>>& test_x,
                             const std::vector<int>& test_y, int num_classes) {
  LinearClassifier clf =
      train_linear_classifier(train_x, train_y, cfg.svm_lambda, cfg.svm_epochs);
  std::vector<int> pred;
  pred.reserve(test_x.size());
  for (const auto& f : test_x) pred.push_back(clf.predict(f));

  MetricsReport rep;
  rep.method = method;
  rep.seed = cfg.seed;
  rep.accuracy = accuracy(pred, test_y);
  rep.confusion = confusion_matrix(pred, test_y, num_classes);
  rep.n_test = static_cast<int>(test_y.size());
  return rep;
}

MetricsReport run_clustering(const std::vector<Sample>& ds, const SplitIndices& split,
                             const BaselineConfig& cfg, int num_classes) {
  const std::array<double, 3> color = mean_disease_color(ds, split.train);
  const std::vector<int> train_y = labels_of(ds, split.train);
  const std::vector<int> test_y = labels_of(ds, split.test);

  auto features_at = [&](const std::vector<int>& idx, double t) {
    std::vector<std::vector<double>> out;
    out.reserve(idx.size());
    for (int i : idx) {
      const Tensor& img = ds[static_cast<std::size_t>(i)].image;
      out.push_back(region_features(img, cluster_segment(img, color, t)));
    }
    return out;
  };

  // The segmentation threshold is sensitive, so sweep a fixed grid on the
  // training split and keep the best training accuracy (first on ties).
  const double max_dist = std::sqrt(3.0);
  double best_t = 0.0, best_acc = -1.0;
  for (int j = 0; j < cfg.cluster_thresholds; ++j) {
    const double t = max_dist * (j + 1) / (cfg.cluster_thresholds + 1);
    const auto train_x = features_at(split.train, t);
    LinearClassifier clf =
        train_linear_classifier(train_x, train_y, cfg.svm_lambda, cfg.svm_epochs);
    std::vector<int> pred;
    pred.reserve(train_x.size());
    for (const auto& f : train_x) pred.push_back(clf.predict(f));
    const double acc = accuracy(pred, train_y);
    if (acc > best_acc) {
      best_acc = acc;
      best_t = t;
    }
  }

  return score_features("clustering", cfg, features_at(split.train, best_t), train_y,
                        features_at(split.test, best_t), test_y, num_classes);
}

MetricsReport run_mdfep(const std::vector<Sample>& ds, const SplitIndices& split,
                        const BaselineConfig& cfg, const Network& net,
                        int num_classes) {
  const std::vector<int> extents = multiscale_extents(ds[0].image.shape()[1]);
  std::vector<std::string> warnings;

  auto descriptors_of = [&](int i) {
    return extract_deep_features(ds[static_cast<std::size_t>(i)].image, net, extents,
                                 &warnings);
  };

  std::vector<std::vector<std::vector<double>>> train_desc;
  std::vector<std::vector<double>> pool;
  train_desc.reserve(split.train.size());
  for (int i : split.train) {
    train_desc.push_back(descriptors_of(i));
    for (const auto& d : train_desc.back()) pool.push_back(d);
  }
  std::set<std::string> seen;
  for (const auto& wmsg : warnings)
    if (seen.insert(wmsg).second) std::fprintf(stderr, "warning: %s\n", wmsg.c_str());

  GmmModel gmm = gmm_fit(pool, cfg.gmm_components, cfg.gmm_iterations,
                         seed_from(cfg.seed, "gmm"));

  std::vector<std::vector<double>> train_x;
  train_x.reserve(train_desc.size());
  for (const auto& d : train_desc) train_x.push_back(fisher_encode(d, gmm));
  std::vector<std::vector<double>> test_x;
  test_x.reserve(split.test.size());
  for (int i : split.test) test_x.push_back(fisher_encode(descriptors_of(i), gmm));

  return score_features("mdfep", cfg, train_x, labels_of(ds, split.train), test_x,
                        labels_of(ds, split.test), num_classes);
}

MetricsReport run_bilinear(const std::vector<Sample>& ds, const SplitIndices& split,
                           const BaselineConfig& cfg, const Network& net,
                           int num_classes) {
  const int tap = net.spec().feature_node;
  auto features_of = [&](int i) {
    const Tensor& img = ds[static_cast<std::size_t>(i)].image;
    Tensor batch = img.reshaped({1, img.shape()[0], img.shape()[1], img.shape()[2]});
    Tensor fmap = net.infer_node(batch, tap);
    Tensor f = fmap.reshaped({fmap.shape()[1], fmap.shape()[2], fmap.shape()[3]});
    return bilinear_pool(f, f);
  };
  std::vector<std::vector<double>> train_x, test_x;
  train_x.reserve(split.train.size());
  test_x.reserve(split.test.size());
  for (int i : split.train) train_x.push_back(features_of(i));
  for (int i : split.test) test_x.push_back(features_of(i));
  return score_features("bilinear", cfg, train_x, labels_of(ds, split.train), test_x,
                        labels_of(ds, split.test), num_classes);
}

}  // namespace

MetricsReport run_baseline(const std::string& method, const std::vector<Sample>& ds,
                           const SplitIndices& split, const BaselineConfig& cfg,
                           const Network* cls_net) {
  if (ds.empty() || split.train.empty() || split.test.empty())
    throw ContractError("baseline needs non-empty train and test splits");
  int num_classes = 0;
  for (const Sample& s : ds) num_classes = std::max(num_classes, s.label + 1);

  if (method == "clustering") return run_clustering(ds, split, cfg, num_classes);
  if (method == "mdfep" || method == "bilinear") {
    if (cls_net == nullptr)
      throw ContractError(method + " needs a trained classifier network");
    return method == "mdfep" ? run_mdfep(ds, split, cfg, *cls_net, num_classes)
                             : run_bilinear(ds, split, cfg, *cls_net, num_classes);
  }
  throw ConfigError("unknown baseline method '" + method + "'");
}

}  // namespace roinet
