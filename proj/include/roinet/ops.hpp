#ifndef ROINET_OPS_HPP
#define ROINET_OPS_HPP

#include <utility>
#include <vector>

#include "roinet/autodiff.hpp"
#include "roinet/mask.hpp"
#include "roinet/rng.hpp"

namespace roinet {

// Convolution parameter block. Kernels follow the cross-correlation
// convention (no flip): kernel[out_ch][in_ch][kh][kw].
struct ConvParams {
  Tensor kernel;
  Tensor bias;
  int stride = 1;
  int padding = 0;
};

// Transposed convolution: kernel[in_ch][out_ch][kh][kw], no output padding,
// so the output extent is (in - 1) * stride + k.
struct TConvParams {
  Tensor kernel;
  int stride = 1;
};

// --- elementwise / linear algebra ---------------------------------------

Var matmul(Var a, Var b);                       // [m,k] x [k,n] -> [m,n]
Var add(Var a, Var b);                          // same shapes, elementwise
Var mul(Var a, Var b);                          // elementwise product
Var scale(Var a, double c);
Var sum(Var a);                                 // -> scalar
Var relu(Var a);

// --- spatial layers (NCHW) -----------------------------------------------

Var conv2d(Var x, Var kernel, Var bias, int stride, int padding);
Var tconv2d(Var x, Var kernel, int stride);
Var maxpool2(Var x);                            // window 2, stride 2
Var crop(Var x, Var ref, std::pair<int, int> offset);  // spatial window of ref's extent
Var center_crop(Var x, Var ref);
Var add_elementwise(Var a, Var b);
Var concat_channels(Var a, Var b);

// --- dense head ------------------------------------------------------------

Var flatten(Var x);                             // [N,...] -> [N, rest]
Var fully_connected(Var x, Var weight, Var bias);  // weight [out,in]

// Softmax along axis 1: accepts [N,K] logits or [N,K,H,W] score maps.
Var softmax(Var x);

// --- losses ----------------------------------------------------------------

// Mean over the batch of -log(p[label]); log arguments clamped at 1e-12.
Var cross_entropy(Var probs, const std::vector<int>& labels);

// Per-pixel softmax + weighted cross-entropy over an NCHW score map.
// The result is the weighted mean: sum(w[y] * nll) / sum(w[y]).
Var pixel_softmax_loss(Var scores, const std::vector<const LabelMask*>& masks,
                       const std::vector<double>& class_weights);

// --- parameter initialization ----------------------------------------------

// Fan-in scaled normal draws, std = sqrt(2 / fan_in).
void he_init(Tensor& t, long long fan_in, Rng& rng);

// Per-channel bilinear interpolation weights for a [C][C][k][k] kernel.
Tensor bilinear_tconv_kernel(int channels, int k);

}  // namespace roinet

#endif  // ROINET_OPS_HPP
