#include "roinet/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace roinet {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;
using Mat = Eigen::MatrixXd;

constexpr double kLogClamp = 1e-12;

void check_rank(const Tensor& t, int rank, const char* what) {
  if (t.rank() != rank)
    throw DimensionError(std::string(what) + " expected rank " + std::to_string(rank) +
                         ", got " + shape_str(t.shape()));
}

// Patch matrix of one CHW sample: rows = C*kh*kw, cols = oh*ow.
void im2col(const double* x, int C, int H, int W, int kh, int kw, int stride,
            int pad, int oh, int ow, Mat& cols) {
  cols.resize(static_cast<Eigen::Index>(C) * kh * kw,
              static_cast<Eigen::Index>(oh) * ow);
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      double* col = cols.col(static_cast<Eigen::Index>(i) * ow + j).data();
      int r = 0;
      for (int c = 0; c < C; ++c) {
        const double* plane = x + static_cast<std::size_t>(c) * H * W;
        for (int ki = 0; ki < kh; ++ki) {
          const int ih = i * stride - pad + ki;
          if (ih < 0 || ih >= H) {
            for (int kj = 0; kj < kw; ++kj) col[r++] = 0.0;
            continue;
          }
          const double* row = plane + static_cast<std::size_t>(ih) * W;
          for (int kj = 0; kj < kw; ++kj) {
            const int iw = j * stride - pad + kj;
            col[r++] = (iw < 0 || iw >= W) ? 0.0 : row[iw];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds patch columns back onto the CHW grid.
void col2im(const Mat& cols, int C, int H, int W, int kh, int kw, int stride,
            int pad, int oh, int ow, double* x) {
  for (int i = 0; i < oh; ++i) {
    for (int j = 0; j < ow; ++j) {
      const double* col = cols.col(static_cast<Eigen::Index>(i) * ow + j).data();
      int r = 0;
      for (int c = 0; c < C; ++c) {
        double* plane = x + static_cast<std::size_t>(c) * H * W;
        for (int ki = 0; ki < kh; ++ki) {
          const int ih = i * stride - pad + ki;
          if (ih < 0 || ih >= H) {
            r += kw;
            continue;
          }
          double* row = plane + static_cast<std::size_t>(ih) * W;
          for (int kj = 0; kj < kw; ++kj) {
            const int iw = j * stride - pad + kj;
            if (iw >= 0 && iw < W) row[iw] += col[r];
            ++r;
          }
        }
      }
    }
  }
}

// Stable softmax of a strided fiber: reads in[k*in_step], writes
// out[k*out_step], k in [0,K).
inline void softmax_fiber(const double* in, long long in_step, double* out,
                          long long out_step, int K) {
  double m = in[0];
  for (int k = 1; k < K; ++k) m = std::max(m, in[k * in_step]);
  double z = 0.0;
  for (int k = 0; k < K; ++k) {
    const double e = std::exp(in[k * in_step] - m);
    out[k * out_step] = e;
    z += e;
  }
  const double inv = 1.0 / z;
  for (int k = 0; k < K; ++k) out[k * out_step] *= inv;
}

}  // namespace

// --- elementwise / linear algebra -------------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = *a.tape;
  t.check_same_tape(b);
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  check_rank(A, 2, "matmul lhs");
  check_rank(B, 2, "matmul rhs");
  if (A.dim(1) != B.dim(0))
    throw DimensionError("matmul inner extents differ: " + shape_str(A.shape()) +
                         " vs " + shape_str(B.shape()));
  const int m = A.dim(0), k = A.dim(1), n = B.dim(1);
  Tensor out({m, n});
  MapRM(out.data(), m, n).noalias() = CMapRM(A.data(), m, k) * CMapRM(B.data(), k, n);
  return t.emit("matmul", std::move(out), {a, b}, [a, b, m, k, n](Tape& tp, Var o) {
    CMapRM g(tp.grad_buffer(o).data(), m, n);
    if (tp.requires_grad(a)) {
      MapRM da(tp.grad_buffer(a).data(), m, k);
      da.noalias() += g * CMapRM(tp.value(b).data(), k, n).transpose();
    }
    if (tp.requires_grad(b)) {
      MapRM db(tp.grad_buffer(b).data(), k, n);
      db.noalias() += CMapRM(tp.value(a).data(), m, k).transpose() * g;
    }
  });
}

Var add_elementwise(Var a, Var b) {
  Tape& t = *a.tape;
  t.check_same_tape(b);
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  if (!A.same_shape(B))
    throw DimensionError("elementwise add of mismatched shapes " +
                         shape_str(A.shape()) + " vs " + shape_str(B.shape()));
  Tensor out(A.shape());
  const long long n = A.numel();
  const double* pa = A.data();
  const double* pb = B.data();
  double* po = out.data();
  for (long long i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  return t.emit("add", std::move(out), {a, b}, [a, b, n](Tape& tp, Var o) {
    const double* g = tp.grad_buffer(o).data();
    if (tp.requires_grad(a)) {
      double* da = tp.grad_buffer(a).data();
      for (long long i = 0; i < n; ++i) da[i] += g[i];
    }
    if (tp.requires_grad(b)) {
      double* db = tp.grad_buffer(b).data();
      for (long long i = 0; i < n; ++i) db[i] += g[i];
    }
  });
}

Var add(Var a, Var b) { return add_elementwise(a, b); }

Var mul(Var a, Var b) {
  Tape& t = *a.tape;
  t.check_same_tape(b);
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  if (!A.same_shape(B))
    throw DimensionError("elementwise mul of mismatched shapes " +
                         shape_str(A.shape()) + " vs " + shape_str(B.shape()));
  Tensor out(A.shape());
  const long long n = A.numel();
  for (long long i = 0; i < n; ++i) out[i] = A[i] * B[i];
  return t.emit("mul", std::move(out), {a, b}, [a, b, n](Tape& tp, Var o) {
    const double* g = tp.grad_buffer(o).data();
    if (tp.requires_grad(a)) {
      double* da = tp.grad_buffer(a).data();
      const double* pb = tp.value(b).data();
      for (long long i = 0; i < n; ++i) da[i] += g[i] * pb[i];
    }
    if (tp.requires_grad(b)) {
      double* db = tp.grad_buffer(b).data();
      const double* pa = tp.value(a).data();
      for (long long i = 0; i < n; ++i) db[i] += g[i] * pa[i];
    }
  });
}

Var scale(Var a, double c) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  Tensor out(A.shape());
  const long long n = A.numel();
  for (long long i = 0; i < n; ++i) out[i] = c * A[i];
  return t.emit("scale", std::move(out), {a}, [a, c, n](Tape& tp, Var o) {
    const double* g = tp.grad_buffer(o).data();
    if (tp.requires_grad(a)) {
      double* da = tp.grad_buffer(a).data();
      for (long long i = 0; i < n; ++i) da[i] += c * g[i];
    }
  });
}

Var sum(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  double s = 0.0;
  for (long long i = 0; i < A.numel(); ++i) s += A[i];
  const long long n = A.numel();
  return t.emit("sum", Tensor::scalar(s), {a}, [a, n](Tape& tp, Var o) {
    const double g = tp.grad_buffer(o)[0];
    if (tp.requires_grad(a)) {
      double* da = tp.grad_buffer(a).data();
      for (long long i = 0; i < n; ++i) da[i] += g;
    }
  });
}

Var relu(Var a) {
  Tape& t = *a.tape;
  const Tensor& A = t.value(a);
  Tensor out(A.shape());
  const long long n = A.numel();
  for (long long i = 0; i < n; ++i) out[i] = A[i] > 0.0 ? A[i] : 0.0;
  return t.emit("relu", std::move(out), {a}, [a, n](Tape& tp, Var o) {
    if (!tp.requires_grad(a)) return;
    const double* g = tp.grad_buffer(o).data();
    const double* x = tp.value(a).data();
    double* da = tp.grad_buffer(a).data();
    for (long long i = 0; i < n; ++i)
      if (x[i] > 0.0) da[i] += g[i];
  });
}

// --- spatial layers ----------------------------------------------------------

Var conv2d(Var x, Var kernel, Var bias, int stride, int padding) {
  Tape& t = *x.tape;
  t.check_same_tape(kernel);
  t.check_same_tape(bias);
  const Tensor& X = t.value(x);
  const Tensor& K = t.value(kernel);
  const Tensor& B = t.value(bias);
  check_rank(X, 4, "conv2d input");
  check_rank(K, 4, "conv2d kernel");
  if (stride < 1) throw ConfigError("conv2d stride must be positive");
  if (padding < 0) throw ConfigError("conv2d padding must be non-negative");
  const int N = X.dim(0), C = X.dim(1), H = X.dim(2), W = X.dim(3);
  const int O = K.dim(0), kh = K.dim(2), kw = K.dim(3);
  if (K.dim(1) != C)
    throw DimensionError("conv2d channel mismatch: input " + shape_str(X.shape()) +
                         " vs kernel " + shape_str(K.shape()));
  if (B.numel() != O)
    throw DimensionError("conv2d bias extent " + shape_str(B.shape()) +
                         " does not match " + std::to_string(O) + " output channels");
  const int hnum = H + 2 * padding - kh;
  const int wnum = W + 2 * padding - kw;
  if (hnum < 0 || wnum < 0 || hnum % stride != 0 || wnum % stride != 0)
    throw ConfigError("conv2d output extent not integral for input " +
                      shape_str(X.shape()) + ", kernel " + shape_str(K.shape()) +
                      ", stride " + std::to_string(stride) + ", pad " +
                      std::to_string(padding));
  const int oh = hnum / stride + 1, ow = wnum / stride + 1;

  Tensor out({N, O, oh, ow});
  const long long ckk = static_cast<long long>(C) * kh * kw;
  const long long plane = static_cast<long long>(oh) * ow;
  Mat cols;
  CMapRM kmap(K.data(), O, ckk);
  for (int n = 0; n < N; ++n) {
    im2col(X.data() + static_cast<std::size_t>(n) * C * H * W, C, H, W, kh, kw,
           stride, padding, oh, ow, cols);
    MapRM ymap(out.data() + static_cast<std::size_t>(n) * O * plane, O, plane);
    ymap.noalias() = kmap * cols;
    for (int o = 0; o < O; ++o) ymap.row(o).array() += B[o];
  }

  auto bw = [x, kernel, bias, stride, padding, N, C, H, W, O, kh, kw, oh,
             ow](Tape& tp, Var out_var) {
    const Tensor& G = tp.grad_buffer(out_var);
    const Tensor& Xv = tp.value(x);
    const Tensor& Kv = tp.value(kernel);
    const long long ckk = static_cast<long long>(C) * kh * kw;
    const long long plane = static_cast<long long>(oh) * ow;
    const bool need_x = tp.requires_grad(x);
    const bool need_k = tp.requires_grad(kernel);
    const bool need_b = tp.requires_grad(bias);
    Mat cols, dcols;
    CMapRM kmap(Kv.data(), O, ckk);
    for (int n = 0; n < N; ++n) {
      CMapRM gmap(G.data() + static_cast<std::size_t>(n) * O * plane, O, plane);
      if (need_k) {
        im2col(Xv.data() + static_cast<std::size_t>(n) * C * H * W, C, H, W, kh,
               kw, stride, padding, oh, ow, cols);
        MapRM dk(tp.grad_buffer(kernel).data(), O, ckk);
        dk.noalias() += gmap * cols.transpose();
      }
      if (need_b) {
        double* db = tp.grad_buffer(bias).data();
        for (int o = 0; o < O; ++o) db[o] += gmap.row(o).sum();
      }
      if (need_x) {
        dcols.resize(ckk, plane);
        dcols.noalias() = kmap.transpose() * gmap;
        col2im(dcols, C, H, W, kh, kw, stride, padding, oh, ow,
               tp.grad_buffer(x).data() + static_cast<std::size_t>(n) * C * H * W);
      }
    }
  };
  return t.emit("conv2d", std::move(out), {x, kernel, bias}, std::move(bw));
}

Var tconv2d(Var x, Var kernel, int stride) {
  Tape& t = *x.tape;
  t.check_same_tape(kernel);
  const Tensor& X = t.value(x);
  const Tensor& K = t.value(kernel);
  check_rank(X, 4, "tconv2d input");
  check_rank(K, 4, "tconv2d kernel");
  if (stride < 1) throw ConfigError("tconv2d stride must be positive");
  const int N = X.dim(0), C = X.dim(1), H = X.dim(2), W = X.dim(3);
  const int O = K.dim(1), kh = K.dim(2), kw = K.dim(3);
  if (K.dim(0) != C)
    throw DimensionError("tconv2d channel mismatch: input " + shape_str(X.shape()) +
                         " vs kernel " + shape_str(K.shape()));
  const int oh = (H - 1) * stride + kh, ow = (W - 1) * stride + kw;

  // Forward is the adjoint of conv2d with the same kernel values: scatter
  // K^T * x back through col2im onto the upsampled grid.
  Tensor out({N, O, oh, ow});
  const long long okk = static_cast<long long>(O) * kh * kw;
  CMapRM kmap(K.data(), C, okk);
  Mat dcols;
  for (int n = 0; n < N; ++n) {
    CMapRM xmap(X.data() + static_cast<std::size_t>(n) * C * H * W, C,
                static_cast<long long>(H) * W);
    dcols.resize(okk, static_cast<long long>(H) * W);
    dcols.noalias() = kmap.transpose() * xmap;
    col2im(dcols, O, oh, ow, kh, kw, stride, 0, H, W,
           out.data() + static_cast<std::size_t>(n) * O * oh * ow);
  }

  auto bw = [x, kernel, stride, N, C, H, W, O, kh, kw, oh, ow](Tape& tp, Var out_var) {
    const Tensor& G = tp.grad_buffer(out_var);
    const Tensor& Xv = tp.value(x);
    const Tensor& Kv = tp.value(kernel);
    const long long okk = static_cast<long long>(O) * kh * kw;
    const long long hw = static_cast<long long>(H) * W;
    const bool need_x = tp.requires_grad(x);
    const bool need_k = tp.requires_grad(kernel);
    Mat cols;
    CMapRM kmap(Kv.data(), C, okk);
    for (int n = 0; n < N; ++n) {
      im2col(G.data() + static_cast<std::size_t>(n) * O * oh * ow, O, oh, ow, kh,
             kw, stride, 0, H, W, cols);
      if (need_x) {
        MapRM dx(tp.grad_buffer(x).data() + static_cast<std::size_t>(n) * C * hw,
                 C, hw);
        dx.noalias() += kmap * cols;
      }
      if (need_k) {
        CMapRM xmap(Xv.data() + static_cast<std::size_t>(n) * C * hw, C, hw);
        MapRM dk(tp.grad_buffer(kernel).data(), C, okk);
        dk.noalias() += xmap * cols.transpose();
      }
    }
  };
  return t.emit("tconv2d", std::move(out), {x, kernel}, std::move(bw));
}

Var maxpool2(Var x) {
  Tape& t = *x.tape;
  const Tensor& X = t.value(x);
  check_rank(X, 4, "maxpool2 input");
  const int N = X.dim(0), C = X.dim(1), H = X.dim(2), W = X.dim(3);
  if (H % 2 != 0 || W % 2 != 0)
    throw ConfigError("maxpool2 requires even spatial extents, got " +
                      shape_str(X.shape()));
  const int oh = H / 2, ow = W / 2;
  Tensor out({N, C, oh, ow});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          double m = X(n, c, 2 * i, 2 * j);
          m = std::max(m, X(n, c, 2 * i, 2 * j + 1));
          m = std::max(m, X(n, c, 2 * i + 1, 2 * j));
          m = std::max(m, X(n, c, 2 * i + 1, 2 * j + 1));
          out(n, c, i, j) = m;
        }
  auto bw = [x, N, C, H, W, oh, ow](Tape& tp, Var out_var) {
    if (!tp.requires_grad(x)) return;
    const Tensor& G = tp.grad_buffer(out_var);
    const Tensor& Xv = tp.value(x);
    Tensor& DX = tp.grad_buffer(x);
    // First maximum in row-major window order takes the whole gradient.
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < oh; ++i)
          for (int j = 0; j < ow; ++j) {
            int bi = 2 * i, bj = 2 * j;
            double best = Xv(n, c, bi, bj);
            const int ris[4] = {2 * i, 2 * i, 2 * i + 1, 2 * i + 1};
            const int cjs[4] = {2 * j, 2 * j + 1, 2 * j, 2 * j + 1};
            for (int q = 1; q < 4; ++q)
              if (Xv(n, c, ris[q], cjs[q]) > best) {
                best = Xv(n, c, ris[q], cjs[q]);
                bi = ris[q];
                bj = cjs[q];
              }
            DX(n, c, bi, bj) += G(n, c, i, j);
          }
  };
  return t.emit("maxpool2", std::move(out), {x}, std::move(bw));
}

Var crop(Var x, Var ref, std::pair<int, int> offset) {
  Tape& t = *x.tape;
  t.check_same_tape(ref);
  const Tensor& X = t.value(x);
  const Tensor& R = t.value(ref);
  check_rank(X, 4, "crop input");
  check_rank(R, 4, "crop reference");
  const int N = X.dim(0), C = X.dim(1), H = X.dim(2), W = X.dim(3);
  const int h = R.dim(2), w = R.dim(3);
  const int r0 = offset.first, c0 = offset.second;
  if (r0 < 0 || c0 < 0 || r0 + h > H || c0 + w > W)
    throw DimensionError("crop window " + std::to_string(h) + "x" + std::to_string(w) +
                         " at offset (" + std::to_string(r0) + "," + std::to_string(c0) +
                         ") does not fit in " + shape_str(X.shape()));
  Tensor out({N, C, h, w});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < h; ++i) {
        const double* src = &X(n, c, r0 + i, c0);
        double* dst = &out(n, c, i, 0);
        std::copy(src, src + w, dst);
      }
  // Gradient only reaches x; ref just fixes the window extent.
  auto bw = [x, N, C, h, w, r0, c0](Tape& tp, Var out_var) {
    if (!tp.requires_grad(x)) return;
    const Tensor& G = tp.grad_buffer(out_var);
    Tensor& DX = tp.grad_buffer(x);
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < h; ++i) {
          const double* g = &G(n, c, i, 0);
          double* dx = &DX(n, c, r0 + i, c0);
          for (int j = 0; j < w; ++j) dx[j] += g[j];
        }
  };
  return t.emit("crop", std::move(out), {x}, std::move(bw));
}

Var center_crop(Var x, Var ref) {
  Tape& t = *x.tape;
  const Tensor& X = t.value(x);
  const Tensor& R = t.value(ref);
  check_rank(X, 4, "crop input");
  check_rank(R, 4, "crop reference");
  const int dr = X.dim(2) - R.dim(2), dc = X.dim(3) - R.dim(3);
  if (dr < 0 || dc < 0)
    throw DimensionError("crop reference " + shape_str(R.shape()) +
                         " larger than input " + shape_str(X.shape()));
  return crop(x, ref, {dr / 2, dc / 2});
}

Var concat_channels(Var a, Var b) {
  Tape& t = *a.tape;
  t.check_same_tape(b);
  const Tensor& A = t.value(a);
  const Tensor& B = t.value(b);
  check_rank(A, 4, "concat lhs");
  check_rank(B, 4, "concat rhs");
  if (A.dim(0) != B.dim(0) || A.dim(2) != B.dim(2) || A.dim(3) != B.dim(3))
    throw DimensionError("concat batch/spatial mismatch: " + shape_str(A.shape()) +
                         " vs " + shape_str(B.shape()));
  const int N = A.dim(0), Ca = A.dim(1), Cb = B.dim(1), H = A.dim(2), W = A.dim(3);
  Tensor out({N, Ca + Cb, H, W});
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int n = 0; n < N; ++n) {
    double* dst = out.data() + static_cast<std::size_t>(n) * (Ca + Cb) * plane;
    const double* pa = A.data() + static_cast<std::size_t>(n) * Ca * plane;
    const double* pb = B.data() + static_cast<std::size_t>(n) * Cb * plane;
    std::copy(pa, pa + Ca * plane, dst);
    std::copy(pb, pb + Cb * plane, dst + Ca * plane);
  }
  auto bw = [a, b, N, Ca, Cb, plane](Tape& tp, Var out_var) {
    const Tensor& G = tp.grad_buffer(out_var);
    for (int n = 0; n < N; ++n) {
      const double* g = G.data() + static_cast<std::size_t>(n) * (Ca + Cb) * plane;
      if (tp.requires_grad(a)) {
        double* da = tp.grad_buffer(a).data() + static_cast<std::size_t>(n) * Ca * plane;
        for (std::size_t i = 0; i < Ca * plane; ++i) da[i] += g[i];
      }
      if (tp.requires_grad(b)) {
        double* db = tp.grad_buffer(b).data() + static_cast<std::size_t>(n) * Cb * plane;
        for (std::size_t i = 0; i < Cb * plane; ++i) db[i] += g[Ca * plane + i];
      }
    }
  };
  return t.emit("concat", std::move(out), {a, b}, std::move(bw));
}

// --- dense head ----------------------------------------------------------------

Var flatten(Var x) {
  Tape& t = *x.tape;
  const Tensor& X = t.value(x);
  if (X.rank() < 2) throw DimensionError("flatten needs rank >= 2, got " + shape_str(X.shape()));
  const int N = X.dim(0);
  const long long rest = X.numel() / N;
  Tensor out = X.reshaped({N, static_cast<int>(rest)});
  out.set_requires_grad(false);
  const long long n = X.numel();
  return t.emit("flatten", std::move(out), {x}, [x, n](Tape& tp, Var o) {
    if (!tp.requires_grad(x)) return;
    const double* g = tp.grad_buffer(o).data();
    double* dx = tp.grad_buffer(x).data();
    for (long long i = 0; i < n; ++i) dx[i] += g[i];
  });
}

Var fully_connected(Var x, Var weight, Var bias) {
  Tape& t = *x.tape;
  t.check_same_tape(weight);
  t.check_same_tape(bias);
  const Tensor& X = t.value(x);
  const Tensor& Wt = t.value(weight);
  const Tensor& B = t.value(bias);
  check_rank(X, 2, "fully_connected input");
  check_rank(Wt, 2, "fully_connected weight");
  if (X.dim(1) != Wt.dim(1))
    throw DimensionError("fully_connected input " + shape_str(X.shape()) +
                         " vs weight " + shape_str(Wt.shape()));
  const int N = X.dim(0), D = X.dim(1), M = Wt.dim(0);
  if (B.numel() != M)
    throw DimensionError("fully_connected bias extent mismatch");
  Tensor out({N, M});
  MapRM ymap(out.data(), N, M);
  ymap.noalias() = CMapRM(X.data(), N, D) * CMapRM(Wt.data(), M, D).transpose();
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < M; ++j) out(i, j) += B[j];
  auto bw = [x, weight, bias, N, D, M](Tape& tp, Var o) {
    CMapRM g(tp.grad_buffer(o).data(), N, M);
    if (tp.requires_grad(x)) {
      MapRM dx(tp.grad_buffer(x).data(), N, D);
      dx.noalias() += g * CMapRM(tp.value(weight).data(), M, D);
    }
    if (tp.requires_grad(weight)) {
      MapRM dw(tp.grad_buffer(weight).data(), M, D);
      dw.noalias() += g.transpose() * CMapRM(tp.value(x).data(), N, D);
    }
    if (tp.requires_grad(bias)) {
      double* db = tp.grad_buffer(bias).data();
      for (int j = 0; j < M; ++j) db[j] += g.col(j).sum();
    }
  };
  return t.emit("fully_connected", std::move(out), {x, weight, bias}, std::move(bw));
}

Var softmax(Var x) {
  Tape& t = *x.tape;
  const Tensor& X = t.value(x);
  if (X.rank() != 2 && X.rank() != 4)
    throw DimensionError("softmax expects [N,K] or [N,K,H,W], got " + shape_str(X.shape()));
  const int N = X.dim(0), K = X.dim(1);
  if (K < 2) throw ContractError("softmax needs at least 2 classes");
  const long long inner = X.numel() / (static_cast<long long>(N) * K);
  Tensor out(X.shape());
  for (int n = 0; n < N; ++n)
    for (long long i = 0; i < inner; ++i) {
      const std::size_t base = static_cast<std::size_t>(n) * K * inner + i;
      softmax_fiber(X.data() + base, inner, out.data() + base, inner, K);
    }
  auto bw = [x, N, K, inner](Tape& tp, Var o) {
    if (!tp.requires_grad(x)) return;
    const Tensor& P = tp.value(o);
    const Tensor& G = tp.grad_buffer(o);
    Tensor& DX = tp.grad_buffer(x);
    for (int n = 0; n < N; ++n)
      for (long long i = 0; i < inner; ++i) {
        const std::size_t base = static_cast<std::size_t>(n) * K * inner + i;
        double dot = 0.0;
        for (int k = 0; k < K; ++k) dot += G[base + k * inner] * P[base + k * inner];
        for (int k = 0; k < K; ++k) {
          const std::size_t a = base + k * inner;
          DX[a] += P[a] * (G[a] - dot);
        }
      }
  };
  return t.emit("softmax", std::move(out), {x}, std::move(bw));
}

// --- losses ---------------------------------------------------------------------

Var cross_entropy(Var probs, const std::vector<int>& labels) {
  Tape& t = *probs.tape;
  const Tensor& P = t.value(probs);
  check_rank(P, 2, "cross_entropy probabilities");
  const int N = P.dim(0), K = P.dim(1);
  if (static_cast<int>(labels.size()) != N)
    throw DimensionError("cross_entropy got " + std::to_string(labels.size()) +
                         " labels for batch of " + std::to_string(N));
  for (int y : labels)
    if (y < 0 || y >= K)
      throw ContractError("cross_entropy label " + std::to_string(y) +
                          " out of range [0, " + std::to_string(K) + ")");
  double loss = 0.0;
  for (int n = 0; n < N; ++n)
    loss -= std::log(std::max(P(n, labels[static_cast<std::size_t>(n)]), kLogClamp));
  loss /= N;
  auto bw = [probs, labels, N](Tape& tp, Var o) {
    if (!tp.requires_grad(probs)) return;
    const double g = tp.grad_buffer(o)[0];
    const Tensor& P = tp.value(probs);
    Tensor& DP = tp.grad_buffer(probs);
    for (int n = 0; n < N; ++n) {
      const int y = labels[static_cast<std::size_t>(n)];
      const double p = P(n, y);
      if (p > kLogClamp) DP(n, y) -= g / (N * p);
    }
  };
  return t.emit("cross_entropy", Tensor::scalar(loss), {probs}, std::move(bw));
}

Var pixel_softmax_loss(Var scores, const std::vector<const LabelMask*>& masks,
                       const std::vector<double>& class_weights) {
  Tape& t = *scores.tape;
  const Tensor& S = t.value(scores);
  check_rank(S, 4, "pixel_softmax_loss scores");
  const int N = S.dim(0), K = S.dim(1), H = S.dim(2), W = S.dim(3);
  if (static_cast<int>(masks.size()) != N)
    throw DimensionError("pixel_softmax_loss got " + std::to_string(masks.size()) +
                         " masks for batch of " + std::to_string(N));
  if (static_cast<int>(class_weights.size()) != K)
    throw DimensionError("pixel_softmax_loss needs one weight per class");
  for (const LabelMask* m : masks) {
    if (m->h != H || m->w != W)
      throw DimensionError("mask extent does not match score map " + shape_str(S.shape()));
    m->check_labels(K);
  }
  const long long inner = static_cast<long long>(H) * W;
  double total = 0.0, denom = 0.0;
  std::vector<double> fiber(static_cast<std::size_t>(K));
  for (int n = 0; n < N; ++n) {
    const LabelMask& m = *masks[static_cast<std::size_t>(n)];
    for (long long i = 0; i < inner; ++i) {
      const std::size_t base = static_cast<std::size_t>(n) * K * inner + i;
      softmax_fiber(S.data() + base, inner, fiber.data(), 1, K);
      const int y = m.v[static_cast<std::size_t>(i)];
      const double wgt = class_weights[static_cast<std::size_t>(y)];
      total -= wgt * std::log(std::max(fiber[static_cast<std::size_t>(y)], kLogClamp));
      denom += wgt;
    }
  }
  if (denom <= 0.0) throw ContractError("pixel_softmax_loss weight total is zero");
  const double loss = total / denom;

  // Copy masks by value: callers may drop theirs before backward runs.
  std::vector<LabelMask> owned;
  owned.reserve(masks.size());
  for (const LabelMask* m : masks) owned.push_back(*m);
  auto bw = [scores, owned = std::move(owned), class_weights, N, K, inner,
             denom](Tape& tp, Var o) {
    if (!tp.requires_grad(scores)) return;
    const double g = tp.grad_buffer(o)[0] / denom;
    const Tensor& S = tp.value(scores);
    Tensor& DS = tp.grad_buffer(scores);
    std::vector<double> fiber(static_cast<std::size_t>(K));
    for (int n = 0; n < N; ++n) {
      const LabelMask& m = owned[static_cast<std::size_t>(n)];
      for (long long i = 0; i < inner; ++i) {
        const std::size_t base = static_cast<std::size_t>(n) * K * inner + i;
        softmax_fiber(S.data() + base, inner, fiber.data(), 1, K);
        const int y = m.v[static_cast<std::size_t>(i)];
        const double wgt = class_weights[static_cast<std::size_t>(y)];
        for (int k = 0; k < K; ++k) {
          const double p = fiber[static_cast<std::size_t>(k)];
          DS[base + k * inner] += g * wgt * (p - (k == y ? 1.0 : 0.0));
        }
      }
    }
  };
  return t.emit("pixel_softmax_loss", Tensor::scalar(loss), {scores}, std::move(bw));
}

// --- initialization ---------------------------------------------------------------

void he_init(Tensor& t, long long fan_in, Rng& rng) {
  const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (long long i = 0; i < t.numel(); ++i) t[i] = std_dev * rng.normal();
}

Tensor bilinear_tconv_kernel(int channels, int k) {
  const int factor = (k + 1) / 2;
  const double center = (k % 2 == 1) ? factor - 1.0 : factor - 0.5;
  std::vector<double> w1(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i)
    w1[static_cast<std::size_t>(i)] = 1.0 - std::abs(i - center) / factor;
  Tensor kernel({channels, channels, k, k});
  for (int c = 0; c < channels; ++c)
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        kernel(c, c, i, j) = w1[static_cast<std::size_t>(i)] * w1[static_cast<std::size_t>(j)];
  return kernel;
}

}  // namespace roinet
