// Copyright 2026 The yolic Authors
// SPDX-License-Identifier: Apache-2.0

// Dense CNN kernels with analytic backward passes. Every kernel is a pure
// function of its arguments; reductions use a fixed order so results are
// bitwise reproducible.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "yolic/common.hpp"
#include "yolic/tensor.hpp"

namespace yolic::nn {

enum class Mode { kTrain, kEval };

namespace detail {

// C[M x N] (+)= A[M x K] * B[K x N], all row-major and contiguous.
template <typename T>
void gemm_nn(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate) {
  if (!accumulate) std::fill(C, C + static_cast<std::size_t>(M) * N, T{0});
  for (int i = 0; i < M; ++i) {
    T* c = C + static_cast<std::size_t>(i) * N;
    const T* a = A + static_cast<std::size_t>(i) * K;
    for (int k = 0; k < K; ++k) {
      const T av = a[k];
      if (av == T{0}) continue;
      const T* b = B + static_cast<std::size_t>(k) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

template <typename T>
void transpose(int rows, int cols, const T* src, T* dst) {
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) dst[static_cast<std::size_t>(c) * rows + r] = src[static_cast<std::size_t>(r) * cols + c];
  }
}

inline int out_size(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

// Rows are (channel, ki, kj) over `channels` input planes; columns are output pixels.
template <typename T>
void im2col(const T* x, int channels, int H, int W, int kh, int kw, int stride, int pad, int OH, int OW, T* col) {
  for (int c = 0; c < channels; ++c) {
    const T* plane = x + static_cast<std::size_t>(c) * H * W;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        T* row = col + (static_cast<std::size_t>(c) * kh * kw + ki * kw + kj) * OH * OW;
        for (int oh = 0; oh < OH; ++oh) {
          const int ih = oh * stride - pad + ki;
          T* dst = row + static_cast<std::size_t>(oh) * OW;
          if (ih < 0 || ih >= H) {
            std::fill(dst, dst + OW, T{0});
            continue;
          }
          for (int ow = 0; ow < OW; ++ow) {
            const int iw = ow * stride - pad + kj;
            dst[ow] = (iw >= 0 && iw < W) ? plane[static_cast<std::size_t>(ih) * W + iw] : T{0};
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int channels, int H, int W, int kh, int kw, int stride, int pad, int OH, int OW, T* x) {
  for (int c = 0; c < channels; ++c) {
    T* plane = x + static_cast<std::size_t>(c) * H * W;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const T* row = col + (static_cast<std::size_t>(c) * kh * kw + ki * kw + kj) * OH * OW;
        for (int oh = 0; oh < OH; ++oh) {
          const int ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= H) continue;
          for (int ow = 0; ow < OW; ++ow) {
            const int iw = ow * stride - pad + kj;
            if (iw >= 0 && iw < W) plane[static_cast<std::size_t>(ih) * W + iw] += row[static_cast<std::size_t>(oh) * OW + ow];
          }
        }
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convolution (cross-correlation, zero padding)

struct Conv2dParams {
  int stride = 1;
  int padding = 0;
  int groups = 1;
};

template <typename T>
struct ConvGrads {
  Tensor<T> grad_input;
  Tensor<T> grad_weight;
  Tensor<T> grad_bias;  // empty when the layer has no bias
};

namespace detail {

struct ConvGeometry {
  int N, Cin, H, W, Cout, kh, kw, OH, OW, cin_g, cout_g;
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& x, const Tensor<T>& weight, const Conv2dParams& p) {
  YOLIC_CHECK(x.rank() == 4 && weight.rank() == 4, ShapeError, "conv2d expects 4-D input and weight, got ",
              shape_str(x.shape()), " and ", shape_str(weight.shape()));
  YOLIC_CHECK(p.stride >= 1 && p.padding >= 0 && p.groups >= 1, ShapeError, "conv2d: invalid stride/padding/groups");
  ConvGeometry g{};
  g.N = x.dim(0), g.Cin = x.dim(1), g.H = x.dim(2), g.W = x.dim(3);
  g.Cout = weight.dim(0), g.kh = weight.dim(2), g.kw = weight.dim(3);
  YOLIC_CHECK(g.Cin % p.groups == 0 && g.Cout % p.groups == 0, ShapeError, "conv2d: channels ", g.Cin, "->", g.Cout,
              " not divisible by groups ", p.groups);
  g.cin_g = g.Cin / p.groups;
  g.cout_g = g.Cout / p.groups;
  YOLIC_CHECK(weight.dim(1) == g.cin_g, ShapeError, "conv2d: weight ", shape_str(weight.shape()), " expects ",
              weight.dim(1) * p.groups, " input channels, input has ", g.Cin);
  g.OH = out_size(g.H, g.kh, p.stride, p.padding);
  g.OW = out_size(g.W, g.kw, p.stride, p.padding);
  YOLIC_CHECK(g.OH >= 1 && g.OW >= 1, ShapeError, "conv2d: kernel larger than padded input");
  return g;
}

inline bool is_depthwise(const ConvGeometry& g, const Conv2dParams& p) {
  return p.groups == g.Cin && g.Cout == g.Cin && g.cin_g == 1;
}

template <typename T>
void depthwise_forward(const Tensor<T>& x, const Tensor<T>& w, const ConvGeometry& g, const Conv2dParams& p,
                       Tensor<T>& y) {
  for (int n = 0; n < g.N; ++n) {
    for (int c = 0; c < g.Cin; ++c) {
      const T* plane = x.data() + (static_cast<std::size_t>(n) * g.Cin + c) * g.H * g.W;
      const T* k = w.data() + static_cast<std::size_t>(c) * g.kh * g.kw;
      T* out = y.data() + (static_cast<std::size_t>(n) * g.Cout + c) * g.OH * g.OW;
      for (int oh = 0; oh < g.OH; ++oh) {
        for (int ow = 0; ow < g.OW; ++ow) {
          T acc{0};
          for (int ki = 0; ki < g.kh; ++ki) {
            const int ih = oh * p.stride - p.padding + ki;
            if (ih < 0 || ih >= g.H) continue;
            for (int kj = 0; kj < g.kw; ++kj) {
              const int iw = ow * p.stride - p.padding + kj;
              if (iw < 0 || iw >= g.W) continue;
              acc += plane[static_cast<std::size_t>(ih) * g.W + iw] * k[ki * g.kw + kj];
            }
          }
          out[static_cast<std::size_t>(oh) * g.OW + ow] += acc;
        }
      }
    }
  }
}

template <typename T>
void depthwise_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy, const ConvGeometry& g,
                        const Conv2dParams& p, Tensor<T>& gx, Tensor<T>& gw) {
  for (int n = 0; n < g.N; ++n) {
    for (int c = 0; c < g.Cin; ++c) {
      const std::size_t in_off = (static_cast<std::size_t>(n) * g.Cin + c) * g.H * g.W;
      const T* plane = x.data() + in_off;
      T* gplane = gx.data() + in_off;
      const T* k = w.data() + static_cast<std::size_t>(c) * g.kh * g.kw;
      T* gk = gw.data() + static_cast<std::size_t>(c) * g.kh * g.kw;
      const T* go = gy.data() + (static_cast<std::size_t>(n) * g.Cout + c) * g.OH * g.OW;
      for (int oh = 0; oh < g.OH; ++oh) {
        for (int ow = 0; ow < g.OW; ++ow) {
          const T d = go[static_cast<std::size_t>(oh) * g.OW + ow];
          for (int ki = 0; ki < g.kh; ++ki) {
            const int ih = oh * p.stride - p.padding + ki;
            if (ih < 0 || ih >= g.H) continue;
            for (int kj = 0; kj < g.kw; ++kj) {
              const int iw = ow * p.stride - p.padding + kj;
              if (iw < 0 || iw >= g.W) continue;
              const std::size_t idx = static_cast<std::size_t>(ih) * g.W + iw;
              gk[ki * g.kw + kj] += d * plane[idx];
              gplane[idx] += d * k[ki * g.kw + kj];
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias, const Conv2dParams& p) {
  const auto g = detail::conv_geometry(x, weight, p);
  if (bias) {
    YOLIC_CHECK(bias->numel() == static_cast<std::size_t>(g.Cout), ShapeError, "conv2d: bias length ", bias->numel(),
                " != output channels ", g.Cout);
  }
  Tensor<T> y({g.N, g.Cout, g.OH, g.OW});
  const std::size_t ohw = static_cast<std::size_t>(g.OH) * g.OW;
  if (bias) {
    for (int n = 0; n < g.N; ++n) {
      for (int c = 0; c < g.Cout; ++c) {
        std::fill_n(y.data() + (static_cast<std::size_t>(n) * g.Cout + c) * ohw, ohw, (*bias)[static_cast<std::size_t>(c)]);
      }
    }
  }
  if (detail::is_depthwise(g, p)) {
    detail::depthwise_forward(x, weight, g, p, y);
    return y;
  }
  const int K = g.cin_g * g.kh * g.kw;
  const bool direct = g.kh == 1 && g.kw == 1 && p.stride == 1 && p.padding == 0;
  std::vector<T> col(direct ? 0 : static_cast<std::size_t>(K) * ohw);
  for (int n = 0; n < g.N; ++n) {
    for (int grp = 0; grp < p.groups; ++grp) {
      const T* xin = x.data() + (static_cast<std::size_t>(n) * g.Cin + static_cast<std::size_t>(grp) * g.cin_g) * g.H * g.W;
      const T* cols = xin;
      if (!direct) {
        detail::im2col(xin, g.cin_g, g.H, g.W, g.kh, g.kw, p.stride, p.padding, g.OH, g.OW, col.data());
        cols = col.data();
      }
      const T* wg = weight.data() + static_cast<std::size_t>(grp) * g.cout_g * K;
      T* out = y.data() + (static_cast<std::size_t>(n) * g.Cout + static_cast<std::size_t>(grp) * g.cout_g) * ohw;
      detail::gemm_nn(g.cout_g, static_cast<int>(ohw), K, wg, cols, out, /*accumulate=*/true);
    }
  }
  YOLIC_ASSERT_FINITE(y, "conv2d");
  return y;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, bool has_bias, const Tensor<T>& grad_out,
                             const Conv2dParams& p) {
  const auto g = detail::conv_geometry(x, weight, p);
  YOLIC_CHECK((grad_out.shape() == Shape{g.N, g.Cout, g.OH, g.OW}), ShapeError, "conv2d_backward: grad shape ",
              shape_str(grad_out.shape()));
  ConvGrads<T> out{Tensor<T>(x.shape()), Tensor<T>(weight.shape()), Tensor<T>()};
  const std::size_t ohw = static_cast<std::size_t>(g.OH) * g.OW;
  if (has_bias) {
    out.grad_bias = Tensor<T>({g.Cout});
    for (int c = 0; c < g.Cout; ++c) {
      double s = 0.0;
      for (int n = 0; n < g.N; ++n) {
        const T* go = grad_out.data() + (static_cast<std::size_t>(n) * g.Cout + c) * ohw;
        for (std::size_t i = 0; i < ohw; ++i) s += go[i];
      }
      out.grad_bias[static_cast<std::size_t>(c)] = static_cast<T>(s);
    }
  }
  if (detail::is_depthwise(g, p)) {
    detail::depthwise_backward(x, weight, grad_out, g, p, out.grad_input, out.grad_weight);
    return out;
  }
  const int K = g.cin_g * g.kh * g.kw;
  const bool direct = g.kh == 1 && g.kw == 1 && p.stride == 1 && p.padding == 0;
  std::vector<T> col(static_cast<std::size_t>(K) * ohw);
  std::vector<T> col_t(static_cast<std::size_t>(K) * ohw);
  std::vector<T> w_t(static_cast<std::size_t>(K) * g.cout_g);
  for (int grp = 0; grp < p.groups; ++grp) {
    const T* wg = weight.data() + static_cast<std::size_t>(grp) * g.cout_g * K;
    detail::transpose(g.cout_g, K, wg, w_t.data());
    T* gw = out.grad_weight.data() + static_cast<std::size_t>(grp) * g.cout_g * K;
    for (int n = 0; n < g.N; ++n) {
      const std::size_t in_off = (static_cast<std::size_t>(n) * g.Cin + static_cast<std::size_t>(grp) * g.cin_g) * g.H * g.W;
      const T* xin = x.data() + in_off;
      const T* go = grad_out.data() + (static_cast<std::size_t>(n) * g.Cout + static_cast<std::size_t>(grp) * g.cout_g) * ohw;
      const T* cols = xin;
      if (!direct) {
        detail::im2col(xin, g.cin_g, g.H, g.W, g.kh, g.kw, p.stride, p.padding, g.OH, g.OW, col.data());
        cols = col.data();
      }
      // dW += dY * col^T
      detail::transpose(K, static_cast<int>(ohw), cols, col_t.data());
      detail::gemm_nn(g.cout_g, K, static_cast<int>(ohw), go, col_t.data(), gw, /*accumulate=*/true);
      // dcol = W^T * dY
      if (direct) {
        detail::gemm_nn(K, static_cast<int>(ohw), g.cout_g, w_t.data(), go, out.grad_input.data() + in_off, true);
      } else {
        detail::gemm_nn(K, static_cast<int>(ohw), g.cout_g, w_t.data(), go, col.data(), false);
        detail::col2im(col.data(), g.cin_g, g.H, g.W, g.kh, g.kw, p.stride, p.padding, g.OH, g.OW,
                       out.grad_input.data() + in_off);
      }
    }
  }
  return out;
}

// Depthwise convolution: weight is (C, 1, k, k).
template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& x, const Tensor<T>& weight, int stride, int padding) {
  YOLIC_CHECK(x.rank() == 4 && weight.rank() == 4 && weight.dim(0) == x.dim(1) && weight.dim(1) == 1, ShapeError,
              "depthwise_conv2d: weight ", shape_str(weight.shape()), " does not match input ", shape_str(x.shape()));
  return conv2d<T>(x, weight, nullptr, {stride, padding, x.dim(1)});
}

template <typename T>
ConvGrads<T> depthwise_conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& grad_out,
                                       int stride, int padding) {
  return conv2d_backward<T>(x, weight, false, grad_out, {stride, padding, x.dim(1)});
}

// ---------------------------------------------------------------------------
// Channel shuffle: channel at (g, j) of a groups x (C/groups) grid moves to (j, g).

template <typename T>
Tensor<T> channel_shuffle(const Tensor<T>& x, int groups) {
  YOLIC_CHECK(x.rank() == 4, ShapeError, "channel_shuffle expects NCHW");
  const int N = x.dim(0), C = x.dim(1);
  YOLIC_CHECK(groups >= 1 && C % groups == 0, ShapeError, "channel_shuffle: ", C, " channels not divisible by ",
              groups, " groups");
  const int per = C / groups;
  const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> y(x.shape());
  for (int n = 0; n < N; ++n) {
    for (int g = 0; g < groups; ++g) {
      for (int j = 0; j < per; ++j) {
        const int src = g * per + j;
        const int dst = j * groups + g;
        std::copy_n(x.data() + (static_cast<std::size_t>(n) * C + src) * hw, hw,
                    y.data() + (static_cast<std::size_t>(n) * C + dst) * hw);
      }
    }
  }
  return y;
}

// Inverse permutation: a shuffle with C/groups groups.
template <typename T>
Tensor<T> channel_shuffle_backward(const Tensor<T>& grad_out, int groups) {
  YOLIC_CHECK(grad_out.rank() == 4 && groups >= 1 && grad_out.dim(1) % groups == 0, ShapeError,
              "channel_shuffle_backward: bad shape");
  return channel_shuffle(grad_out, grad_out.dim(1) / groups);
}

// ---------------------------------------------------------------------------
// Channel split / concat (NCHW)

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, int begin, int end) {
  const int N = x.dim(0), C = x.dim(1);
  const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> y({N, end - begin, x.dim(2), x.dim(3)});
  for (int n = 0; n < N; ++n) {
    std::copy_n(x.data() + (static_cast<std::size_t>(n) * C + begin) * hw, (end - begin) * hw,
                y.data() + static_cast<std::size_t>(n) * (end - begin) * hw);
  }
  return y;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  YOLIC_CHECK(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3), ShapeError,
              "concat_channels: ", shape_str(a.shape()), " vs ", shape_str(b.shape()));
  const int N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1);
  const std::size_t hw = static_cast<std::size_t>(a.dim(2)) * a.dim(3);
  Tensor<T> y({N, Ca + Cb, a.dim(2), a.dim(3)});
  for (int n = 0; n < N; ++n) {
    T* dst = y.data() + static_cast<std::size_t>(n) * (Ca + Cb) * hw;
    std::copy_n(a.data() + static_cast<std::size_t>(n) * Ca * hw, Ca * hw, dst);
    std::copy_n(b.data() + static_cast<std::size_t>(n) * Cb * hw, Cb * hw, dst + Ca * hw);
  }
  return y;
}

// ---------------------------------------------------------------------------
// Batch normalization

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

template <typename T>
struct BatchNormCache {
  Tensor<T> xhat;
  std::vector<double> inv_std;
  Mode mode = Mode::kEval;
};

template <typename T>
struct BatchNormGrads {
  Tensor<T> grad_input;
  Tensor<T> grad_gamma;
  Tensor<T> grad_beta;
};

// Train mode normalizes with batch statistics and updates the running
// estimates (unbiased variance); eval mode uses the running estimates.
template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, Tensor<T>& running_mean,
                      Tensor<T>& running_var, Mode mode, BatchNormCache<T>* cache = nullptr,
                      double momentum = kBatchNormMomentum, double eps = kBatchNormEps) {
  YOLIC_CHECK(x.rank() == 4, ShapeError, "batchnorm2d expects NCHW");
  const int N = x.dim(0), C = x.dim(1);
  const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  YOLIC_CHECK(gamma.numel() == static_cast<std::size_t>(C) && beta.numel() == gamma.numel() &&
                  running_mean.numel() == gamma.numel() && running_var.numel() == gamma.numel(),
              ShapeError, "batchnorm2d: parameter length does not match ", C, " channels");
  const std::size_t m = static_cast<std::size_t>(N) * hw;
  if (mode == Mode::kTrain) YOLIC_CHECK(m > 0, ShapeError, "batchnorm2d: empty batch in train mode");

  Tensor<T> y(x.shape());
  Tensor<T> xhat(cache ? x.shape() : Shape{});
  std::vector<double> inv_std(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c) {
    double mean = 0.0, var = 0.0;
    if (mode == Mode::kTrain) {
      for (int n = 0; n < N; ++n) {
        const T* p = x.data() + (static_cast<std::size_t>(n) * C + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) mean += p[i];
      }
      mean /= static_cast<double>(m);
      for (int n = 0; n < N; ++n) {
        const T* p = x.data() + (static_cast<std::size_t>(n) * C + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) var += (p[i] - mean) * (p[i] - mean);
      }
      const double unbiased = m > 1 ? var / static_cast<double>(m - 1) : var;
      var /= static_cast<double>(m);
      const auto uc = static_cast<std::size_t>(c);
      running_mean[uc] = static_cast<T>((1.0 - momentum) * running_mean[uc] + momentum * mean);
      running_var[uc] = static_cast<T>((1.0 - momentum) * running_var[uc] + momentum * unbiased);
    } else {
      mean = running_mean[static_cast<std::size_t>(c)];
      var = running_var[static_cast<std::size_t>(c)];
    }
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(c)] = is;
    const double gm = gamma[static_cast<std::size_t>(c)], bt = beta[static_cast<std::size_t>(c)];
    for (int n = 0; n < N; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * C + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        const double xh = (x[off + i] - mean) * is;
        if (cache) xhat[off + i] = static_cast<T>(xh);
        y[off + i] = static_cast<T>(gm * xh + bt);
      }
    }
  }
  if (cache) *cache = BatchNormCache<T>{std::move(xhat), std::move(inv_std), mode};
  YOLIC_ASSERT_FINITE(y, "batchnorm2d");
  return y;
}

template <typename T>
BatchNormGrads<T> batchnorm2d_backward(const Tensor<T>& grad_out, const Tensor<T>& gamma, const BatchNormCache<T>& cache) {
  const int N = grad_out.dim(0), C = grad_out.dim(1);
  const std::size_t hw = static_cast<std::size_t>(grad_out.dim(2)) * grad_out.dim(3);
  const double m = static_cast<double>(N) * static_cast<double>(hw);
  BatchNormGrads<T> out{Tensor<T>(grad_out.shape()), Tensor<T>({C}), Tensor<T>({C})};
  for (int c = 0; c < C; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int n = 0; n < N; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * C + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        sum_dy += grad_out[off + i];
        sum_dy_xhat += static_cast<double>(grad_out[off + i]) * cache.xhat[off + i];
      }
    }
    const auto uc = static_cast<std::size_t>(c);
    out.grad_beta[uc] = static_cast<T>(sum_dy);
    out.grad_gamma[uc] = static_cast<T>(sum_dy_xhat);
    const double scale = gamma[uc] * cache.inv_std[uc];
    for (int n = 0; n < N; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * C + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        if (cache.mode == Mode::kTrain) {
          out.grad_input[off + i] =
              static_cast<T>(scale / m * (m * grad_out[off + i] - sum_dy - cache.xhat[off + i] * sum_dy_xhat));
        } else {
          out.grad_input[off + i] = static_cast<T>(scale * grad_out[off + i]);
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pooling

// Padded positions never win. argmax receives the flat input index per output.
template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& x, int kernel, int stride, int padding, std::vector<std::size_t>* argmax = nullptr) {
  YOLIC_CHECK(x.rank() == 4, ShapeError, "maxpool2d expects NCHW");
  YOLIC_CHECK(kernel >= 1 && stride >= 1 && padding >= 0 && 2 * padding <= kernel, ShapeError,
              "maxpool2d: invalid kernel/stride/padding");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int OH = detail::out_size(H, kernel, stride, padding), OW = detail::out_size(W, kernel, stride, padding);
  YOLIC_CHECK(OH >= 1 && OW >= 1, ShapeError, "maxpool2d: kernel larger than padded input");
  Tensor<T> y({N, C, OH, OW});
  if (argmax) argmax->assign(y.numel(), 0);
  std::size_t o = 0;
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * C + c) * H * W;
      for (int oh = 0; oh < OH; ++oh) {
        for (int ow = 0; ow < OW; ++ow, ++o) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_idx = base;
          for (int ki = 0; ki < kernel; ++ki) {
            const int ih = oh * stride - padding + ki;
            if (ih < 0 || ih >= H) continue;
            for (int kj = 0; kj < kernel; ++kj) {
              const int iw = ow * stride - padding + kj;
              if (iw < 0 || iw >= W) continue;
              const std::size_t idx = base + static_cast<std::size_t>(ih) * W + iw;
              if (x[idx] > best) {
                best = x[idx];
                best_idx = idx;
              }
            }
          }
          y[o] = best;
          if (argmax) (*argmax)[o] = best_idx;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_out, const Shape& input_shape, const std::vector<std::size_t>& argmax) {
  YOLIC_CHECK(argmax.size() == grad_out.numel(), ShapeError, "maxpool2d_backward: argmax size mismatch");
  Tensor<T> gx(input_shape);
  for (std::size_t o = 0; o < argmax.size(); ++o) gx[argmax[o]] += grad_out[o];
  return gx;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  YOLIC_CHECK(x.rank() == 4, ShapeError, "global_avg_pool expects NCHW");
  const int N = x.dim(0), C = x.dim(1);
  const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> y({N, C});
  for (std::size_t nc = 0; nc < static_cast<std::size_t>(N) * C; ++nc) {
    double s = 0.0;
    for (std::size_t i = 0; i < hw; ++i) s += x[nc * hw + i];
    y[nc] = static_cast<T>(s / static_cast<double>(hw));
  }
  return y;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& grad_out, const Shape& input_shape) {
  Tensor<T> gx(input_shape);
  const std::size_t hw = static_cast<std::size_t>(input_shape[2]) * input_shape[3];
  const T inv = static_cast<T>(1.0 / static_cast<double>(hw));
  for (std::size_t nc = 0; nc < grad_out.numel(); ++nc) {
    std::fill_n(gx.data() + nc * hw, hw, grad_out[nc] * inv);
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Activations

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (auto& v : y.vec()) v = v > T{0} ? v : T{0};
  return y;
}

// Uses the forward output as the mask.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& output) {
  Tensor<T> gx = grad_out;
  for (std::size_t i = 0; i < gx.numel(); ++i) {
    if (!(output[i] > T{0})) gx[i] = T{0};
  }
  return gx;
}

template <typename T>
T sigmoid(T v) {
  if (v >= T{0}) return T{1} / (T{1} + std::exp(-v));
  const T e = std::exp(v);
  return e / (T{1} + e);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (auto& v : y.vec()) v = sigmoid(v);
  return y;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& grad_out, const Tensor<T>& output) {
  Tensor<T> gx = grad_out;
  for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] *= output[i] * (T{1} - output[i]);
  return gx;
}

// ---------------------------------------------------------------------------
// Fully connected: y = x W^T + b, W is (out, in).

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias) {
  YOLIC_CHECK(x.rank() == 2 && weight.rank() == 2 && x.dim(1) == weight.dim(1), ShapeError, "linear: input ",
              shape_str(x.shape()), " vs weight ", shape_str(weight.shape()));
  const int B = x.dim(0), in = x.dim(1), out = weight.dim(0);
  if (bias) YOLIC_CHECK(bias->numel() == static_cast<std::size_t>(out), ShapeError, "linear: bias length mismatch");
  Tensor<T> y({B, out});
  for (int b = 0; b < B; ++b) {
    const T* xr = x.data() + static_cast<std::size_t>(b) * in;
    for (int o = 0; o < out; ++o) {
      const T* wr = weight.data() + static_cast<std::size_t>(o) * in;
      T acc = bias ? (*bias)[static_cast<std::size_t>(o)] : T{0};
      for (int i = 0; i < in; ++i) acc += xr[i] * wr[i];
      y[static_cast<std::size_t>(b) * out + o] = acc;
    }
  }
  return y;
}

template <typename T>
struct LinearGrads {
  Tensor<T> grad_input;
  Tensor<T> grad_weight;
  Tensor<T> grad_bias;
};

template <typename T>
LinearGrads<T> linear_backward(const Tensor<T>& x, const Tensor<T>& weight, bool has_bias, const Tensor<T>& grad_out) {
  const int B = x.dim(0), in = x.dim(1), out = weight.dim(0);
  YOLIC_CHECK((grad_out.shape() == Shape{B, out}), ShapeError, "linear_backward: grad shape ", shape_str(grad_out.shape()));
  LinearGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(weight.shape()), has_bias ? Tensor<T>({out}) : Tensor<T>()};
  detail::gemm_nn(B, in, out, grad_out.data(), weight.data(), g.grad_input.data(), false);
  for (int b = 0; b < B; ++b) {
    const T* xr = x.data() + static_cast<std::size_t>(b) * in;
    for (int o = 0; o < out; ++o) {
      const T d = grad_out[static_cast<std::size_t>(b) * out + o];
      if (has_bias) g.grad_bias[static_cast<std::size_t>(o)] += d;
      if (d == T{0}) continue;
      T* gw = g.grad_weight.data() + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) gw[i] += d * xr[i];
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Dropout (inverted scaling). The keep mask is a pure function of
// (seed, layer, step, element).

inline std::uint64_t dropout_key(std::uint64_t seed, std::uint64_t layer, std::uint64_t step) {
  return mix64(mix64(mix64(seed) ^ layer) ^ step);
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Mode mode, std::uint64_t key, std::vector<std::uint8_t>* keep = nullptr) {
  YOLIC_CHECK(rate >= 0.0 && rate < 1.0, Error, "dropout rate must be in [0,1), got ", rate);
  if (mode == Mode::kEval || rate == 0.0) {
    if (keep) keep->assign(x.numel(), 1);
    return x;
  }
  Tensor<T> y(x.shape());
  if (keep) keep->resize(x.numel());
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const bool k = to_unit(hash_counter(key, i)) >= rate;
    if (keep) (*keep)[i] = k;
    y[i] = k ? x[i] * scale : T{0};
  }
  return y;
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& grad_out, double rate, const std::vector<std::uint8_t>& keep) {
  YOLIC_CHECK(keep.size() == grad_out.numel(), ShapeError, "dropout_backward: mask size mismatch");
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  Tensor<T> gx(grad_out.shape());
  for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] = keep[i] ? grad_out[i] * scale : T{0};
  return gx;
}

}  // namespace yolic::nn
