// dkdssd/conv.hpp

// Copyright 2026  The dkdssd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <limits>
#include <string>
#include <vector>

#include "dkdssd/ops.hpp"

namespace dkd {

struct Hw {
  int h = 1;
  int w = 1;
};

struct ConvGeometry {
  int channels, height, width;  // input
  int kh, kw;
  Hw stride, pad;
  int out_h() const { return (height + 2 * pad.h - kh) / stride.h + 1; }
  int out_w() const { return (width + 2 * pad.w - kw) / stride.w + 1; }
  std::size_t rows() const { return static_cast<std::size_t>(channels) * kh * kw; }
  std::size_t cols() const { return static_cast<std::size_t>(out_h()) * out_w(); }
};

namespace detail {

template <typename T>
void Im2Col(const T* x, const ConvGeometry& g, T* col) {
  const int oh = g.out_h(), ow = g.out_w();
  for (int c = 0; c < g.channels; ++c)
    for (int i = 0; i < g.kh; ++i)
      for (int j = 0; j < g.kw; ++j) {
        T* row = col + ((static_cast<std::size_t>(c) * g.kh + i) * g.kw + j) * oh * ow;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * g.stride.h + i - g.pad.h;
          T* dst = row + static_cast<std::size_t>(y) * ow;
          if (iy < 0 || iy >= g.height) {
            std::fill_n(dst, ow, T(0));
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(c) * g.height + iy) * g.width;
          for (int xo = 0; xo < ow; ++xo) {
            const int ix = xo * g.stride.w + j - g.pad.w;
            dst[xo] = (ix >= 0 && ix < g.width) ? src[ix] : T(0);
          }
        }
      }
}

// Adjoint of Im2Col: accumulates columns back into an image.
template <typename T>
void Col2Im(const T* col, const ConvGeometry& g, T* x) {
  const int oh = g.out_h(), ow = g.out_w();
  for (int c = 0; c < g.channels; ++c)
    for (int i = 0; i < g.kh; ++i)
      for (int j = 0; j < g.kw; ++j) {
        const T* row = col + ((static_cast<std::size_t>(c) * g.kh + i) * g.kw + j) * oh * ow;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * g.stride.h + i - g.pad.h;
          if (iy < 0 || iy >= g.height) continue;
          const T* src = row + static_cast<std::size_t>(y) * ow;
          T* dst = x + (static_cast<std::size_t>(c) * g.height + iy) * g.width;
          for (int xo = 0; xo < ow; ++xo) {
            const int ix = xo * g.stride.w + j - g.pad.w;
            if (ix >= 0 && ix < g.width) dst[ix] += src[xo];
          }
        }
      }
}

}  // namespace detail

/// 2-d cross-correlation of x[C,H,W] with w[O,C,kh,kw], optional bias[O].
template <typename T>
Tensor<T> Conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, Hw stride = {1, 1},
                 Hw pad = {0, 0}) {
  RequireRank(x, 3, "conv2d input");
  RequireRank(w, 4, "conv2d kernel");
  if (stride.h <= 0 || stride.w <= 0 || pad.h < 0 || pad.w < 0)
    throw ShapeError("conv2d: stride must be positive and padding nonnegative");
  if (w.dim(1) != x.dim(0))
    throw ShapeError("conv2d: kernel " + ShapeString(w.shape()) + " expects " +
                     std::to_string(w.dim(1)) + " input channels, input is " + ShapeString(x.shape()));
  if (x.dim(1) + 2 * pad.h < w.dim(2) || x.dim(2) + 2 * pad.w < w.dim(3))
    throw ShapeError("conv2d: kernel " + ShapeString(w.shape()) + " larger than padded input " +
                     ShapeString(x.shape()));
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != w.dim(0)))
    throw ShapeError("conv2d: bias " + ShapeString(bias.shape()) + " does not match kernel " +
                     ShapeString(w.shape()));
  const ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), w.dim(2), w.dim(3), stride, pad};
  const int out_c = w.dim(0);
  const std::size_t rows = g.rows(), cols = g.cols();
  std::vector<T> col(rows * cols);
  detail::Im2Col(x.data().data(), g, col.data());
  std::vector<T> out(static_cast<std::size_t>(out_c) * cols);
  detail::MapMat<T> om(out.data(), out_c, cols);
  om.noalias() = detail::ConstMapMat<T>(w.data().data(), out_c, rows) * detail::ConstMapMat<T>(col.data(), rows, cols);
  if (bias.defined())
    for (int o = 0; o < out_c; ++o) om.row(o).array() += bias[o];

  std::vector<Tensor<T>> parents{x, w};
  if (bias.defined()) parents.push_back(bias);
  return MakeResult<T>(
      {out_c, g.out_h(), g.out_w()}, std::move(out), parents, "conv2d",
      [g, out_c, col = std::move(col)](Node<T>& self) {
        const std::size_t rows = g.rows(), cols = g.cols();
        detail::ConstMapMat<T> gm(self.grad.data(), out_c, cols);
        auto& X = *self.parents[0];
        auto& W = *self.parents[1];
        if (W.requires_grad)
          detail::MapMat<T>(W.grad_buffer().data(), out_c, rows).noalias() +=
              gm * detail::ConstMapMat<T>(col.data(), rows, cols).transpose();
        if (X.requires_grad) {
          std::vector<T> dcol(rows * cols);
          detail::MapMat<T>(dcol.data(), rows, cols).noalias() =
              detail::ConstMapMat<T>(W.data.data(), out_c, rows).transpose() * gm;
          detail::Col2Im(dcol.data(), g, X.grad_buffer().data());
        }
        if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
          auto& gb = self.parents[2]->grad_buffer();
          // Fixed summation order: a vectorised row sum depends on buffer alignment.
          for (int o = 0; o < out_c; ++o) {
            T acc = 0;
            const T* row = self.grad.data() + static_cast<std::size_t>(o) * cols;
            for (std::size_t c = 0; c < cols; ++c) acc += row[c];
            gb[o] += acc;
          }
        }
      });
}

/// Transposed convolution (adjoint of Conv2d in the input) of x[C_in,H,W]
/// with w[C_in,C_out,kh,kw]. Output size is (H-1)*stride - 2*pad + k.
template <typename T>
Tensor<T> ConvTranspose2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                          Hw stride = {1, 1}, Hw pad = {0, 0}) {
  RequireRank(x, 3, "conv_transpose2d input");
  RequireRank(w, 4, "conv_transpose2d kernel");
  if (w.dim(0) != x.dim(0))
    throw ShapeError("conv_transpose2d: kernel " + ShapeString(w.shape()) + " vs input " +
                     ShapeString(x.shape()));
  const int in_c = x.dim(0), out_c = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const int oh = (x.dim(1) - 1) * stride.h - 2 * pad.h + kh;
  const int ow = (x.dim(2) - 1) * stride.w - 2 * pad.w + kw;
  if (oh <= 0 || ow <= 0) throw ShapeError("conv_transpose2d: empty output");
  // Geometry of the forward conv this op is the adjoint of.
  const ConvGeometry g{out_c, oh, ow, kh, kw, stride, pad};
  if (g.out_h() != x.dim(1) || g.out_w() != x.dim(2))
    throw ShapeError("conv_transpose2d: stride/pad do not invert to input " + ShapeString(x.shape()));
  const std::size_t rows = g.rows(), cols = g.cols();
  std::vector<T> col(rows * cols);
  detail::MapMat<T>(col.data(), rows, cols).noalias() =
      detail::ConstMapMat<T>(w.data().data(), in_c, rows).transpose() *
      detail::ConstMapMat<T>(x.data().data(), in_c, cols);
  std::vector<T> out(static_cast<std::size_t>(out_c) * oh * ow, T(0));
  detail::Col2Im(col.data(), g, out.data());
  if (bias.defined()) {
    if (bias.rank() != 1 || bias.dim(0) != out_c) throw ShapeError("conv_transpose2d: bias shape");
    const std::size_t plane = static_cast<std::size_t>(oh) * ow;
    for (int o = 0; o < out_c; ++o)
      for (std::size_t i = 0; i < plane; ++i) out[o * plane + i] += bias[o];
  }
  std::vector<Tensor<T>> parents{x, w};
  if (bias.defined()) parents.push_back(bias);
  return MakeResult<T>({out_c, oh, ow}, std::move(out), parents, "conv_transpose2d",
                       [g, in_c, out_c](Node<T>& self) {
                         const std::size_t rows = g.rows(), cols = g.cols();
                         std::vector<T> gcol(rows * cols);
                         detail::Im2Col(self.grad.data(), g, gcol.data());
                         detail::ConstMapMat<T> gc(gcol.data(), rows, cols);
                         auto& X = *self.parents[0];
                         auto& W = *self.parents[1];
                         if (X.requires_grad)
                           detail::MapMat<T>(X.grad_buffer().data(), in_c, cols).noalias() +=
                               detail::ConstMapMat<T>(W.data.data(), in_c, rows) * gc;
                         if (W.requires_grad)
                           detail::MapMat<T>(W.grad_buffer().data(), in_c, rows).noalias() +=
                               detail::ConstMapMat<T>(X.data.data(), in_c, cols) * gc.transpose();
                         if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
                           auto& gb = self.parents[2]->grad_buffer();
                           const std::size_t plane = static_cast<std::size_t>(g.height) * g.width;
                           for (int o = 0; o < out_c; ++o) {
                             T s = 0;
                             for (std::size_t i = 0; i < plane; ++i) s += self.grad[o * plane + i];
                             gb[o] += s;
                           }
                         }
                       });
}

enum class PoolMode { kMax, kAvg };

/// Per-channel spatial pooling of x[C,H,W], no padding.
template <typename T>
Tensor<T> Pool2d(const Tensor<T>& x, Hw window, Hw stride, PoolMode mode) {
  RequireRank(x, 3, "pool2d");
  if (window.h <= 0 || window.w <= 0) throw ShapeError("pool2d: zero-size window");
  if (stride.h <= 0 || stride.w <= 0) throw ShapeError("pool2d: stride must be positive");
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (window.h > H || window.w > W)
    throw ShapeError("pool2d: window larger than input " + ShapeString(x.shape()));
  const int oh = (H - window.h) / stride.h + 1, ow = (W - window.w) / stride.w + 1;
  std::vector<T> out(static_cast<std::size_t>(C) * oh * ow);
  std::vector<std::size_t> argmax(mode == PoolMode::kMax ? out.size() : 0);
  const T* px = x.data().data();
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < oh; ++y)
      for (int z = 0; z < ow; ++z) {
        const std::size_t o = (static_cast<std::size_t>(c) * oh + y) * ow + z;
        T best = -std::numeric_limits<T>::infinity(), sum = 0;
        std::size_t best_i = 0;
        for (int i = 0; i < window.h; ++i)
          for (int j = 0; j < window.w; ++j) {
            const std::size_t k = (static_cast<std::size_t>(c) * H + y * stride.h + i) * W + z * stride.w + j;
            sum += px[k];
            if (px[k] > best) {
              best = px[k];
              best_i = k;
            }
          }
        if (mode == PoolMode::kMax) {
          out[o] = best;
          argmax[o] = best_i;
        } else {
          out[o] = sum / static_cast<T>(window.h * window.w);
        }
      }
  return MakeResult<T>(
      {C, oh, ow}, std::move(out), {x}, mode == PoolMode::kMax ? "max_pool2d" : "avg_pool2d",
      [mode, argmax = std::move(argmax), window, stride, C, H, W, oh, ow](Node<T>& self) {
        auto& gx = self.parents[0]->grad_buffer();
        if (mode == PoolMode::kMax) {
          for (std::size_t o = 0; o < argmax.size(); ++o) gx[argmax[o]] += self.grad[o];
          return;
        }
        const T inv = T(1) / static_cast<T>(window.h * window.w);
        for (int c = 0; c < C; ++c)
          for (int y = 0; y < oh; ++y)
            for (int z = 0; z < ow; ++z) {
              const T g = self.grad[(static_cast<std::size_t>(c) * oh + y) * ow + z] * inv;
              for (int i = 0; i < window.h; ++i)
                for (int j = 0; j < window.w; ++j)
                  gx[(static_cast<std::size_t>(c) * H + y * stride.h + i) * W + z * stride.w + j] += g;
            }
      });
}

/// Reduces the channel axis of x[C,H,W] to [1,H,W] by max or mean.
template <typename T>
Tensor<T> ChannelPool(const Tensor<T>& x, PoolMode mode) {
  RequireRank(x, 3, "channel_pool");
  const int C = x.dim(0);
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  std::vector<T> out(plane);
  std::vector<int> arg(mode == PoolMode::kMax ? plane : 0);
  const T* px = x.data().data();
  for (std::size_t p = 0; p < plane; ++p) {
    T best = px[p], sum = px[p];
    int bi = 0;
    for (int c = 1; c < C; ++c) {
      const T v = px[c * plane + p];
      sum += v;
      if (v > best) {
        best = v;
        bi = c;
      }
    }
    if (mode == PoolMode::kMax) {
      out[p] = best;
      arg[p] = bi;
    } else {
      out[p] = sum / static_cast<T>(C);
    }
  }
  return MakeResult<T>({1, x.dim(1), x.dim(2)}, std::move(out), {x}, "channel_pool",
                       [mode, arg = std::move(arg), C, plane](Node<T>& self) {
                         auto& gx = self.parents[0]->grad_buffer();
                         for (std::size_t p = 0; p < plane; ++p) {
                           if (mode == PoolMode::kMax) {
                             gx[arg[p] * plane + p] += self.grad[p];
                           } else {
                             const T g = self.grad[p] / static_cast<T>(C);
                             for (int c = 0; c < C; ++c) gx[c * plane + p] += g;
                           }
                         }
                       });
}

/// Mean over the spatial axes of x[C,H,W] -> [C].
template <typename T>
Tensor<T> GlobalAvgPool(const Tensor<T>& x) {
  RequireRank(x, 3, "global_avg_pool");
  const int C = x.dim(0);
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  std::vector<T> out(C, T(0));
  for (int c = 0; c < C; ++c) {
    T s = 0;
    for (std::size_t p = 0; p < plane; ++p) s += x.data()[c * plane + p];
    out[c] = s / static_cast<T>(plane);
  }
  return MakeResult<T>({C}, std::move(out), {x}, "global_avg_pool", [C, plane](Node<T>& self) {
    auto& gx = self.parents[0]->grad_buffer();
    for (int c = 0; c < C; ++c) {
      const T g = self.grad[c] / static_cast<T>(plane);
      for (std::size_t p = 0; p < plane; ++p) gx[c * plane + p] += g;
    }
  });
}

}  // namespace dkd
