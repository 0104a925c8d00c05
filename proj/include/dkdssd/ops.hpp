// dkdssd/ops.hpp

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

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dkdssd/tensor.hpp"

namespace dkd {

/// Lower clamp applied to every log() argument.
inline constexpr double kLogEpsilon = 1e-8;

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

// Binary elementwise op with exact-shape or scalar broadcasting.
// `df(a, b, out)` returns the pair of local partials.
template <typename T, typename F, typename DF>
Tensor<T> Binary(const Tensor<T>& a, const Tensor<T>& b, const char* op, F f, DF df) {
  const std::size_t na = a.numel(), nb = b.numel();
  if (a.shape() != b.shape() && na != 1 && nb != 1)
    throw ShapeError(std::string(op) + ": cannot broadcast " + ShapeString(a.shape()) + " with " +
                     ShapeString(b.shape()));
  const bool a_big = (a.shape() == b.shape()) ? true : na >= nb;
  const Shape out_shape = a_big ? a.shape() : b.shape();
  const std::size_t n = std::max(na, nb);
  std::vector<T> out(n);
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  const std::size_t sa = na == 1 && n > 1 ? 0 : 1;
  const std::size_t sb = nb == 1 && n > 1 ? 0 : 1;
  for (std::size_t i = 0; i < n; ++i) out[i] = f(pa[i * sa], pb[i * sb]);
  return MakeResult<T>(out_shape, std::move(out), {a, b}, op, [sa, sb, df](Node<T>& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    const std::size_t n = self.data.size();
    T* ga = A.requires_grad ? A.grad_buffer().data() : nullptr;
    T* gb = B.requires_grad ? B.grad_buffer().data() : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      auto [da, db] = df(A.data[i * sa], B.data[i * sb], self.data[i]);
      if (ga) ga[i * sa] += self.grad[i] * da;
      if (gb) gb[i * sb] += self.grad[i] * db;
    }
  });
}

// Unary elementwise op; `df(x, y)` is dy/dx given input and output.
template <typename T, typename F, typename DF>
Tensor<T> Unary(const Tensor<T>& a, const char* op, F f, DF df) {
  std::vector<T> out(a.numel());
  const T* pa = a.data().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(pa[i]);
  return MakeResult<T>(a.shape(), std::move(out), {a}, op, [df](Node<T>& self) {
    auto& A = *self.parents[0];
    auto& ga = A.grad_buffer();
    for (std::size_t i = 0; i < self.data.size(); ++i)
      ga[i] += self.grad[i] * df(A.data[i], self.data[i]);
  });
}

}  // namespace detail

template <typename T>
Tensor<T> Add(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::Binary(a, b, "add", [](T x, T y) { return x + y; },
                        [](T, T, T) { return std::pair<T, T>{T(1), T(1)}; });
}
template <typename T>
Tensor<T> Sub(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::Binary(a, b, "sub", [](T x, T y) { return x - y; },
                        [](T, T, T) { return std::pair<T, T>{T(1), T(-1)}; });
}
template <typename T>
Tensor<T> Mul(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::Binary(a, b, "mul", [](T x, T y) { return x * y; },
                        [](T x, T y, T) { return std::pair<T, T>{y, x}; });
}
template <typename T>
Tensor<T> Div(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::Binary(a, b, "div", [](T x, T y) { return x / y; },
                        [](T x, T y, T) { return std::pair<T, T>{T(1) / y, -x / (y * y)}; });
}

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return Add(a, b); }
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return Sub(a, b); }
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return Mul(a, b); }

template <typename T>
Tensor<T> Scale(const Tensor<T>& a, T c) {
  return detail::Unary(a, "scale", [c](T x) { return c * x; }, [c](T, T) { return c; });
}
template <typename T>
Tensor<T> AddScalar(const Tensor<T>& a, T c) {
  return detail::Unary(a, "add_scalar", [c](T x) { return x + c; }, [](T, T) { return T(1); });
}
/// c - a
template <typename T>
Tensor<T> RSub(T c, const Tensor<T>& a) {
  return detail::Unary(a, "rsub", [c](T x) { return c - x; }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> Sigmoid(const Tensor<T>& a) {
  return detail::Unary(
      a, "sigmoid",
      [](T x) {
        // branch keeps exp() argument nonpositive
        if (x >= 0) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}
template <typename T>
Tensor<T> Tanh(const Tensor<T>& a) {
  return detail::Unary(a, "tanh", [](T x) { return std::tanh(x); },
                       [](T, T y) { return T(1) - y * y; });
}
template <typename T>
Tensor<T> Relu(const Tensor<T>& a) {
  return detail::Unary(a, "relu", [](T x) { return x > 0 ? x : T(0); },
                       [](T x, T) { return x > 0 ? T(1) : T(0); });
}
template <typename T>
Tensor<T> Softplus(const Tensor<T>& a) {
  return detail::Unary(
      a, "softplus", [](T x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](T x, T) {
        if (x >= 0) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      });
}
template <typename T>
Tensor<T> Exp(const Tensor<T>& a) {
  return detail::Unary(a, "exp", [](T x) { return std::exp(std::min(x, T(80))); },
                       [](T x, T y) { return x < T(80) ? y : T(0); });
}
/// Natural log of max(x, eps). The gradient is zero on the clamped side.
template <typename T>
Tensor<T> Log(const Tensor<T>& a, T eps = T(kLogEpsilon)) {
  return detail::Unary(a, "log", [eps](T x) { return std::log(std::max(x, eps)); },
                       [eps](T x, T) { return x > eps ? T(1) / x : T(0); });
}
template <typename T>
Tensor<T> Log1p(const Tensor<T>& a) {
  return detail::Unary(a, "log1p", [](T x) { return std::log1p(x); },
                       [](T x, T) { return T(1) / (T(1) + x); });
}
template <typename T>
Tensor<T> Sqrt(const Tensor<T>& a) {
  return detail::Unary(a, "sqrt", [](T x) { return std::sqrt(std::max(x, T(0))); },
                       [](T, T y) { return y > 0 ? T(0.5) / y : T(0); });
}
template <typename T>
Tensor<T> Square(const Tensor<T>& a) {
  return detail::Unary(a, "square", [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Tensor<T> Sum(const Tensor<T>& a) {
  T s = 0;
  for (T v : a.data()) s += v;
  return MakeResult<T>({1}, {s}, {a}, "sum", [](Node<T>& self) {
    auto& ga = self.parents[0]->grad_buffer();
    const T g = self.grad[0];
    for (auto& v : ga) v += g;
  });
}
template <typename T>
Tensor<T> Mean(const Tensor<T>& a) {
  return Scale(Sum(a), T(1) / static_cast<T>(a.numel()));
}

/// Reinterprets the element order under a new shape (copying).
template <typename T>
Tensor<T> Reshape(const Tensor<T>& a, Shape shape) {
  if (NumElements(shape) != a.numel())
    throw ShapeError("reshape: cannot view " + ShapeString(a.shape()) + " as " + ShapeString(shape));
  return MakeResult<T>(std::move(shape), a.vec(), {a}, "reshape", [](Node<T>& self) {
    auto& ga = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
  });
}

namespace detail {
// Views a shape as [outer, axis, inner] around `axis`.
inline void SplitAxis(const Shape& s, int axis, std::size_t* outer, std::size_t* inner) {
  *outer = 1;
  *inner = 1;
  for (int i = 0; i < axis; ++i) *outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) *inner *= s[i];
}
}  // namespace detail

/// Concatenation along `axis`; all other dims must agree.
template <typename T>
Tensor<T> Concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  if (axis < 0 || axis >= static_cast<int>(s0.size())) throw ShapeError("concat: bad axis");
  Shape out_shape = s0;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    if (p.rank() != static_cast<int>(s0.size())) throw ShapeError("concat: rank mismatch");
    for (int i = 0; i < p.rank(); ++i)
      if (i != axis && p.dim(i) != s0[i])
        throw ShapeError("concat: incompatible " + ShapeString(p.shape()) + " vs " + ShapeString(s0));
    out_shape[axis] += p.dim(axis);
  }
  std::size_t outer, inner;
  detail::SplitAxis(s0, axis, &outer, &inner);
  const std::size_t out_axis = out_shape[axis];
  std::vector<T> out(NumElements(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t len = static_cast<std::size_t>(p.dim(axis)) * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(p.data().data() + o * len, len, out.data() + (o * out_axis + off) * inner);
    off += p.dim(axis);
  }
  return MakeResult<T>(out_shape, std::move(out), parts, "concat",
                       [offsets, outer, inner, out_axis](Node<T>& self) {
                         for (std::size_t k = 0; k < self.parents.size(); ++k) {
                           auto& P = *self.parents[k];
                           if (!P.requires_grad) continue;
                           auto& gp = P.grad_buffer();
                           const std::size_t len = gp.size() / outer;
                           for (std::size_t o = 0; o < outer; ++o) {
                             const T* src = self.grad.data() + (o * out_axis + offsets[k]) * inner;
                             T* dst = gp.data() + o * len;
                             for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
                           }
                         }
                       });
}

/// Selects `indices` along `axis` (repeats allowed; gradient scatter-adds).
template <typename T>
Tensor<T> IndexSelect(const Tensor<T>& a, int axis, std::vector<int> indices) {
  if (axis < 0 || axis >= a.rank()) throw ShapeError("index_select: bad axis");
  for (int i : indices)
    if (i < 0 || i >= a.dim(axis))
      throw ShapeError("index_select: index " + std::to_string(i) + " out of range for " +
                       ShapeString(a.shape()));
  std::size_t outer, inner;
  detail::SplitAxis(a.shape(), axis, &outer, &inner);
  const std::size_t in_axis = a.dim(axis);
  Shape out_shape = a.shape();
  out_shape[axis] = static_cast<int>(indices.size());
  std::vector<T> out(NumElements(out_shape));
  const std::size_t n_idx = indices.size();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t j = 0; j < n_idx; ++j)
      std::copy_n(a.data().data() + (o * in_axis + indices[j]) * inner, inner,
                  out.data() + (o * n_idx + j) * inner);
  return MakeResult<T>(out_shape, std::move(out), {a}, "index_select",
                       [indices = std::move(indices), outer, inner, in_axis](Node<T>& self) {
                         auto& ga = self.parents[0]->grad_buffer();
                         const std::size_t n_idx = indices.size();
                         for (std::size_t o = 0; o < outer; ++o)
                           for (std::size_t j = 0; j < n_idx; ++j) {
                             const T* src = self.grad.data() + (o * n_idx + j) * inner;
                             T* dst = ga.data() + (o * in_axis + indices[j]) * inner;
                             for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
                           }
                       });
}

/// Contiguous range [start, start+len) along `axis`.
template <typename T>
Tensor<T> Slice(const Tensor<T>& a, int axis, int start, int len) {
  if (axis < 0 || axis >= a.rank() || start < 0 || len < 0 || start + len > a.dim(axis))
    throw ShapeError("slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") invalid on axis " + std::to_string(axis) + " of " + ShapeString(a.shape()));
  std::vector<int> idx(len);
  std::iota(idx.begin(), idx.end(), start);
  return IndexSelect(a, axis, std::move(idx));
}

/// Replicates size-1 dims of `a` up to `shape` (same rank).
template <typename T>
Tensor<T> BroadcastTo(const Tensor<T>& a, const Shape& shape) {
  if (a.rank() != static_cast<int>(shape.size()))
    throw ShapeError("broadcast: rank mismatch " + ShapeString(a.shape()) + " -> " + ShapeString(shape));
  for (int i = 0; i < a.rank(); ++i)
    if (a.dim(i) != shape[i] && a.dim(i) != 1)
      throw ShapeError("broadcast: cannot expand " + ShapeString(a.shape()) + " to " + ShapeString(shape));
  const std::size_t n = NumElements(shape);
  const int r = a.rank();
  // Source offset per output element.
  std::vector<std::size_t> src(n);
  std::vector<std::size_t> in_stride(r, 1);
  for (int i = r - 2; i >= 0; --i) in_stride[i] = in_stride[i + 1] * a.dim(i + 1);
  std::vector<int> idx(r, 0);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t off = 0;
    for (int i = 0; i < r; ++i) off += (a.dim(i) == 1 ? 0 : idx[i]) * in_stride[i];
    src[k] = off;
    for (int i = r - 1; i >= 0; --i) {
      if (++idx[i] < shape[i]) break;
      idx[i] = 0;
    }
  }
  std::vector<T> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = a.data()[src[k]];
  return MakeResult<T>(shape, std::move(out), {a}, "broadcast", [src = std::move(src)](Node<T>& self) {
    auto& ga = self.parents[0]->grad_buffer();
    for (std::size_t k = 0; k < src.size(); ++k) ga[src[k]] += self.grad[k];
  });
}

/// [m,k] x [k,n] -> [m,n]
template <typename T>
Tensor<T> MatMul(const Tensor<T>& a, const Tensor<T>& b) {
  RequireRank(a, 2, "matmul");
  RequireRank(b, 2, "matmul");
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError("matmul: inner dims differ " + ShapeString(a.shape()) + " x " + ShapeString(b.shape()));
  std::vector<T> out(static_cast<std::size_t>(m) * n);
  detail::MapMat<T>(out.data(), m, n).noalias() =
      detail::ConstMapMat<T>(a.data().data(), m, k) * detail::ConstMapMat<T>(b.data().data(), k, n);
  return MakeResult<T>({m, n}, std::move(out), {a, b}, "matmul", [m, k, n](Node<T>& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    detail::ConstMapMat<T> g(self.grad.data(), m, n);
    if (A.requires_grad)
      detail::MapMat<T>(A.grad_buffer().data(), m, k).noalias() +=
          g * detail::ConstMapMat<T>(B.data.data(), k, n).transpose();
    if (B.requires_grad)
      detail::MapMat<T>(B.grad_buffer().data(), k, n).noalias() +=
          detail::ConstMapMat<T>(A.data.data(), m, k).transpose() * g;
  });
}

/// y = W x + b for a vector x; W is [out,in], b is [out] or undefined.
template <typename T>
Tensor<T> Affine(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  RequireRank(x, 1, "affine");
  Tensor<T> y = Reshape(MatMul(w, Reshape(x, {x.dim(0), 1})), {w.dim(0)});
  return b.defined() ? Add(y, b) : y;
}

template <typename T>
Tensor<T> Transpose2d(const Tensor<T>& a) {
  RequireRank(a, 2, "transpose");
  const int r = a.dim(0), c = a.dim(1);
  std::vector<T> out(a.numel());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[static_cast<std::size_t>(j) * r + i] = a.data()[static_cast<std::size_t>(i) * c + j];
  return MakeResult<T>({c, r}, std::move(out), {a}, "transpose", [r, c](Node<T>& self) {
    auto& ga = self.parents[0]->grad_buffer();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j)
        ga[static_cast<std::size_t>(i) * c + j] += self.grad[static_cast<std::size_t>(j) * r + i];
  });
}

/// Softmax over the last axis.
template <typename T>
Tensor<T> Softmax(const Tensor<T>& a) {
  const std::size_t n = a.dim(-1), rows = a.numel() / n;
  std::vector<T> out(a.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = a.data().data() + r * n;
    T* y = out.data() + r * n;
    const T mx = *std::max_element(x, x + n);
    T s = 0;
    for (std::size_t i = 0; i < n; ++i) s += (y[i] = std::exp(x[i] - mx));
    for (std::size_t i = 0; i < n; ++i) y[i] /= s;
  }
  return MakeResult<T>(a.shape(), std::move(out), {a}, "softmax", [n, rows](Node<T>& self) {
    auto& ga = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* y = self.data.data() + r * n;
      const T* g = self.grad.data() + r * n;
      T dot = 0;
      for (std::size_t i = 0; i < n; ++i) dot += g[i] * y[i];
      for (std::size_t i = 0; i < n; ++i) ga[r * n + i] += y[i] * (g[i] - dot);
    }
  });
}

/// Numerically stable log-softmax over the last axis.
template <typename T>
Tensor<T> LogSoftmax(const Tensor<T>& a) {
  const std::size_t n = a.dim(-1), rows = a.numel() / n;
  std::vector<T> out(a.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* x = a.data().data() + r * n;
    T* y = out.data() + r * n;
    const T mx = *std::max_element(x, x + n);
    T s = 0;
    for (std::size_t i = 0; i < n; ++i) s += std::exp(x[i] - mx);
    const T lse = mx + std::log(s);
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] - lse;
  }
  return MakeResult<T>(a.shape(), std::move(out), {a}, "log_softmax", [n, rows](Node<T>& self) {
    auto& ga = self.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const T* y = self.data.data() + r * n;
      const T* g = self.grad.data() + r * n;
      T gs = 0;
      for (std::size_t i = 0; i < n; ++i) gs += g[i];
      for (std::size_t i = 0; i < n; ++i) ga[r * n + i] += g[i] - std::exp(y[i]) * gs;
    }
  });
}

/// Element i of a flat view, as a [1] tensor.
template <typename T>
Tensor<T> Pick(const Tensor<T>& a, int i) {
  return IndexSelect(Reshape(a, {static_cast<int>(a.numel())}), 0, {i});
}

}  // namespace dkd
