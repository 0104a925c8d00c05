// dkdssd/classifier.hpp

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

// SE-residual CNN back end with an angular-margin (A-softmax) head.
// Class 0 is bonafide, class 1 is spoof.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dkdssd/conv.hpp"
#include "dkdssd/nn.hpp"

namespace dkd {

enum Label : int { kBonafide = 0, kSpoof = 1 };

inline constexpr int kEmbeddingDim = 128;

struct ClassifierConfig {
  std::vector<int> widths{16, 32, 64};
  int in_channels = 16;
  int embedding = kEmbeddingDim;
  int se_reduction = 4;

  static ClassifierConfig Tiny() { return {}; }
  /// Four stages of (3, 4, 6, 3) blocks, roughly 34 layers deep.
  static ClassifierConfig Deep() {
    ClassifierConfig c;
    c.widths.clear();
    for (auto [w, n] : {std::pair{16, 3}, std::pair{32, 4}, std::pair{64, 6}, std::pair{128, 3}})
      for (int i = 0; i < n; ++i) c.widths.push_back(w);
    return c;
  }
};

/// conv3x3 -> relu -> conv3x3 -> squeeze/excite gate -> + shortcut -> relu.
/// The first conv carries the stride; a 1x1 projection matches the shortcut.
template <typename T>
struct SeBlock {
  Conv2dLayer<T> conv1, conv2, shortcut;
  LinearLayer<T> fc1, fc2;
  bool project = false;

  SeBlock() = default;
  SeBlock(ParamStore<T>& ps, const std::string& name, int in_c, int out_c, int stride, int reduction) {
    conv1 = Conv2dLayer<T>(ps, name + ".conv1", in_c, out_c, {3, 3}, {stride, stride}, {1, 1});
    conv2 = Conv2dLayer<T>(ps, name + ".conv2", out_c, out_c, {3, 3}, {1, 1}, {1, 1});
    const int mid = std::max(1, out_c / reduction);
    fc1 = LinearLayer<T>(ps, name + ".se_fc1", out_c, mid);
    fc2 = LinearLayer<T>(ps, name + ".se_fc2", mid, out_c);
    project = in_c != out_c || stride != 1;
    if (project) shortcut = Conv2dLayer<T>(ps, name + ".shortcut", in_c, out_c, {1, 1}, {stride, stride}, {0, 0});
  }

  Tensor<T> Gate(const Tensor<T>& y) const { return Sigmoid(fc2(Relu(fc1(GlobalAvgPool(y))))); }

  Tensor<T> operator()(const Tensor<T>& x) const {
    const Tensor<T> y = conv2(Relu(conv1(x)));
    const int C = y.dim(0);
    const Tensor<T> gate = BroadcastTo(Reshape(Gate(y), {C, 1, 1}), y.shape());
    return Relu(Add(Mul(y, gate), project ? shortcut(x) : x));
  }
};

template <typename T>
struct ClassifierOutput {
  Tensor<T> embedding;  // [E]
  Tensor<T> norm;       // [1], |embedding|
  Tensor<T> logits;     // [2], |x| cos(theta_c)
};

template <typename T>
class Classifier {
 public:
  Classifier() = default;
  Classifier(ParamStore<T>& ps, const std::string& prefix, const ClassifierConfig& cfg = {}) : cfg_(cfg) {
    int in = cfg.in_channels;
    for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
      const int stride = (i > 0 && cfg.widths[i] != cfg.widths[i - 1]) ? 2 : 1;
      blocks_.emplace_back(ps, prefix + ".block" + std::to_string(i), in, cfg.widths[i], stride, cfg.se_reduction);
      in = cfg.widths[i];
    }
    embed_ = LinearLayer<T>(ps, prefix + ".embed", in, cfg.embedding);
    head_ = ps.Add(prefix + ".head.weight", {2, cfg.embedding}, Init::kKaimingUniform, cfg.embedding);
  }

  ClassifierOutput<T> operator()(const Tensor<T>& feat) const {
    RequireRank(feat, 3, "classify");
    Tensor<T> h = feat;
    for (const auto& b : blocks_) h = b(h);
    ClassifierOutput<T> out;
    out.embedding = embed_(GlobalAvgPool(h));
    out.norm = Sqrt(Sum(Square(out.embedding)));
    // Unit-norm class weights, no bias: logit_c = |x| cos(theta_c).
    const Tensor<T> row_norm = Sqrt(MatMul(Square(head_), Tensor<T>::Full({cfg_.embedding, 1}, T(1))));
    const Tensor<T> w = Div(head_, BroadcastTo(row_norm, head_.shape()));
    out.logits = Reshape(MatMul(w, Reshape(out.embedding, {cfg_.embedding, 1})), {2});
    return out;
  }

  const ClassifierConfig& config() const { return cfg_; }
  const std::vector<SeBlock<T>>& blocks() const { return blocks_; }

 private:
  ClassifierConfig cfg_;
  std::vector<SeBlock<T>> blocks_;
  LinearLayer<T> embed_;
  Tensor<T> head_;
};

/// Detection score: higher means more bonafide.
template <typename T>
double Score(const ClassifierOutput<T>& out) {
  return static_cast<double>(out.logits[kBonafide]) - static_cast<double>(out.logits[kSpoof]);
}

struct MarginConfig {
  int m = 2;
  double lambda_start = 1000.0;
  double lambda_decay = 0.99;
  double lambda_min = 5.0;
  bool plain_softmax = false;

  double Lambda(long step) const { return std::max(lambda_min, lambda_start * std::pow(lambda_decay, step)); }
};

namespace detail {

/// Chebyshev T_m(c) = cos(m acos c) and its derivative.
inline std::pair<double, double> Chebyshev(int m, double c) {
  double t0 = 1, t1 = c, d0 = 0, d1 = 1;
  if (m == 0) return {1.0, 0.0};
  for (int k = 1; k < m; ++k) {
    const double t2 = 2 * c * t1 - t0, d2 = 2 * t1 + 2 * c * d1 - d0;
    t0 = t1;
    t1 = t2;
    d0 = d1;
    d1 = d2;
  }
  return {t1, d1};
}

inline int MarginSegment(int m, double c) {
  const double theta = std::acos(std::clamp(c, -1.0, 1.0));
  return std::min(m - 1, static_cast<int>(std::floor(m * theta / std::numbers::pi)));
}

}  // namespace detail

/// psi(theta) = (-1)^k cos(m theta) - 2k for theta in [k pi/m, (k+1) pi/m],
/// written as a function of c = cos(theta); monotone decreasing in theta.
template <typename T>
Tensor<T> AngularPsi(const Tensor<T>& cos_theta, int m) {
  auto f = [m](T x) {
    const double c = std::clamp(static_cast<double>(x), -1.0, 1.0);
    const int k = detail::MarginSegment(m, c);
    return static_cast<T>((k % 2 ? -1.0 : 1.0) * detail::Chebyshev(m, c).first - 2.0 * k);
  };
  auto df = [m](T x, T) {
    const double c = static_cast<double>(x);
    if (c <= -1.0 || c >= 1.0) return T(0);
    const int k = detail::MarginSegment(m, c);
    return static_cast<T>((k % 2 ? -1.0 : 1.0) * detail::Chebyshev(m, c).second);
  };
  return detail::Unary(cos_theta, "angular_psi", f, df);
}

/// Cross-entropy with the true-class logit replaced by
///   f_y = (lambda * |x| cos(theta_y) + |x| psi(theta_y)) / (1 + lambda).
/// m = 1 (or plain_softmax) is ordinary softmax cross-entropy.
template <typename T>
Tensor<T> HardLoss(const Tensor<T>& logits, const Tensor<T>& norm, int label, const MarginConfig& cfg, long step) {
  if (label != kBonafide && label != kSpoof) throw std::invalid_argument("hard loss: invalid label " + std::to_string(label));
  if (logits.numel() != 2) throw ShapeError("hard loss: expected 2 logits, got " + ShapeString(logits.shape()));
  if (cfg.m < 1) throw std::invalid_argument("hard loss: margin must be >= 1");
  Tensor<T> z = logits;
  if (!cfg.plain_softmax && cfg.m > 1) {
    const T lambda = static_cast<T>(cfg.Lambda(step));
    const Tensor<T> ly = Pick(logits, label);
    const Tensor<T> psi = Mul(norm, AngularPsi(Div(ly, norm), cfg.m));
    const Tensor<T> fy = Scale(Add(Scale(ly, lambda), psi), T(1) / (T(1) + lambda));
    const Tensor<T> other = Pick(logits, 1 - label);
    z = label == kBonafide ? Concat<T>({fy, other}, 0) : Concat<T>({other, fy}, 0);
  }
  return Scale(Pick(LogSoftmax(z), label), T(-1));
}

}  // namespace dkd
