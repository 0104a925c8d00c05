// dkdssd/optim.hpp

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

#include <cmath>
#include <vector>

#include "dkdssd/tensor.hpp"

namespace dkd {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Per-parameter first/second moment buffers; zero until the first step.
template <typename T>
struct AdamState {
  std::vector<T> m, v;
  long step = 0;
};

/// One bias-corrected Adam update of `param` in place.
template <typename T>
void AdamStep(std::span<T> param, std::span<const T> grad, AdamState<T>& st, const AdamConfig& cfg) {
  if (param.size() != grad.size())
    throw ShapeError("adam: parameter/gradient size mismatch");
  if (st.m.empty()) {
    st.m.assign(param.size(), T(0));
    st.v.assign(param.size(), T(0));
  }
  if (st.m.size() != param.size()) throw ShapeError("adam: state size mismatch");
  ++st.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double m = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g;
    const double v = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g * g;
    st.m[i] = static_cast<T>(m);
    st.v[i] = static_cast<T>(v);
    param[i] = static_cast<T>(param[i] - cfg.lr * (m / c1) / (std::sqrt(v / c2) + cfg.eps));
  }
}

/// Adam over a fixed list of parameter tensors.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg), state_(params_.size()) {}

  /// Applies one update to every parameter that received a gradient.
  void Step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p.has_grad()) continue;
      AdamStep<T>(p.mutable_data(), p.node()->grad, state_[i], cfg_);
    }
  }
  void ZeroGrad() {
    for (auto& p : params_) p.zero_grad();
  }
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  std::vector<Tensor<T>> params_;
  AdamConfig cfg_;
  std::vector<AdamState<T>> state_;
};

}  // namespace dkd
