// dkdssd/distill.hpp

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

// Teacher-student loss terms.

#pragma once

#include <stdexcept>

#include "dkdssd/ops.hpp"

namespace dkd {

struct DistillConfig {
  double tau = 3.0;
  double alpha = 0.05;
  bool detach_teacher = true;

  void Validate() const {
    if (!(tau > 0)) throw std::invalid_argument("distill: tau must be > 0");
    if (!(alpha >= 0 && alpha <= 1)) throw std::invalid_argument("distill: alpha must lie in [0, 1]");
  }
};

/// tau^2 * KL(p_t || p_s) with p = softmax(y / tau). The teacher distribution
/// is the target; with `detach_teacher` no gradient reaches y_t.
template <typename T>
Tensor<T> KdLoss(const Tensor<T>& y_s, const Tensor<T>& y_t, double tau, bool detach_teacher = true) {
  if (!(tau > 0)) throw std::invalid_argument("kd loss: tau must be > 0");
  RequireSameShape(y_s, y_t, "kd_loss");
  const T inv = static_cast<T>(1.0 / tau);
  const Tensor<T> t_in = detach_teacher ? y_t.detach() : y_t;
  const Tensor<T> log_pt = LogSoftmax(Scale(t_in, inv));
  const Tensor<T> log_ps = LogSoftmax(Scale(y_s, inv));
  const Tensor<T> kl = Sum(Mul(Exp(log_pt), Sub(log_pt, log_ps)));
  return Scale(kl, static_cast<T>(tau * tau));
}

/// (1 - alpha) * L_SL + alpha * L_KD + L_TL.
template <typename T>
Tensor<T> SsdLoss(const Tensor<T>& l_sl, const Tensor<T>& l_kd, const Tensor<T>& l_tl, double alpha) {
  return Add(Add(Scale(l_sl, static_cast<T>(1 - alpha)), Scale(l_kd, static_cast<T>(alpha))), l_tl);
}

}  // namespace dkd
