// dkdssd/enhancer.hpp

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

// Convolutional-recurrent magnitude enhancer. The network sees log1p of the
// noisy magnitude and predicts the clean magnitude directly:
//
//   enc1: conv 1->c1, 3x3, stride (2,1)      [F1, T]
//   enc2: conv c1->c2, 3x3, stride (2,1)     [F2, T]
//   gru over time on the flattened [c2*F2, T], linear back to c2*F2
//   dec1: convT (c2+c2)->c1 with enc2 skip    [F1, T]
//   dec2: convT (c1+c1)->1 with enc1 skip     [F, T]
//   softplus

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dkdssd/conv.hpp"
#include "dkdssd/dsp.hpp"
#include "dkdssd/nn.hpp"
#include "dkdssd/spectral.hpp"

namespace dkd {

struct EnhancerConfig {
  int channels1 = 8;
  int channels2 = 16;
  int hidden = 32;
  FrameParams frame{320, 160, WindowKind::kHann};
};

template <typename T>
class Enhancer {
 public:
  Enhancer() = default;
  Enhancer(ParamStore<T>& ps, const std::string& prefix, const EnhancerConfig& cfg = {}) : cfg_(cfg) {
    bins_ = cfg.frame.num_bins();
    f1_ = (bins_ - 1) / 2 + 1;
    f2_ = (f1_ - 1) / 2 + 1;
    // Each transposed conv maps h -> 2h - 1, so the encoder must be exactly invertible.
    if (2 * f1_ - 1 != bins_ || 2 * f2_ - 1 != f1_)
      throw ShapeError("enhancer: " + std::to_string(bins_) + " bins cannot be halved twice exactly");
    const Hw k{3, 3}, s{2, 1}, p{1, 1};
    const int c1 = cfg.channels1, c2 = cfg.channels2;
    enc1_ = Conv2dLayer<T>(ps, prefix + ".enc1", 1, c1, k, s, p);
    enc2_ = Conv2dLayer<T>(ps, prefix + ".enc2", c1, c2, k, s, p);
    gru_ = GruLayer<T>(ps, prefix + ".gru", c2 * f2_, cfg.hidden);
    proj_ = LinearLayer<T>(ps, prefix + ".proj", cfg.hidden, c2 * f2_);
    dec1_ = ConvTranspose2dLayer<T>(ps, prefix + ".dec1", 2 * c2, c1, k, s, p);
    dec2_ = ConvTranspose2dLayer<T>(ps, prefix + ".dec2", 2 * c1, 1, k, s, p);
  }

  /// noisy_mag[F, T] -> enhanced magnitude [F, T], elementwise >= 0.
  Tensor<T> operator()(const Tensor<T>& noisy_mag) const {
    RequireRank(noisy_mag, 2, "enhance");
    if (noisy_mag.dim(0) != bins_)
      throw ShapeError("enhance: expected " + std::to_string(bins_) + " bins, got " + ShapeString(noisy_mag.shape()));
    const int frames = noisy_mag.dim(1), c2 = cfg_.channels2;
    const Tensor<T> x = Reshape(Log1p(noisy_mag), {1, bins_, frames});
    const Tensor<T> e1 = Relu(enc1_(x));
    const Tensor<T> e2 = Relu(enc2_(e1));
    const Tensor<T> h = gru_.Forward(Reshape(e2, {c2 * f2_, frames}));
    const Tensor<T> b = Relu(Reshape(proj_.Columns(h), {c2, f2_, frames}));
    const Tensor<T> d1 = Relu(dec1_(Concat<T>({b, e2}, 0)));
    const Tensor<T> d2 = dec2_(Concat<T>({d1, e1}, 0));
    return Softplus(Reshape(d2, {bins_, frames}));
  }

  const EnhancerConfig& config() const { return cfg_; }
  int bins() const { return bins_; }

 private:
  EnhancerConfig cfg_;
  int bins_ = 0, f1_ = 0, f2_ = 0;
  Conv2dLayer<T> enc1_, enc2_;
  GruLayer<T> gru_;
  LinearLayer<T> proj_;
  ConvTranspose2dLayer<T> dec1_, dec2_;
};

/// Mean squared error over all cells.
template <typename T>
Tensor<T> SeLoss(const Tensor<T>& enhanced, const Tensor<T>& clean) {
  RequireSameShape(enhanced, clean, "se_loss");
  return Mean(Square(Sub(enhanced, clean)));
}

/// Magnitude and phase of a waveform on the enhancer grid.
struct MagPhase {
  std::vector<double> magnitude;  // F x T row-major
  std::vector<double> phase;
  int bins = 0, frames = 0;
  std::size_t length = 0;

  template <typename T>
  Tensor<T> MagnitudeTensor() const {
    return Tensor<T>::FromData({bins, frames}, std::vector<T>(magnitude.begin(), magnitude.end()));
  }
};

inline MagPhase AnalyzeMagPhase(const Waveform& w, const FrameParams& p) {
  const auto s = Stft(w, p);
  return {s.Magnitude(), s.Phase(), s.num_bins, s.num_frames, w.size()};
}

/// Enhanced magnitude combined with the noisy phase, back to the time domain.
template <typename T>
Tensor<T> ReconstructTime(const Tensor<T>& enhanced_mag, const MagPhase& noisy, const FrameParams& p) {
  return IstftFromMagnitude(enhanced_mag, noisy.phase, p, noisy.length);
}

}  // namespace dkd
