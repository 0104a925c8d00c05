// dkdssd/spectral.hpp

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

// Differentiable counterparts of the dsp transforms. They let the classifier
// loss reach the enhancer through resynthesis and re-analysis. Transforms run
// in double precision regardless of T.

#pragma once

#include <complex>
#include <vector>

#include "dkdssd/dsp.hpp"
#include "dkdssd/ops.hpp"

namespace dkd {

/// |STFT(x)| of a 1-d signal tensor, shape [num_bins, num_frames].
template <typename T>
Tensor<T> StftMagnitude(const Tensor<T>& x, const FrameParams& p) {
  RequireRank(x, 1, "stft_magnitude");
  CheckFrameParams(p);
  const long n = x.dim(0);
  if (n < p.hop || n < 2)
    throw DspError("waveform of " + std::to_string(n) + " samples is shorter than one hop");
  const auto& fft = RealFft::Get(p.n_fft);
  const auto win = MakeWindow(p.window, p.n_fft);
  const int F = p.num_bins(), Tn = p.NumFrames(n);
  std::vector<std::complex<double>> z(static_cast<std::size_t>(F) * Tn);
  std::vector<T> mag(z.size());
  std::vector<double> frame(p.n_fft);
  std::vector<std::complex<double>> spec(F);
  for (int t = 0; t < Tn; ++t) {
    for (int k = 0; k < p.n_fft; ++k)
      frame[k] = win[k] * static_cast<double>(x[ReflectIndex(static_cast<long>(t) * p.hop + k, p.pad(), n)]);
    fft.Forward(frame.data(), spec.data());
    for (int f = 0; f < F; ++f) {
      z[static_cast<std::size_t>(f) * Tn + t] = spec[f];
      mag[static_cast<std::size_t>(f) * Tn + t] = static_cast<T>(std::abs(spec[f]));
    }
  }
  return MakeResult<T>({F, Tn}, std::move(mag), {x}, "stft_magnitude",
                       [p, z = std::move(z), F, Tn, n](Node<T>& self) {
                         const auto& fft = RealFft::Get(p.n_fft);
                         const auto win = MakeWindow(p.window, p.n_fft);
                         auto& gx = self.parents[0]->grad_buffer();
                         std::vector<std::complex<double>> e(F);
                         std::vector<double> du(p.n_fft);
                         const bool even = p.n_fft % 2 == 0;
                         for (int t = 0; t < Tn; ++t) {
                           // dL/du_n = Re sum_f g_f (Z_f/|Z_f|) exp(+i 2 pi f n / N), as a c2r.
                           for (int f = 0; f < F; ++f) {
                             const auto zf = z[static_cast<std::size_t>(f) * Tn + t];
                             const double a = std::abs(zf);
                             const double g = static_cast<double>(self.grad[static_cast<std::size_t>(f) * Tn + t]);
                             e[f] = a > 0 ? g * zf / a : std::complex<double>(0.0);
                             const bool edge = f == 0 || (even && f == F - 1);
                             if (!edge) e[f] *= 0.5;
                           }
                           fft.Inverse(e.data(), du.data());
                           for (int k = 0; k < p.n_fft; ++k)
                             gx[ReflectIndex(static_cast<long>(t) * p.hop + k, p.pad(), n)] +=
                                 static_cast<T>(win[k] * du[k]);
                         }
                       });
}

/// Overlap-add resynthesis of magnitude[F,T] with a fixed phase grid
/// (row-major F x T), cropped to `length` samples. Linear in magnitude.
template <typename T>
Tensor<T> IstftFromMagnitude(const Tensor<T>& magnitude, const std::vector<double>& phase,
                             const FrameParams& p, std::size_t length) {
  RequireRank(magnitude, 2, "istft");
  CheckFrameParams(p);
  const int F = magnitude.dim(0), Tn = magnitude.dim(1);
  if (F != p.num_bins() || phase.size() != magnitude.numel())
    throw ShapeError("istft: magnitude " + ShapeString(magnitude.shape()) +
                     " inconsistent with phase grid or n_fft " + std::to_string(p.n_fft));
  if (p.NumFrames(length) != Tn)
    throw DspError("istft: " + std::to_string(Tn) + " frames cannot produce " + std::to_string(length) +
                   " samples");
  const auto& fft = RealFft::Get(p.n_fft);
  const auto win = MakeWindow(p.window, p.n_fft);
  const auto norm = detail::OverlapNorm(p, Tn, win);
  for (std::size_t i = 0; i < length; ++i)
    if (norm[i + p.pad()] < detail::kMinOverlapNorm)
      throw DspError("istft: zero overlap-add normalization at sample " + std::to_string(i));
  std::vector<double> acc(norm.size(), 0.0), frame(p.n_fft);
  std::vector<std::complex<double>> spec(F);
  for (int t = 0; t < Tn; ++t) {
    for (int f = 0; f < F; ++f) {
      const std::size_t i = static_cast<std::size_t>(f) * Tn + t;
      spec[f] = std::polar(static_cast<double>(magnitude[i]), phase[i]);
    }
    fft.Inverse(spec.data(), frame.data());
    for (int k = 0; k < p.n_fft; ++k)
      acc[static_cast<std::size_t>(t) * p.hop + k] += win[k] * frame[k] / p.n_fft;
  }
  std::vector<T> out(length);
  for (std::size_t i = 0; i < length; ++i) out[i] = static_cast<T>(acc[i + p.pad()] / norm[i + p.pad()]);
  const int len = static_cast<int>(length);
  return MakeResult<T>({len}, std::move(out), {magnitude}, "istft",
                       [p, phase, norm, F, Tn, length](Node<T>& self) {
                         const auto& fft = RealFft::Get(p.n_fft);
                         const auto win = MakeWindow(p.window, p.n_fft);
                         auto& gm = self.parents[0]->grad_buffer();
                         std::vector<double> gpad(norm.size(), 0.0), v(p.n_fft);
                         for (std::size_t i = 0; i < length; ++i)
                           gpad[i + p.pad()] = static_cast<double>(self.grad[i]) / norm[i + p.pad()];
                         std::vector<std::complex<double>> V(F);
                         const bool even = p.n_fft % 2 == 0;
                         for (int t = 0; t < Tn; ++t) {
                           for (int k = 0; k < p.n_fft; ++k)
                             v[k] = win[k] * gpad[static_cast<std::size_t>(t) * p.hop + k];
                           fft.Forward(v.data(), V.data());
                           for (int f = 0; f < F; ++f) {
                             const std::size_t i = static_cast<std::size_t>(f) * Tn + t;
                             const double c = (f == 0 || (even && f == F - 1)) ? 1.0 : 2.0;
                             const double d = std::real(std::polar(1.0, phase[i]) * std::conj(V[f]));
                             gm[i] += static_cast<T>(c * d / p.n_fft);
                           }
                         }
                       });
}

/// Differentiable LowbandLogMag over a waveform tensor; shape [low_bins, frames].
template <typename T>
Tensor<T> LowbandLogMagTensor(const Tensor<T>& x, const FeatureGeometry& geo, int sample_rate) {
  Tensor<T> mag = StftMagnitude(x, geo.frame);
  const int low = std::min(geo.NumLowBins(sample_rate), mag.dim(0));
  Tensor<T> lm = Log(Slice(mag, 0, 0, low));
  return IndexSelect(lm, 1, NormalizedFrameIndices(lm.dim(1), geo.frames));
}

}  // namespace dkd
