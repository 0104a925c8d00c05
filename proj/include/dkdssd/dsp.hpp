// dkdssd/dsp.hpp

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

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dkdssd/fft.hpp"
#include "dkdssd/ops.hpp"

namespace dkd {

class DspError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
  double seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

enum class WindowKind { kHann, kBlackman, kRectangular };

inline std::string WindowName(WindowKind k) {
  switch (k) {
    case WindowKind::kHann: return "hann";
    case WindowKind::kBlackman: return "blackman";
    case WindowKind::kRectangular: return "rectangular";
  }
  return "?";
}

inline WindowKind ParseWindow(const std::string& s) {
  if (s == "hann") return WindowKind::kHann;
  if (s == "blackman") return WindowKind::kBlackman;
  if (s == "rectangular" || s == "rect") return WindowKind::kRectangular;
  throw DspError("unknown window kind '" + s + "'");
}

struct FrameParams {
  int n_fft = 320;
  int hop = 160;
  WindowKind window = WindowKind::kHann;

  int num_bins() const { return n_fft / 2 + 1; }
  int pad() const { return n_fft / 2; }
  int NumFrames(std::size_t length) const {
    return 1 + static_cast<int>((length + 2 * pad() - n_fft) / hop);
  }
  bool operator==(const FrameParams&) const = default;
};

/// Periodic (DFT-even) analysis window.
inline std::vector<double> MakeWindow(WindowKind kind, int n) {
  std::vector<double> w(n, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  for (int i = 0; i < n; ++i) {
    const double x = two_pi * i / n;
    switch (kind) {
      case WindowKind::kHann: w[i] = 0.5 - 0.5 * std::cos(x); break;
      case WindowKind::kBlackman: w[i] = 0.42 - 0.5 * std::cos(x) + 0.08 * std::cos(2 * x); break;
      case WindowKind::kRectangular: break;
    }
  }
  if (kind == WindowKind::kBlackman) w[0] = 0.0;  // formula leaves ~1e-17
  return w;
}

/// Maps a padded-signal index to the source sample under reflect padding
/// ("reflect" excludes the edge sample; repeats for pads longer than N).
inline std::size_t ReflectIndex(long p, long pad, long n) {
  long i = p - pad;
  if (n == 1) return 0;
  const long period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < n ? i : period - i);
}

inline void CheckFrameParams(const FrameParams& p) {
  if (p.hop <= 0 || p.n_fft < p.hop)
    throw DspError("frame params require n_fft >= hop > 0 (n_fft=" + std::to_string(p.n_fft) +
                   ", hop=" + std::to_string(p.hop) + ")");
}

/// F x T grid of complex bins, row-major by frequency.
struct ComplexSpectrogram {
  FrameParams params;
  int num_bins = 0;
  int num_frames = 0;
  std::size_t signal_length = 0;
  int sample_rate = 16000;
  std::vector<std::complex<double>> bins;

  std::complex<double>& at(int f, int t) { return bins[static_cast<std::size_t>(f) * num_frames + t]; }
  const std::complex<double>& at(int f, int t) const {
    return bins[static_cast<std::size_t>(f) * num_frames + t];
  }
  std::vector<double> Magnitude() const {
    std::vector<double> m(bins.size());
    for (std::size_t i = 0; i < bins.size(); ++i) m[i] = std::abs(bins[i]);
    return m;
  }
  std::vector<double> Phase() const {
    std::vector<double> m(bins.size());
    for (std::size_t i = 0; i < bins.size(); ++i) m[i] = std::arg(bins[i]);
    return m;
  }
};

/// Short-time Fourier transform with centered frames and reflect padding:
/// frame t covers padded samples [t*hop, t*hop + n_fft).
inline ComplexSpectrogram Stft(const Waveform& w, const FrameParams& p) {
  CheckFrameParams(p);
  if (w.size() < static_cast<std::size_t>(p.hop) || w.size() < 2)
    throw DspError("waveform of " + std::to_string(w.size()) + " samples is shorter than one hop (" +
                   std::to_string(p.hop) + ")");
  const auto& fft = RealFft::Get(p.n_fft);
  const auto win = MakeWindow(p.window, p.n_fft);
  ComplexSpectrogram s;
  s.params = p;
  s.num_bins = p.num_bins();
  s.num_frames = p.NumFrames(w.size());
  s.signal_length = w.size();
  s.sample_rate = w.sample_rate;
  s.bins.resize(static_cast<std::size_t>(s.num_bins) * s.num_frames);
  std::vector<double> frame(p.n_fft);
  std::vector<std::complex<double>> spec(s.num_bins);
  const long n = static_cast<long>(w.size());
  for (int t = 0; t < s.num_frames; ++t) {
    for (int k = 0; k < p.n_fft; ++k)
      frame[k] = win[k] * w.samples[ReflectIndex(static_cast<long>(t) * p.hop + k, p.pad(), n)];
    fft.Forward(frame.data(), spec.data());
    for (int f = 0; f < s.num_bins; ++f) s.at(f, t) = spec[f];
  }
  return s;
}

namespace detail {
// Sum over frames of the squared window at each padded position.
inline std::vector<double> OverlapNorm(const FrameParams& p, int num_frames, const std::vector<double>& win) {
  std::vector<double> norm(static_cast<std::size_t>(num_frames - 1) * p.hop + p.n_fft, 0.0);
  for (int t = 0; t < num_frames; ++t)
    for (int k = 0; k < p.n_fft; ++k) norm[static_cast<std::size_t>(t) * p.hop + k] += win[k] * win[k];
  return norm;
}
inline constexpr double kMinOverlapNorm = 1e-10;
}  // namespace detail

/// Weighted overlap-add inverse with window-squared normalization.
inline Waveform Istft(const ComplexSpectrogram& s) {
  const FrameParams& p = s.params;
  CheckFrameParams(p);
  if (s.num_bins != p.num_bins() || s.bins.size() != static_cast<std::size_t>(s.num_bins) * s.num_frames)
    throw DspError("spectrogram grid inconsistent with its frame parameters");
  const auto& fft = RealFft::Get(p.n_fft);
  const auto win = MakeWindow(p.window, p.n_fft);
  const auto norm = detail::OverlapNorm(p, s.num_frames, win);
  std::vector<double> acc(norm.size(), 0.0), frame(p.n_fft);
  std::vector<std::complex<double>> spec(s.num_bins);
  for (int t = 0; t < s.num_frames; ++t) {
    for (int f = 0; f < s.num_bins; ++f) spec[f] = s.at(f, t);
    fft.Inverse(spec.data(), frame.data());
    for (int k = 0; k < p.n_fft; ++k)
      acc[static_cast<std::size_t>(t) * p.hop + k] += win[k] * frame[k] / p.n_fft;
  }
  Waveform out;
  out.sample_rate = s.sample_rate;
  out.samples.resize(s.signal_length);
  for (std::size_t i = 0; i < s.signal_length; ++i) {
    const std::size_t q = i + p.pad();
    if (q >= norm.size() || norm[q] < detail::kMinOverlapNorm)
      throw DspError("istft: zero overlap-add normalization at sample " + std::to_string(i) +
                     " (window/hop combination cannot be inverted)");
    out.samples[i] = acc[q] / norm[q];
  }
  return out;
}

inline double Power(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}
inline double Rms(std::span<const double> x) { return std::sqrt(Power(x)); }

struct MixResult {
  Waveform mixed;
  double gain = 0;
  std::size_t offset = 0;
};

/// Mixes clean + g * noise[offset ...] (noise looped) with g chosen so that
/// 10 log10(P_clean / P_scaled_noise) == snr_db. The clean part is untouched.
inline MixResult MixAtSnrWithOffset(const Waveform& clean, const Waveform& noise, double snr_db,
                                    std::size_t offset) {
  if (noise.samples.empty()) throw DspError("mix: empty noise");
  const double p_clean = Power(clean.samples);
  if (!(p_clean > 0)) throw DspError("mix: clean signal has zero power");
  const std::size_t n = clean.size(), m = noise.size();
  std::vector<double> seg(n);
  for (std::size_t i = 0; i < n; ++i) seg[i] = noise.samples[(offset + i) % m];
  const double rms_seg = Rms(seg);
  if (!(rms_seg > 0)) throw DspError("mix: zero-power noise segment at offset " + std::to_string(offset));
  MixResult r;
  r.offset = offset % m;
  r.gain = std::sqrt(p_clean) / (rms_seg * std::pow(10.0, snr_db / 20.0));
  r.mixed.sample_rate = clean.sample_rate;
  r.mixed.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.mixed.samples[i] = clean.samples[i] + r.gain * seg[i];
  return r;
}

/// As MixAtSnrWithOffset with a uniformly drawn offset; zero-power segments
/// are redrawn up to `max_retries` times.
template <typename Rng>
MixResult MixAtSnr(const Waveform& clean, const Waveform& noise, double snr_db, Rng& rng,
                   int max_retries = 16) {
  if (noise.samples.empty()) throw DspError("mix: empty noise");
  std::uniform_int_distribution<std::size_t> pick(0, noise.size() - 1);
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    const std::size_t off = pick(rng);
    double e = 0;
    for (std::size_t i = 0; i < clean.size(); ++i) e += std::abs(noise.samples[(off + i) % noise.size()]);
    if (e > 0) return MixAtSnrWithOffset(clean, noise, snr_db, off);
  }
  throw DspError("mix: no nonzero-power noise segment after " + std::to_string(max_retries) + " retries");
}

/// Achieved SNR of mixed = clean + noise_part, in dB.
inline double MeasureSnrDb(const Waveform& clean, const Waveform& mixed) {
  std::vector<double> n(clean.size());
  for (std::size_t i = 0; i < n.size(); ++i) n[i] = mixed.samples[i] - clean.samples[i];
  return 10.0 * std::log10(Power(clean.samples) / Power(n));
}

/// Real F x T grid, row-major by frequency.
struct Grid {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

/// Frame index map for truncation / repeat-splicing to `target` frames.
inline std::vector<int> NormalizedFrameIndices(int num_frames, int target) {
  if (num_frames < 1) throw DspError("normalize_frames: grid has no frames");
  std::vector<int> idx(target);
  for (int i = 0; i < target; ++i) idx[i] = i % num_frames;
  return idx;
}

/// First `target` frames if long enough, else repeat-concatenate then truncate.
inline Grid NormalizeFrames(const Grid& g, int target = 600) {
  const auto idx = NormalizedFrameIndices(g.cols, target);
  Grid out{g.rows, target, std::vector<double>(static_cast<std::size_t>(g.rows) * target)};
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < target; ++c) out.at(r, c) = g.at(r, idx[c]);
  return out;
}

/// Classifier-path feature geometry.
struct FeatureGeometry {
  FrameParams frame{1728, 130, WindowKind::kBlackman};
  double max_hz = 4000.0;
  int frames = 600;

  /// Bins 0..k inclusive where k*fs/n_fft <= max_hz.
  int NumLowBins(int sample_rate) const {
    return static_cast<int>(std::floor(max_hz * frame.n_fft / sample_rate + 1e-9)) + 1;
  }
  bool operator==(const FeatureGeometry&) const = default;
};

/// log(max(|STFT|, eps)) restricted to 0..max_hz and normalized in time.
inline Grid LowbandLogMag(const Waveform& w, const FeatureGeometry& geo = {}) {
  const auto s = Stft(w, geo.frame);
  const int low = std::min(geo.NumLowBins(w.sample_rate), s.num_bins);
  Grid g{low, s.num_frames, std::vector<double>(static_cast<std::size_t>(low) * s.num_frames)};
  for (int f = 0; f < low; ++f)
    for (int t = 0; t < s.num_frames; ++t) g.at(f, t) = std::log(std::max(std::abs(s.at(f, t)), kLogEpsilon));
  return NormalizeFrames(g, geo.frames);
}

/// Fraction of signal energy in [lo_hz, hi_hz] measured on one full-length DFT.
inline double BandEnergyFraction(const Waveform& w, double lo_hz, double hi_hz) {
  const int n = static_cast<int>(w.size());
  const auto& fft = RealFft::Get(n);
  std::vector<std::complex<double>> spec(fft.num_bins());
  fft.Forward(w.samples.data(), spec.data());
  double band = 0, total = 0;
  for (int f = 0; f < fft.num_bins(); ++f) {
    const double hz = static_cast<double>(f) * w.sample_rate / n;
    const double e = std::norm(spec[f]);
    total += e;
    if (hz >= lo_hz && hz <= hi_hz) band += e;
  }
  return total > 0 ? band / total : 0.0;
}

}  // namespace dkd
