// dkdssd/fusion.hpp

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

// Feature stem and interactive fusion of enhanced/noisy feature maps.

#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dkdssd/conv.hpp"
#include "dkdssd/nn.hpp"

namespace dkd {

inline constexpr int kStemChannels = 16;

/// 7x7 conv (1 -> 16, pad 3) then 2x2/2 max pool over a log-magnitude grid.
template <typename T>
struct Stem {
  Conv2dLayer<T> conv;

  Stem() = default;
  Stem(ParamStore<T>& ps, const std::string& name, int channels = kStemChannels)
      : conv(ps, name + ".conv", 1, channels, {7, 7}, {1, 1}, {3, 3}) {}

  Tensor<T> operator()(const Tensor<T>& logmag) const {
    RequireRank(logmag, 2, "stem");
    const Tensor<T> x = Reshape(logmag, {1, logmag.dim(0), logmag.dim(1)});
    return Pool2d(conv(x), {2, 2}, {2, 2}, PoolMode::kMax);
  }
};

/// (1 - M) * a + M * b with M[1,H,W] broadcast over the channels of a, b.
template <typename T>
Tensor<T> BlendWithMask(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& mask) {
  RequireSameShape(a, b, "blend");
  const Tensor<T> m = BroadcastTo(mask, a.shape());
  return Add(Mul(RSub(T(1), m), a), Mul(m, b));
}

template <typename T>
struct FusionState {
  Tensor<T> x_concat, x_fusion, w;
  Tensor<T> x_e_tilde, x_n_tilde;
  Tensor<T> mask;  // [1, H, W]
  Tensor<T> x_inter;
};

template <typename T>
class InteractiveFusion {
 public:
  InteractiveFusion() = default;
  InteractiveFusion(ParamStore<T>& ps, const std::string& prefix, int channels = kStemChannels)
      : channels_(channels) {
    conv1_ = Conv2dLayer<T>(ps, prefix + ".conv1", 2 * channels, channels, {3, 3}, {1, 1}, {1, 1});
    conv2_ = Conv2dLayer<T>(ps, prefix + ".conv2", 2 * channels, channels, {3, 3}, {1, 1}, {1, 1});
    // Zero init puts the untrained mask at exactly 0.5.
    mask_conv_ = Conv2dLayer<T>(ps, prefix + ".mask_conv", 2, 1, {7, 7}, {1, 1}, {3, 3}, Init::kZeros);
  }

  /// Channel interaction: returns state with x_concat, x_fusion, w, x_e_tilde, x_n_tilde set.
  FusionState<T> ChannelInteract(const Tensor<T>& x_e, const Tensor<T>& x_n) const {
    RequireRank(x_e, 3, "fusion");
    RequireSameShape(x_e, x_n, "fusion");
    if (x_e.dim(0) != channels_)
      throw ShapeError("fusion: expected " + std::to_string(channels_) + " channels, got " +
                       ShapeString(x_e.shape()));
    FusionState<T> s;
    s.x_concat = Concat<T>({x_e, x_n}, 0);
    s.x_fusion = conv1_(s.x_concat);
    s.w = Sigmoid(conv2_(s.x_concat));
    s.x_e_tilde = Add(s.x_fusion, Mul(s.w, x_e));
    s.x_n_tilde = Add(s.x_fusion, Mul(s.w, x_n));
    return s;
  }

  /// Spatial mask from the channel-pooled noisy map; fills mask and x_inter.
  void SpatialFuse(FusionState<T>& s) const {
    s.mask = SpatialMask(s.x_n_tilde);
    s.x_inter = BlendWithMask(s.x_e_tilde, s.x_n_tilde, s.mask);
  }

  Tensor<T> SpatialMask(const Tensor<T>& x_n_tilde) const {
    const Tensor<T> pooled =
        Concat<T>({ChannelPool(x_n_tilde, PoolMode::kMax), ChannelPool(x_n_tilde, PoolMode::kAvg)}, 0);
    return Sigmoid(mask_conv_(pooled));
  }

  FusionState<T> operator()(const Tensor<T>& x_e, const Tensor<T>& x_n) const {
    FusionState<T> s = ChannelInteract(x_e, x_n);
    SpatialFuse(s);
    return s;
  }

  const Conv2dLayer<T>& conv1() const { return conv1_; }
  const Conv2dLayer<T>& conv2() const { return conv2_; }
  const Conv2dLayer<T>& mask_conv() const { return mask_conv_; }

 private:
  int channels_ = kStemChannels;
  Conv2dLayer<T> conv1_, conv2_, mask_conv_;
};

struct MaskStats {
  std::string utt_id;
  double max = 0, min = 0, mean = 0, median = 0;
};

inline MaskStats ComputeMaskStats(std::string utt_id, std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("mask statistics: empty mask");
  MaskStats s;
  s.utt_id = std::move(utt_id);
  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / values.size();
  const std::size_t n = values.size();
  s.median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  return s;
}

/// Equal-width histogram over [0, 1]; a value of exactly 1 lands in the last bin.
struct MaskHistogram {
  std::vector<std::size_t> counts;
  double sum = 0;
  std::size_t total = 0;

  explicit MaskHistogram(int bins = 20) : counts(bins, 0) {}
  void Add(const std::vector<double>& values) {
    const int bins = static_cast<int>(counts.size());
    for (double v : values) {
      const int b = std::clamp(static_cast<int>(std::floor(v * bins)), 0, bins - 1);
      ++counts[b];
      sum += v;
      ++total;
    }
  }
  double mean() const { return total ? sum / total : 0.0; }
};

/// Per-utterance rows, then the pooled histogram.
inline void WriteMaskReport(std::ostream& os, const std::vector<MaskStats>& rows, const MaskHistogram& hist) {
  os << "utt_id\tmax\tmin\tmean\tmedian\n";
  for (const auto& r : rows) os << r.utt_id << '\t' << r.max << '\t' << r.min << '\t' << r.mean << '\t' << r.median << '\n';
  os << "\n# pooled histogram: bin_lo\tbin_hi\tcount (cells " << hist.total << ", mean " << hist.mean() << ")\n";
  const int bins = static_cast<int>(hist.counts.size());
  for (int b = 0; b < bins; ++b)
    os << static_cast<double>(b) / bins << '\t' << static_cast<double>(b + 1) / bins << '\t' << hist.counts[b] << '\n';
}

}  // namespace dkd
