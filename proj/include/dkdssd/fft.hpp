// dkdssd/fft.hpp

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

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace dkd {

/// Real-input DFT of fixed length backed by cached FFTW plans.
/// Execution is thread-safe; only planning is serialized.
class RealFft {
 public:
  using Complex = std::complex<double>;

  int size() const { return n_; }
  int num_bins() const { return n_ / 2 + 1; }

  /// out[f] = sum_n in[n] exp(-2 pi i f n / N), f in [0, N/2].
  void Forward(const double* in, Complex* out) const {
    fftw_execute_dft_r2c(r2c_, const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
  }

  /// Unnormalized inverse of a Hermitian half-spectrum: out[n] = sum over the
  /// full Hermitian extension of in[f] exp(+2 pi i f n / N). The imaginary
  /// parts of the DC and Nyquist bins are ignored.
  void Inverse(const Complex* in, double* out) const {
    std::vector<Complex> scratch(in, in + num_bins());  // c2r clobbers its input
    fftw_execute_dft_c2r(c2r_, reinterpret_cast<fftw_complex*>(scratch.data()), out);
  }

  /// Returns the shared transform for length n, planning it on first use.
  static const RealFft& Get(int n) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<RealFft>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[n];
    if (!slot) slot.reset(new RealFft(n));
    return *slot;
  }

  ~RealFft() {
    fftw_destroy_plan(r2c_);
    fftw_destroy_plan(c2r_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

 private:
  explicit RealFft(int n) : n_(n) {
    if (n < 1) throw std::invalid_argument("fft length must be positive");
    std::vector<double> r(n);
    std::vector<Complex> c(n / 2 + 1);
    auto* cp = reinterpret_cast<fftw_complex*>(c.data());
    r2c_ = fftw_plan_dft_r2c_1d(n, r.data(), cp, FFTW_ESTIMATE | FFTW_UNALIGNED);
    c2r_ = fftw_plan_dft_c2r_1d(n, cp, r.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!r2c_ || !c2r_) throw std::runtime_error("fftw planning failed");
  }

  int n_;
  fftw_plan r2c_ = nullptr;
  fftw_plan c2r_ = nullptr;
};

}  // namespace dkd
