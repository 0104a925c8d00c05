// dkdssd/wav.hpp

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

// RIFF/WAVE PCM16 mono reader and writer. Only 16 kHz input is accepted.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dkdssd/dsp.hpp"

namespace dkd {

inline constexpr int kRequiredSampleRate = 16000;

class WavError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline void PutLe(std::ostream& os, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint32_t GetLe(const unsigned char* p, int bytes) {
  std::uint32_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}
}  // namespace detail

/// Samples are clipped to [-1, 1) and rounded to 16 bits.
inline void WriteWav(const std::string& path, const Waveform& w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw WavError("cannot open " + path + " for writing");
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.size() * 2);
  os.write("RIFF", 4);
  detail::PutLe(os, 36 + data_bytes, 4);
  os.write("WAVEfmt ", 8);
  detail::PutLe(os, 16, 4);
  detail::PutLe(os, 1, 2);  // PCM
  detail::PutLe(os, 1, 2);  // mono
  detail::PutLe(os, static_cast<std::uint32_t>(w.sample_rate), 4);
  detail::PutLe(os, static_cast<std::uint32_t>(w.sample_rate * 2), 4);
  detail::PutLe(os, 2, 2);
  detail::PutLe(os, 16, 2);
  os.write("data", 4);
  detail::PutLe(os, data_bytes, 4);
  for (double s : w.samples) {
    const double c = std::clamp(s, -1.0, 32767.0 / 32768.0);
    const auto q = static_cast<std::int16_t>(std::lround(c * 32768.0));
    detail::PutLe(os, static_cast<std::uint16_t>(q), 2);
  }
  if (!os) throw WavError("write failed: " + path);
}

inline Waveform ReadWav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw WavError("cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) || std::memcmp(buf.data() + 8, "WAVE", 4))
    throw WavError(path + ": not a RIFF/WAVE file");
  std::size_t pos = 12;
  int channels = 0, rate = 0, bits = 0, format = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  while (pos + 8 <= buf.size()) {
    const std::string id(reinterpret_cast<const char*>(buf.data() + pos), 4);
    const std::size_t len = detail::GetLe(buf.data() + pos + 4, 4);
    const std::size_t body = pos + 8;
    if (body + len > buf.size()) throw WavError(path + ": truncated chunk '" + id + "'");
    if (id == "fmt ") {
      if (len < 16) throw WavError(path + ": short fmt chunk");
      format = static_cast<int>(detail::GetLe(buf.data() + body, 2));
      channels = static_cast<int>(detail::GetLe(buf.data() + body + 2, 2));
      rate = static_cast<int>(detail::GetLe(buf.data() + body + 4, 4));
      bits = static_cast<int>(detail::GetLe(buf.data() + body + 14, 2));
    } else if (id == "data") {
      data = buf.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1);
  }
  if (!data) throw WavError(path + ": no data chunk");
  if (format != 1 || bits != 16) throw WavError(path + ": only PCM 16-bit is supported");
  if (channels != 1) throw WavError(path + ": expected mono, got " + std::to_string(channels) + " channels");
  if (rate != kRequiredSampleRate)
    throw WavError(path + ": sample rate " + std::to_string(rate) + " Hz, expected 16000 (no resampling)");
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(data_len / 2);
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = static_cast<std::int16_t>(detail::GetLe(data + 2 * i, 2)) / 32768.0;
  return w;
}

}  // namespace dkd
