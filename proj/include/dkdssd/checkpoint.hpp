// dkdssd/checkpoint.hpp

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

// Parameter checkpoint file, little-endian:
//   "DKDT" | u32 version | u32 count |
//   count x ( u32 name_len | name bytes (UTF-8) | u32 rank | rank x u32 dim |
//             prod(dims) x f32 )

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dkdssd/nn.hpp"

namespace dkd {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[4] = {'D', 'K', 'D', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointEntry {
  Shape shape;
  std::vector<float> values;
};

using Checkpoint = std::map<std::string, CheckpointEntry>;

namespace detail {
inline void PutU32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
inline std::uint32_t GetU32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) throw CheckpointError("checkpoint truncated");
  return v;
}
}  // namespace detail

/// Entries are written in the given order.
inline void WriteCheckpoint(const std::string& path, const std::vector<std::pair<std::string, CheckpointEntry>>& entries) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot open " + path + " for writing");
  os.write(kCheckpointMagic, 4);
  detail::PutU32(os, kCheckpointVersion);
  detail::PutU32(os, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, e] : entries) {
    detail::PutU32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::PutU32(os, static_cast<std::uint32_t>(e.shape.size()));
    for (int d : e.shape) detail::PutU32(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(e.values.data()), static_cast<std::streamsize>(e.values.size() * 4));
  }
  if (!os) throw CheckpointError("write failed: " + path);
}

inline Checkpoint ReadCheckpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw CheckpointError(path + ": bad magic, not a DKDT checkpoint");
  const auto version = detail::GetU32(is);
  if (version != kCheckpointVersion) throw CheckpointError(path + ": unsupported version " + std::to_string(version));
  const auto count = detail::GetU32(is);
  Checkpoint ck;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = detail::GetU32(is);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw CheckpointError("checkpoint truncated in name");
    CheckpointEntry e;
    const auto rank = detail::GetU32(is);
    for (std::uint32_t r = 0; r < rank; ++r) e.shape.push_back(static_cast<int>(detail::GetU32(is)));
    e.values.resize(NumElements(e.shape));
    if (!is.read(reinterpret_cast<char*>(e.values.data()), static_cast<std::streamsize>(e.values.size() * 4)))
      throw CheckpointError("checkpoint truncated in tensor " + name);
    ck.emplace(std::move(name), std::move(e));
  }
  return ck;
}

template <typename T>
void SaveParams(const std::string& path, const ParamStore<T>& ps) {
  std::vector<std::pair<std::string, CheckpointEntry>> entries;
  for (const auto& [name, t] : ps.items()) {
    CheckpointEntry e{t.shape(), {}};
    e.values.reserve(t.numel());
    for (T v : t.data()) e.values.push_back(static_cast<float>(v));
    entries.emplace_back(name, std::move(e));
  }
  WriteCheckpoint(path, entries);
}

/// Copies matching entries into the store. Every store parameter whose name
/// passes `wanted` must be present with an identical shape.
template <typename T, typename Pred>
void LoadParams(const Checkpoint& ck, ParamStore<T>& ps, Pred wanted) {
  for (auto& [name, t] : ps.items()) {
    if (!wanted(name)) continue;
    auto it = ck.find(name);
    if (it == ck.end()) throw CheckpointError("checkpoint lacks parameter " + name);
    if (it->second.shape != t.shape())
      throw CheckpointError("shape mismatch for " + name + ": checkpoint " + ShapeString(it->second.shape) +
                            " vs model " + ShapeString(t.shape()));
    auto dst = Tensor<T>(t).mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(it->second.values[i]);
  }
}

template <typename T>
void LoadParams(const Checkpoint& ck, ParamStore<T>& ps) {
  LoadParams(ck, ps, [](const std::string&) { return true; });
}

}  // namespace dkd
