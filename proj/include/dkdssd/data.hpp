// dkdssd/data.hpp

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

// Manifests, noise catalogs, noisy-split simulation and the toy corpus.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dkdssd/classifier.hpp"
#include "dkdssd/dsp.hpp"
#include "dkdssd/rng.hpp"
#include "dkdssd/wav.hpp"

namespace dkd {

namespace fs = std::filesystem;

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kManifestHeader = "utt_id\tpath\tlabel\tsplit\tnoise_id\tsnr_db\toffset";
inline constexpr double kEvalSnrGrid[] = {0, 5, 10, 15, 20};
inline constexpr double kTrainSnrLo = 0, kTrainSnrHi = 20;

struct ManifestEntry {
  std::string utt_id;
  std::string path;
  int label = kBonafide;
  std::string split;
  // Frozen noise triple; empty noise_id means none (clean or drawn per epoch).
  std::string noise_id;
  double snr_db = std::numeric_limits<double>::quiet_NaN();
  long offset = -1;

  bool frozen() const { return !noise_id.empty(); }
  bool operator==(const ManifestEntry& o) const {
    auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
    return utt_id == o.utt_id && path == o.path && label == o.label && split == o.split && noise_id == o.noise_id &&
           same(snr_db, o.snr_db) && offset == o.offset;
  }
};

inline std::string LabelName(int label) { return label == kBonafide ? "bonafide" : "spoof"; }
inline int ParseLabel(const std::string& s) {
  if (s == "bonafide") return kBonafide;
  if (s == "spoof") return kSpoof;
  throw DataError("unknown label '" + s + "'");
}

inline void WriteManifest(const std::string& path, const std::vector<ManifestEntry>& rows) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write manifest " + path);
  os << kManifestHeader << '\n' << std::setprecision(17);
  for (const auto& e : rows) {
    os << e.utt_id << '\t' << e.path << '\t' << LabelName(e.label) << '\t' << e.split << '\t'
       << (e.frozen() ? e.noise_id : "-") << '\t';
    if (e.frozen())
      os << e.snr_db << '\t' << e.offset;
    else
      os << "-\t-";
    os << '\n';
  }
  if (!os) throw DataError("write failed: " + path);
}

inline std::vector<ManifestEntry> ReadManifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest " + path);
  std::string line;
  if (!std::getline(is, line) || line != kManifestHeader)
    throw DataError(path + ": missing header '" + std::string(kManifestHeader) + "'");
  std::vector<ManifestEntry> rows;
  std::map<std::string, int> seen;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, '\t');) f.push_back(c);
    if (f.size() != 7) throw DataError(path + ":" + std::to_string(lineno) + ": expected 7 fields");
    ManifestEntry e;
    e.utt_id = f[0];
    e.path = f[1];
    e.label = ParseLabel(f[2]);
    e.split = f[3];
    if (f[4] != "-") {
      e.noise_id = f[4];
      try {
        e.snr_db = std::stod(f[5]);
        e.offset = std::stol(f[6]);
      } catch (const std::exception&) {
        throw DataError(path + ":" + std::to_string(lineno) + ": bad snr/offset");
      }
    }
    if (!seen.emplace(e.utt_id, lineno).second) throw DataError(path + ": duplicate utt_id " + e.utt_id);
    rows.push_back(std::move(e));
  }
  return rows;
}

/// Relative manifest paths resolve against the manifest's directory.
inline std::string ResolvePath(const std::string& manifest_path, const std::string& p) {
  const fs::path q(p);
  if (q.is_absolute()) return p;
  return (fs::path(manifest_path).parent_path() / q).string();
}

inline std::vector<ManifestEntry> FilterSplit(const std::vector<ManifestEntry>& rows, const std::string& split) {
  std::vector<ManifestEntry> out;
  for (const auto& e : rows)
    if (e.split == split) out.push_back(e);
  return out;
}

// ---------------------------------------------------------------- noise

/// Noise files under <dir>/seen/*.wav and <dir>/unseen/*.wav; ids are
/// "seen/<stem>" and "unseen/<stem>".
struct NoiseCatalog {
  std::map<std::string, Waveform> waves;
  std::vector<std::string> seen, unseen;

  const Waveform& Get(const std::string& id) const {
    auto it = waves.find(id);
    if (it == waves.end()) throw DataError("unknown noise id " + id);
    return it->second;
  }
};

inline NoiseCatalog LoadNoiseCatalog(const std::string& dir) {
  NoiseCatalog cat;
  for (const char* part : {"seen", "unseen"}) {
    const fs::path sub = fs::path(dir) / part;
    if (!fs::is_directory(sub)) continue;
    std::vector<fs::path> files;
    for (const auto& de : fs::directory_iterator(sub))
      if (de.path().extension() == ".wav") files.push_back(de.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const std::string id = std::string(part) + "/" + f.stem().string();
      cat.waves.emplace(id, ReadWav(f.string()));
      (std::string(part) == "seen" ? cat.seen : cat.unseen).push_back(id);
    }
  }
  if (cat.waves.empty()) throw DataError("noise directory " + dir + " has no seen/*.wav or unseen/*.wav files");
  return cat;
}

/// Pink noise by Kellet's economy filter over white noise.
inline std::vector<double> PinkNoise(std::size_t n, Rng& rng) {
  std::normal_distribution<double> nd(0, 1);
  double b0 = 0, b1 = 0, b2 = 0;
  std::vector<double> out(n);
  for (auto& v : out) {
    const double w = nd(rng);
    b0 = 0.99765 * b0 + w * 0.0990460;
    b1 = 0.96300 * b1 + w * 0.2965164;
    b2 = 0.57000 * b2 + w * 1.0526913;
    v = b0 + b1 + b2 + w * 0.1848;
  }
  return out;
}

namespace detail {

inline void ScaleToRms(std::vector<double>& x, double target) {
  const double r = Rms(x);
  if (r > 0)
    for (auto& v : x) v *= target / r;
}

/// Harmonic "voice" with vibrato and a syllabic envelope; harmonics kept only
/// if `keep(k, f_max_k)` is true.
template <typename Keep>
std::vector<double> HarmonicVoice(std::size_t n, int sample_rate, double f0, double max_hz, Rng& rng, Keep keep) {
  std::uniform_real_distribution<double> u(0, 1);
  const double vib_depth = 0.005 + 0.015 * u(rng), vib_rate = 4 + 2 * u(rng), vib_phase = 2 * std::numbers::pi * u(rng);
  const double syl_rate = 2 + 3 * u(rng), syl_phase = std::numbers::pi * u(rng);
  const double f_top = f0 * (1 + vib_depth);
  std::vector<int> ks;
  std::vector<std::complex<double>> amp;
  for (int k = 1; k * f_top < max_hz; ++k) {
    if (!keep(k, k * f_top)) continue;
    ks.push_back(k);
    amp.push_back(std::polar((1.0 + 0.2 * (u(rng) - 0.5)) / std::sqrt(static_cast<double>(k)),
                             2 * std::numbers::pi * u(rng)));
  }
  std::vector<double> out(n, 0.0);
  double theta = 0;
  const double fade = 0.02 * sample_rate;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    theta += 2 * std::numbers::pi * f0 * (1 + vib_depth * std::sin(2 * std::numbers::pi * vib_rate * t + vib_phase)) / sample_rate;
    const std::complex<double> z = std::polar(1.0, theta);
    std::complex<double> zk = 1.0;
    int k_prev = 0;
    double s = 0;
    for (std::size_t j = 0; j < ks.size(); ++j) {
      for (; k_prev < ks[j]; ++k_prev) zk *= z;
      s += (amp[j] * zk).imag();
    }
    const double syl = std::sin(std::numbers::pi * syl_rate * t + syl_phase);
    double env = 0.6 + 0.4 * syl * syl;
    env *= std::min({1.0, i / fade, (n - 1 - i) / fade});
    out[i] = env * s;
  }
  return out;
}

}  // namespace detail

struct NoiseFileSpec {
  std::string id;
  std::vector<double> samples;
};

/// Six synthetic noises: seen = siren, hum, clicks; unseen = white, pink, babble.
inline std::vector<NoiseFileSpec> SynthesizeNoisePack(std::uint64_t seed, double seconds = 8.0, int sample_rate = 16000) {
  const std::size_t n = static_cast<std::size_t>(seconds * sample_rate);
  const double level = 0.1;
  std::vector<NoiseFileSpec> out;
  auto rng_for = [&](const char* name) { return Substream(seed, std::string("noise/") + name); };
  {
    // Siren: harmonic-rich sweep between 600 and 1600 Hz.
    auto rng = rng_for("siren");
    std::vector<double> x(n);
    double ph = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / sample_rate;
      const double f = 1100 + 500 * std::sin(2 * std::numbers::pi * 0.5 * t);
      ph += 2 * std::numbers::pi * f / sample_rate;
      double s = 0;
      for (int k = 1; k <= 6; ++k) s += std::sin(k * ph) / k;
      x[i] = s;
    }
    std::normal_distribution<double> nd(0, 0.02);
    for (auto& v : x) v += nd(rng);
    detail::ScaleToRms(x, level);
    out.push_back({"seen/siren", std::move(x)});
  }
  {
    // Machine hum: 50 Hz series with slow amplitude wobble.
    auto rng = rng_for("hum");
    std::uniform_real_distribution<double> u(0, 2 * std::numbers::pi);
    std::vector<double> phases(40);
    for (auto& p : phases) p = u(rng);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / sample_rate;
      double s = 0;
      for (int k = 1; k <= 40; ++k) s += std::sin(2 * std::numbers::pi * 50 * k * t + phases[k - 1]) / k;
      x[i] = s * (1 + 0.2 * std::sin(2 * std::numbers::pi * 0.7 * t));
    }
    detail::ScaleToRms(x, level);
    out.push_back({"seen/hum", std::move(x)});
  }
  {
    // Impulsive clicks: decaying broadband bursts at random times.
    auto rng = rng_for("clicks");
    std::normal_distribution<double> nd(0, 1);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = 0.01 * nd(rng);
    std::size_t pos = 0;
    while (true) {
      pos += static_cast<std::size_t>(sample_rate * (0.02 + 0.08 * u(rng)));
      if (pos >= n) break;
      const double amp = 0.5 + u(rng);
      for (std::size_t j = 0; j < 160 && pos + j < n; ++j) x[pos + j] += amp * nd(rng) * std::exp(-static_cast<double>(j) / 30.0);
    }
    detail::ScaleToRms(x, level);
    out.push_back({"seen/clicks", std::move(x)});
  }
  {
    auto rng = rng_for("white");
    std::normal_distribution<double> nd(0, 1);
    std::vector<double> x(n);
    for (auto& v : x) v = nd(rng);
    detail::ScaleToRms(x, level);
    out.push_back({"unseen/white", std::move(x)});
  }
  {
    auto rng = rng_for("pink");
    auto x = PinkNoise(n, rng);
    detail::ScaleToRms(x, level);
    out.push_back({"unseen/pink", std::move(x)});
  }
  {
    // Babble-like chatter: six overlapping full-band harmonic talkers.
    auto rng = rng_for("babble");
    std::uniform_real_distribution<double> f0(90, 260);
    std::vector<double> x(n, 0.0);
    for (int v = 0; v < 6; ++v) {
      auto voice = detail::HarmonicVoice(n, sample_rate, f0(rng), 7800, rng, [](int, double) { return true; });
      for (std::size_t i = 0; i < n; ++i) x[i] += voice[i];
    }
    detail::ScaleToRms(x, level);
    out.push_back({"unseen/babble", std::move(x)});
  }
  return out;
}

inline void WriteNoisePack(const std::string& dir, std::uint64_t seed, double seconds = 8.0) {
  for (const auto& f : SynthesizeNoisePack(seed, seconds)) {
    const fs::path p = fs::path(dir) / (f.id + ".wav");
    fs::create_directories(p.parent_path());
    Waveform w;
    w.samples = f.samples;
    WriteWav(p.string(), w);
  }
}

// ---------------------------------------------------------------- noisy splits

enum class Protocol { kTrain, kDev, kEvalSeen, kEvalUnseen };

inline Protocol ParseProtocol(const std::string& s) {
  if (s == "train") return Protocol::kTrain;
  if (s == "dev") return Protocol::kDev;
  if (s == "eval_seen") return Protocol::kEvalSeen;
  if (s == "eval_unseen") return Protocol::kEvalUnseen;
  throw DataError("unknown protocol '" + s + "'");
}
inline std::string ProtocolName(Protocol p) {
  switch (p) {
    case Protocol::kTrain: return "train";
    case Protocol::kDev: return "dev";
    case Protocol::kEvalSeen: return "eval_seen";
    case Protocol::kEvalUnseen: return "eval_unseen";
  }
  return "?";
}

struct NoiseDraw {
  std::string noise_id;
  double snr_db = 0;
  std::size_t offset = 0;
};

namespace detail {
inline std::uint64_t HashId(const std::string& s) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (unsigned char c : s) h = SplitMix64(h ^ c);
  return h;
}

inline std::size_t DrawOffset(const Waveform& noise, std::size_t length, Rng& rng, int max_retries = 16) {
  std::uniform_int_distribution<std::size_t> pick(0, noise.size() - 1);
  for (int a = 0; a <= max_retries; ++a) {
    const std::size_t off = pick(rng);
    for (std::size_t i = 0; i < length; ++i)
      if (noise.samples[(off + i) % noise.size()] != 0.0) return off;
  }
  throw DataError("no nonzero-power noise segment after " + std::to_string(max_retries) + " retries");
}
}  // namespace detail

/// Per-epoch draw for train/dev: seen noise, SNR ~ U[0, 20] dB, random offset.
inline NoiseDraw DrawDynamicNoise(const NoiseCatalog& cat, std::uint64_t seed, int epoch, const std::string& utt_id,
                                  std::size_t length) {
  if (cat.seen.empty()) throw DataError("noise catalog has no seen-corpus noise for training");
  Rng rng = Substream(seed, "mix", {static_cast<std::uint64_t>(epoch), detail::HashId(utt_id)});
  NoiseDraw d;
  d.noise_id = cat.seen[std::uniform_int_distribution<std::size_t>(0, cat.seen.size() - 1)(rng)];
  d.snr_db = std::uniform_real_distribution<double>(kTrainSnrLo, kTrainSnrHi)(rng);
  d.offset = detail::DrawOffset(cat.Get(d.noise_id), length, rng);
  return d;
}

/// Eval protocols freeze one (noise, SNR, offset) triple per utterance; SNR is
/// drawn from the 5-level grid unless `fixed_snr` is set. Train/dev rows are
/// returned unfrozen (drawn per epoch at load time). `lengths` gives each
/// utterance's sample count for offset validation.
inline std::vector<ManifestEntry> BuildNoisySplit(const std::vector<ManifestEntry>& corpus, const NoiseCatalog& cat,
                                                  Protocol protocol, std::uint64_t seed,
                                                  const std::map<std::string, std::size_t>& lengths,
                                                  std::optional<double> fixed_snr = std::nullopt) {
  const std::string split = protocol == Protocol::kTrain ? "train" : protocol == Protocol::kDev ? "dev" : "eval";
  std::vector<ManifestEntry> out = FilterSplit(corpus, split);
  if (protocol == Protocol::kTrain || protocol == Protocol::kDev) {
    if (cat.seen.empty()) throw DataError("noise catalog has no seen-corpus noise");
    for (auto& e : out) {
      e.noise_id.clear();
      e.snr_db = std::numeric_limits<double>::quiet_NaN();
      e.offset = -1;
    }
    return out;
  }
  const auto& pool = protocol == Protocol::kEvalSeen ? cat.seen : cat.unseen;
  if (pool.empty()) throw DataError("noise catalog has no " + std::string(protocol == Protocol::kEvalSeen ? "seen" : "unseen") + " noise");
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& e = out[i];
    Rng rng = Substream(seed, "freeze/" + ProtocolName(protocol), {detail::HashId(e.utt_id)});
    e.noise_id = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
    e.snr_db = fixed_snr ? *fixed_snr : kEvalSnrGrid[std::uniform_int_distribution<int>(0, 4)(rng)];
    auto it = lengths.find(e.utt_id);
    if (it == lengths.end()) throw DataError("no length known for " + e.utt_id);
    e.offset = static_cast<long>(detail::DrawOffset(cat.Get(e.noise_id), it->second, rng));
  }
  return out;
}

// ---------------------------------------------------------------- loading

struct Example {
  std::string utt_id;
  int label = kBonafide;
  Waveform clean;
  Waveform noisy;  // empty when no noise applies
  std::string noise_id;
  double snr_db = std::numeric_limits<double>::quiet_NaN();
};

/// Clean waveforms of a manifest, loaded once. Unreadable files are skipped
/// and reported; more than 1% unreadable is a hard failure.
class CleanStore {
 public:
  CleanStore() = default;
  CleanStore(const std::string& manifest_path, const std::vector<ManifestEntry>& rows) { Load(manifest_path, rows); }

  void Load(const std::string& manifest_path, const std::vector<ManifestEntry>& rows) {
    std::size_t bad = 0;
    for (const auto& e : rows) {
      if (waves_.count(e.utt_id)) continue;
      try {
        waves_.emplace(e.utt_id, ReadWav(ResolvePath(manifest_path, e.path)));
      } catch (const WavError& err) {
        ++bad;
        skipped_.push_back(e.utt_id + ": " + err.what());
      }
    }
    if (!rows.empty() && bad * 100 > rows.size())
      throw DataError(std::to_string(bad) + " of " + std::to_string(rows.size()) +
                      " utterances unreadable (limit 1%); first: " + skipped_.front());
  }
  bool contains(const std::string& id) const { return waves_.count(id) > 0; }
  const Waveform& Get(const std::string& id) const {
    auto it = waves_.find(id);
    if (it == waves_.end()) throw DataError("utterance " + id + " not loaded");
    return it->second;
  }
  const std::vector<std::string>& skipped() const { return skipped_; }
  std::map<std::string, std::size_t> Lengths() const {
    std::map<std::string, std::size_t> m;
    for (const auto& [k, v] : waves_) m[k] = v.size();
    return m;
  }

 private:
  std::map<std::string, Waveform> waves_;
  std::vector<std::string> skipped_;
};

enum class NoiseMode { kNone, kFrozen, kDynamic };

/// Builds the (clean, noisy, label) pair for one manifest row.
inline Example MakeExample(const ManifestEntry& e, const CleanStore& store, const NoiseCatalog* cat, NoiseMode mode,
                           std::uint64_t seed, int epoch) {
  Example ex;
  ex.utt_id = e.utt_id;
  ex.label = e.label;
  ex.clean = store.Get(e.utt_id);
  if (mode == NoiseMode::kNone) return ex;
  if (!cat) throw DataError("noisy example requested without a noise catalog");
  NoiseDraw d;
  if (mode == NoiseMode::kFrozen) {
    if (!e.frozen()) throw DataError("manifest row " + e.utt_id + " has no frozen noise triple");
    d = {e.noise_id, e.snr_db, static_cast<std::size_t>(e.offset)};
  } else {
    d = DrawDynamicNoise(*cat, seed, epoch, e.utt_id, ex.clean.size());
  }
  ex.noisy = MixAtSnrWithOffset(ex.clean, cat->Get(d.noise_id), d.snr_db, d.offset).mixed;
  ex.noise_id = d.noise_id;
  ex.snr_db = d.snr_db;
  return ex;
}

// ---------------------------------------------------------------- toy corpus

enum class SpoofKind { kBandLimit, kEvenHarmonic };

inline SpoofKind ParseSpoofKind(const std::string& s) {
  if (s == "band-limit") return SpoofKind::kBandLimit;
  if (s == "even-harmonic") return SpoofKind::kEvenHarmonic;
  throw DataError("unknown spoof kind '" + s + "'");
}
inline std::string SpoofKindName(SpoofKind k) { return k == SpoofKind::kBandLimit ? "band-limit" : "even-harmonic"; }

struct ToySpec {
  double f0_lo = 100, f0_hi = 250;
  double max_hz = 7800;
  double seconds = 1.0;
  SpoofKind kind = SpoofKind::kBandLimit;
  double cutoff_hz = 3500;
  double level_lo = 0.05, level_hi = 0.15;
  std::uint64_t seed = 1;
};

struct ToyUtterance {
  Waveform wave;
  double f0 = 0;
};

inline ToyUtterance GenerateToyUtterance(const ToySpec& spec, int label, Rng& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  ToyUtterance t;
  t.f0 = spec.f0_lo + (spec.f0_hi - spec.f0_lo) * u(rng);
  const double level = spec.level_lo + (spec.level_hi - spec.level_lo) * u(rng);
  const std::size_t n = static_cast<std::size_t>(spec.seconds * t.wave.sample_rate);
  const bool spoof = label == kSpoof;
  auto keep = [&](int k, double f_max) {
    if (!spoof) return true;
    if (spec.kind == SpoofKind::kBandLimit) return f_max < spec.cutoff_hz;
    return k % 2 == 1;
  };
  t.wave.samples = detail::HarmonicVoice(n, t.wave.sample_rate, t.f0, spec.max_hz, rng, keep);
  detail::ScaleToRms(t.wave.samples, level);
  return t;
}

/// Fraction of harmonic energy sitting on even harmonics 2..10 of f0.
inline double EvenHarmonicFraction(const Waveform& w, double f0) {
  const int n = static_cast<int>(w.size());
  const auto& fft = RealFft::Get(n);
  std::vector<std::complex<double>> spec(fft.num_bins());
  fft.Forward(w.samples.data(), spec.data());
  const double hz_per_bin = static_cast<double>(w.sample_rate) / n;
  double even = 0, all = 0;
  for (int k = 1; k <= 10; ++k) {
    const int lo = static_cast<int>((k - 0.3) * f0 / hz_per_bin), hi = static_cast<int>((k + 0.3) * f0 / hz_per_bin);
    double e = 0;
    for (int b = std::max(lo, 0); b <= std::min(hi, fft.num_bins() - 1); ++b) e += std::norm(spec[b]);
    all += e;
    if (k % 2 == 0) even += e;
  }
  return all > 0 ? even / all : 0.0;
}

/// The statistic the generator guarantees separates the classes (larger = bonafide).
inline double ToySeparabilityStatistic(const ToySpec& spec, const ToyUtterance& t) {
  if (spec.kind == SpoofKind::kBandLimit) return BandEnergyFraction(t.wave, spec.cutoff_hz, 4000.0);
  return EvenHarmonicFraction(t.wave, t.f0);
}

/// Best single-threshold accuracy over (statistic, is_bonafide) pairs.
inline double BestThresholdAccuracy(std::vector<std::pair<double, bool>> v) {
  std::sort(v.begin(), v.end());
  std::size_t nb = 0;
  for (const auto& p : v) nb += p.second;
  // Predict bonafide above the cut: correct = spoof below + bonafide above.
  std::size_t spoof_below = 0, bona_below = 0, best = nb;
  for (std::size_t i = 0; i < v.size(); ++i) {
    (v[i].second ? bona_below : spoof_below) += 1;
    if (i + 1 < v.size() && v[i + 1].first == v[i].first) continue;
    best = std::max(best, spoof_below + (nb - bona_below));
  }
  return v.empty() ? 0.0 : static_cast<double>(best) / v.size();
}

struct ToyCounts {
  int train = 400, dev = 100, eval = 200;
};

struct ToySplitReport {
  std::string split;
  int bonafide = 0, spoof = 0;
  double accuracy = 0;
  double bonafide_high_band = 0, spoof_high_band = 0;  // mean fraction of energy >= cutoff
};

struct ToyCorpus {
  std::vector<ManifestEntry> manifest;
  std::vector<ToySplitReport> report;
};

/// Writes <dir>/wav/<utt>.wav and <dir>/manifest.tsv. Rejects the corpus if
/// the separability statistic fails to reach 95% accuracy on any split.
inline ToyCorpus GenerateToyCorpus(const ToySpec& spec, const ToyCounts& counts, const std::string& dir) {
  for (int c : {counts.train, counts.dev, counts.eval})
    if (c < 4) throw DataError("toy corpus: need at least 2 utterances per class per split");
  fs::create_directories(fs::path(dir) / "wav");
  ToyCorpus corpus;
  for (auto [split, count] : {std::pair<std::string, int>{"train", counts.train}, {"dev", counts.dev}, {"eval", counts.eval}}) {
    ToySplitReport rep;
    rep.split = split;
    std::vector<std::pair<double, bool>> stats;
    for (int i = 0; i < count; ++i) {
      const int label = i % 2 ? kSpoof : kBonafide;
      Rng rng = Substream(spec.seed, "toy/" + split, {static_cast<std::uint64_t>(i)});
      const auto utt = GenerateToyUtterance(spec, label, rng);
      std::ostringstream id;
      id << "toy_" << split << "_" << std::setw(5) << std::setfill('0') << i;
      const std::string rel = "wav/" + id.str() + ".wav";
      WriteWav((fs::path(dir) / rel).string(), utt.wave);
      corpus.manifest.push_back({id.str(), rel, label, split, "", std::numeric_limits<double>::quiet_NaN(), -1});
      stats.emplace_back(ToySeparabilityStatistic(spec, utt), label == kBonafide);
      const double high = BandEnergyFraction(utt.wave, spec.cutoff_hz, utt.wave.sample_rate / 2.0);
      (label == kBonafide ? rep.bonafide_high_band : rep.spoof_high_band) += high;
      (label == kBonafide ? rep.bonafide : rep.spoof) += 1;
    }
    rep.bonafide_high_band /= std::max(rep.bonafide, 1);
    rep.spoof_high_band /= std::max(rep.spoof, 1);
    rep.accuracy = BestThresholdAccuracy(stats);
    corpus.report.push_back(rep);
    if (rep.accuracy < 0.95) {
      std::ostringstream msg;
      msg << "toy corpus rejected: " << split << " split separability accuracy " << rep.accuracy
          << " < 0.95 (spoof kind " << SpoofKindName(spec.kind) << ", bonafide high-band " << rep.bonafide_high_band
          << ", spoof high-band " << rep.spoof_high_band << ")";
      throw DataError(msg.str());
    }
  }
  WriteManifest((fs::path(dir) / "manifest.tsv").string(), corpus.manifest);
  return corpus;
}

}  // namespace dkd
