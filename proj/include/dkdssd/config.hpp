// dkdssd/config.hpp

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

// Experiment configuration: system variants, their wiring, and an INI-style
// file format ("[section]" headers, "key = value" lines).

#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dkdssd/classifier.hpp"
#include "dkdssd/data.hpp"
#include "dkdssd/distill.hpp"
#include "dkdssd/dsp.hpp"
#include "dkdssd/enhancer.hpp"

namespace dkd {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Variant {
  kNoiseFree, kMct1, kMct2, kCascade, kJoint, kDkdssd, kNoKd, kNoIf, kNoJoint, kPkd, kOaFusion
};

inline const std::vector<std::pair<Variant, std::string>>& VariantNames() {
  static const std::vector<std::pair<Variant, std::string>> names{
      {Variant::kNoiseFree, "noise-free"}, {Variant::kMct1, "mct1"},       {Variant::kMct2, "mct2"},
      {Variant::kCascade, "cascade"},      {Variant::kJoint, "joint"},     {Variant::kDkdssd, "dkdssd"},
      {Variant::kNoKd, "no-kd"},           {Variant::kNoIf, "no-if"},      {Variant::kNoJoint, "no-joint"},
      {Variant::kPkd, "pkd"},              {Variant::kOaFusion, "oa-fusion"}};
  return names;
}

inline std::string VariantName(Variant v) {
  for (const auto& [k, n] : VariantNames())
    if (k == v) return n;
  return "?";
}

/// Accepts the short names and "dkdssd-ablation:<name>" for the ablations.
inline Variant ParseVariant(std::string s) {
  const std::string prefix = "dkdssd-ablation:";
  const bool ablation = s.rfind(prefix, 0) == 0;
  if (ablation) s = s.substr(prefix.size());
  for (const auto& [k, n] : VariantNames())
    if (n == s) {
      if (ablation && k != Variant::kNoKd && k != Variant::kNoIf && k != Variant::kNoJoint && k != Variant::kPkd &&
          k != Variant::kOaFusion)
        break;
      return k;
    }
  throw ConfigError("unknown system variant '" + s + "'");
}

/// What the student classifier sees.
enum class StudentInput {
  kClean,     // clean waveform
  kNoisy,     // noisy waveform
  kMixed,     // per-epoch half clean, half noisy
  kEnhanced,  // enhancer output
  kFused,     // interactive fusion of enhanced and noisy stems
  kObservationAdded,  // fixed waveform blend of enhanced and noisy
};

struct Wiring {
  StudentInput input = StudentInput::kFused;
  bool enhancer = true;
  bool teacher = true;
  bool kd = true;
  bool detach_enhanced = false;  // no classifier gradient into the enhancer
  bool offline_teacher = false;  // pre-train, then freeze the teacher

  bool uses_fusion() const { return input == StudentInput::kFused; }
  bool uses_noise() const { return input != StudentInput::kClean; }
  bool operator==(const Wiring&) const = default;
};

inline Wiring WiringFor(Variant v) {
  Wiring w;
  switch (v) {
    case Variant::kNoiseFree: return {StudentInput::kClean, false, false, false, false, false};
    case Variant::kMct1: return {StudentInput::kMixed, false, false, false, false, false};
    case Variant::kMct2: return {StudentInput::kNoisy, false, false, false, false, false};
    case Variant::kCascade: return {StudentInput::kEnhanced, true, false, false, true, false};
    case Variant::kJoint: return {StudentInput::kEnhanced, true, false, false, false, false};
    case Variant::kDkdssd: return w;
    case Variant::kNoKd: w.kd = false; return w;
    case Variant::kNoIf: w.input = StudentInput::kEnhanced; return w;
    case Variant::kNoJoint: w.detach_enhanced = true; return w;
    case Variant::kPkd: w.offline_teacher = true; return w;
    case Variant::kOaFusion: w.input = StudentInput::kObservationAdded; return w;
  }
  return w;
}

struct ExperimentConfig {
  // [paths]
  std::string corpus_manifest;
  std::string noise_dir;
  std::string manifest_dir = "manifests";  // simulated train/dev/eval manifests
  std::string out_dir = "out";
  // [dsp]
  FrameParams se_frame{320, 160, WindowKind::kHann};
  FeatureGeometry feature;  // classifier path
  // [model]
  std::string preset = "tiny";
  EnhancerConfig enhancer;
  ClassifierConfig classifier;
  MarginConfig margin;
  // [distill]
  DistillConfig distill;
  int teacher_epochs = 2;  // offline-teacher pre-training
  double oa_ratio = 0.7;   // enhanced share of the observation-added blend
  // [train]
  Variant variant = Variant::kDkdssd;
  std::uint64_t seed = 17;
  int epochs = 32;
  int batch_size = 4;
  double lr = 1e-3;
  // [data]
  ToySpec toy;
  ToyCounts toy_counts;
  double noise_seconds = 8.0;

  Wiring wiring() const { return WiringFor(variant); }

  /// Desk-scale geometry: 256/128 hann classifier STFT, 0-4 kHz, 128 frames.
  static ExperimentConfig Tiny() {
    ExperimentConfig c;
    c.feature = {{256, 128, WindowKind::kHann}, 4000.0, 128};
    return c;
  }
  /// Full geometry: 1728/130 blackman, 433 x 600, deep classifier.
  static ExperimentConfig Full() {
    ExperimentConfig c;
    c.preset = "full";
    c.feature = FeatureGeometry{};
    c.classifier = ClassifierConfig::Deep();
    return c;
  }
};

namespace detail {

inline std::string JoinInts(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

inline std::vector<int> SplitInts(const std::string& s) {
  std::vector<int> v;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ',');) v.push_back(std::stoi(part));
  if (v.empty()) throw ConfigError("empty integer list");
  return v;
}

// Present keys must convert; ptree::get with a default would swallow errors.
template <typename V>
V Get(const boost::property_tree::ptree& t, const std::string& key, const V& def) {
  return t.get_child_optional(key) ? t.get<V>(key) : def;
}

inline std::string Num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline boost::property_tree::ptree ToPtree(const ExperimentConfig& c) {
  using detail::Num;
  boost::property_tree::ptree t;
  t.put("paths.corpus_manifest", c.corpus_manifest);
  t.put("paths.noise_dir", c.noise_dir);
  t.put("paths.manifest_dir", c.manifest_dir);
  t.put("paths.out_dir", c.out_dir);
  t.put("dsp.se_n_fft", c.se_frame.n_fft);
  t.put("dsp.se_hop", c.se_frame.hop);
  t.put("dsp.se_window", WindowName(c.se_frame.window));
  t.put("dsp.cls_n_fft", c.feature.frame.n_fft);
  t.put("dsp.cls_hop", c.feature.frame.hop);
  t.put("dsp.cls_window", WindowName(c.feature.frame.window));
  t.put("dsp.cls_max_hz", Num(c.feature.max_hz));
  t.put("dsp.cls_frames", c.feature.frames);
  t.put("model.preset", c.preset);
  t.put("model.enhancer_channels1", c.enhancer.channels1);
  t.put("model.enhancer_channels2", c.enhancer.channels2);
  t.put("model.enhancer_hidden", c.enhancer.hidden);
  t.put("model.classifier_widths", detail::JoinInts(c.classifier.widths));
  t.put("model.embedding", c.classifier.embedding);
  t.put("model.se_reduction", c.classifier.se_reduction);
  t.put("model.margin_m", c.margin.m);
  t.put("model.lambda_start", Num(c.margin.lambda_start));
  t.put("model.lambda_decay", Num(c.margin.lambda_decay));
  t.put("model.lambda_min", Num(c.margin.lambda_min));
  t.put("model.plain_softmax", c.margin.plain_softmax);
  t.put("distill.tau", Num(c.distill.tau));
  t.put("distill.alpha", Num(c.distill.alpha));
  t.put("distill.detach_teacher", c.distill.detach_teacher);
  t.put("distill.teacher_epochs", c.teacher_epochs);
  t.put("distill.oa_ratio", Num(c.oa_ratio));
  t.put("train.variant", VariantName(c.variant));
  t.put("train.seed", c.seed);
  t.put("train.epochs", c.epochs);
  t.put("train.batch_size", c.batch_size);
  t.put("train.lr", Num(c.lr));
  t.put("data.toy_f0_lo", Num(c.toy.f0_lo));
  t.put("data.toy_f0_hi", Num(c.toy.f0_hi));
  t.put("data.toy_max_hz", Num(c.toy.max_hz));
  t.put("data.toy_seconds", Num(c.toy.seconds));
  t.put("data.toy_spoof_kind", SpoofKindName(c.toy.kind));
  t.put("data.toy_cutoff_hz", Num(c.toy.cutoff_hz));
  t.put("data.toy_level_lo", Num(c.toy.level_lo));
  t.put("data.toy_level_hi", Num(c.toy.level_hi));
  t.put("data.toy_seed", c.toy.seed);
  t.put("data.toy_train", c.toy_counts.train);
  t.put("data.toy_dev", c.toy_counts.dev);
  t.put("data.toy_eval", c.toy_counts.eval);
  t.put("data.noise_seconds", Num(c.noise_seconds));
  return t;
}

/// Keys absent from `t` keep the preset defaults; unknown keys are rejected.
inline ExperimentConfig FromPtree(const boost::property_tree::ptree& t) {
  const std::string preset = detail::Get<std::string>(t, "model.preset", "tiny");
  if (preset != "tiny" && preset != "full") throw ConfigError("model.preset must be tiny or full, got '" + preset + "'");
  ExperimentConfig c = preset == "full" ? ExperimentConfig::Full() : ExperimentConfig::Tiny();
  const auto known = ToPtree(c);
  for (const auto& [sec, body] : t) {
    if (body.empty() && !body.data().empty()) throw ConfigError("key '" + sec + "' outside a section");
    for (const auto& [key, v] : body)
      if (!known.get_child_optional(boost::property_tree::ptree::path_type(sec + "." + key)))
        throw ConfigError("unknown config key " + sec + "." + key);
  }
  try {
    c.corpus_manifest = detail::Get(t, "paths.corpus_manifest", c.corpus_manifest);
    c.noise_dir = detail::Get(t, "paths.noise_dir", c.noise_dir);
    c.manifest_dir = detail::Get(t, "paths.manifest_dir", c.manifest_dir);
    c.out_dir = detail::Get(t, "paths.out_dir", c.out_dir);
    c.se_frame.n_fft = detail::Get(t, "dsp.se_n_fft", c.se_frame.n_fft);
    c.se_frame.hop = detail::Get(t, "dsp.se_hop", c.se_frame.hop);
    c.se_frame.window = ParseWindow(detail::Get(t, "dsp.se_window", WindowName(c.se_frame.window)));
    c.feature.frame.n_fft = detail::Get(t, "dsp.cls_n_fft", c.feature.frame.n_fft);
    c.feature.frame.hop = detail::Get(t, "dsp.cls_hop", c.feature.frame.hop);
    c.feature.frame.window = ParseWindow(detail::Get(t, "dsp.cls_window", WindowName(c.feature.frame.window)));
    c.feature.max_hz = detail::Get(t, "dsp.cls_max_hz", c.feature.max_hz);
    c.feature.frames = detail::Get(t, "dsp.cls_frames", c.feature.frames);
    c.preset = preset;
    c.enhancer.channels1 = detail::Get(t, "model.enhancer_channels1", c.enhancer.channels1);
    c.enhancer.channels2 = detail::Get(t, "model.enhancer_channels2", c.enhancer.channels2);
    c.enhancer.hidden = detail::Get(t, "model.enhancer_hidden", c.enhancer.hidden);
    c.classifier.widths = detail::SplitInts(detail::Get(t, "model.classifier_widths", detail::JoinInts(c.classifier.widths)));
    c.classifier.embedding = detail::Get(t, "model.embedding", c.classifier.embedding);
    c.classifier.se_reduction = detail::Get(t, "model.se_reduction", c.classifier.se_reduction);
    c.margin.m = detail::Get(t, "model.margin_m", c.margin.m);
    c.margin.lambda_start = detail::Get(t, "model.lambda_start", c.margin.lambda_start);
    c.margin.lambda_decay = detail::Get(t, "model.lambda_decay", c.margin.lambda_decay);
    c.margin.lambda_min = detail::Get(t, "model.lambda_min", c.margin.lambda_min);
    c.margin.plain_softmax = detail::Get(t, "model.plain_softmax", c.margin.plain_softmax);
    c.distill.tau = detail::Get(t, "distill.tau", c.distill.tau);
    c.distill.alpha = detail::Get(t, "distill.alpha", c.distill.alpha);
    c.distill.detach_teacher = detail::Get(t, "distill.detach_teacher", c.distill.detach_teacher);
    c.teacher_epochs = detail::Get(t, "distill.teacher_epochs", c.teacher_epochs);
    c.oa_ratio = detail::Get(t, "distill.oa_ratio", c.oa_ratio);
    c.variant = ParseVariant(detail::Get(t, "train.variant", VariantName(c.variant)));
    c.seed = detail::Get(t, "train.seed", c.seed);
    c.epochs = detail::Get(t, "train.epochs", c.epochs);
    c.batch_size = detail::Get(t, "train.batch_size", c.batch_size);
    c.lr = detail::Get(t, "train.lr", c.lr);
    c.toy.f0_lo = detail::Get(t, "data.toy_f0_lo", c.toy.f0_lo);
    c.toy.f0_hi = detail::Get(t, "data.toy_f0_hi", c.toy.f0_hi);
    c.toy.max_hz = detail::Get(t, "data.toy_max_hz", c.toy.max_hz);
    c.toy.seconds = detail::Get(t, "data.toy_seconds", c.toy.seconds);
    c.toy.kind = ParseSpoofKind(detail::Get(t, "data.toy_spoof_kind", SpoofKindName(c.toy.kind)));
    c.toy.cutoff_hz = detail::Get(t, "data.toy_cutoff_hz", c.toy.cutoff_hz);
    c.toy.level_lo = detail::Get(t, "data.toy_level_lo", c.toy.level_lo);
    c.toy.level_hi = detail::Get(t, "data.toy_level_hi", c.toy.level_hi);
    c.toy.seed = detail::Get(t, "data.toy_seed", c.toy.seed);
    c.toy_counts.train = detail::Get(t, "data.toy_train", c.toy_counts.train);
    c.toy_counts.dev = detail::Get(t, "data.toy_dev", c.toy_counts.dev);
    c.toy_counts.eval = detail::Get(t, "data.toy_eval", c.toy_counts.eval);
    c.noise_seconds = detail::Get(t, "data.noise_seconds", c.noise_seconds);
  } catch (const boost::property_tree::ptree_bad_data& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  } catch (const DspError& e) {
    throw ConfigError(e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  if (c.epochs < 0 || c.batch_size < 1 || !(c.lr > 0)) throw ConfigError("train: epochs >= 0, batch_size >= 1, lr > 0");
  if (c.margin.m < 1) throw ConfigError("model.margin_m must be >= 1");
  if (!(c.oa_ratio >= 0 && c.oa_ratio <= 1)) throw ConfigError("distill.oa_ratio must lie in [0, 1]");
  c.distill.Validate();
  return c;
}

/// "section.key=value" overrides applied on top of a loaded tree.
inline void ApplyOverrides(boost::property_tree::ptree& t, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || o.find('.') > eq) throw ConfigError("override '" + o + "' is not section.key=value");
    t.put(o.substr(0, eq), o.substr(eq + 1));
  }
}

inline ExperimentConfig LoadConfig(const std::string& path, const std::vector<std::string>& overrides = {}) {
  boost::property_tree::ptree t;
  if (!path.empty()) {
    try {
      boost::property_tree::read_ini(path, t);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(e.what());
    }
  }
  ApplyOverrides(t, overrides);
  return FromPtree(t);
}

inline void SaveConfig(const std::string& path, const ExperimentConfig& c) {
  boost::property_tree::write_ini(path, ToPtree(c));
}

inline std::string ConfigString(const ExperimentConfig& c) {
  std::ostringstream os;
  boost::property_tree::write_ini(os, ToPtree(c));
  return os.str();
}

}  // namespace dkd
