// dkdssd/system.hpp

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

// A complete detection system for one variant: enhancer, stems, fusion,
// student and teacher classifiers, and the per-utterance loss.
//
// Parameter names:
//   enhancer.*        speech enhancement front-end
//   student.stem.*    stem on the observed (or the only) student input
//   student.stem_enh.* stem on the enhanced waveform (fused inputs only)
//   fusion.*          interactive fusion
//   student.cls.*     student classifier
//   teacher.stem.*, teacher.cls.*  clean-speech teacher

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dkdssd/classifier.hpp"
#include "dkdssd/config.hpp"
#include "dkdssd/data.hpp"
#include "dkdssd/distill.hpp"
#include "dkdssd/enhancer.hpp"
#include "dkdssd/fusion.hpp"
#include "dkdssd/spectral.hpp"
#include "dkdssd/wav.hpp"

namespace dkd {

/// Loss terms of one utterance (or a batch mean). Absent terms are undefined.
template <typename T>
struct LossTerms {
  Tensor<T> total, sl, tl, kd, se;
};

template <typename T>
struct StudentPass {
  ClassifierOutput<T> out;
  Tensor<T> se_loss;  // defined when a clean reference was given
  Tensor<T> mask;     // [1,H,W], fused inputs only
};

enum class TrainPhase {
  kJoint,            // the variant's normal objective
  kTeacherPretrain,  // offline teacher: L_TL only
};

template <typename T>
class DetectionSystem {
 public:
  DetectionSystem(const ExperimentConfig& cfg, const Wiring& wiring) : cfg_(cfg), wiring_(wiring), ps_(cfg.seed) {
    const bool enh_input = wiring.input == StudentInput::kEnhanced || wiring.input == StudentInput::kFused ||
                           wiring.input == StudentInput::kObservationAdded;
    if (enh_input != wiring.enhancer)
      throw ConfigError("wiring: the enhancer flag must match an enhanced student input");
    if (wiring.kd && !wiring.teacher) throw ConfigError("wiring: distillation needs a teacher");
    if (wiring.enhancer) {
      EnhancerConfig ec = cfg.enhancer;
      ec.frame = cfg.se_frame;
      enhancer_.emplace(ps_, "enhancer", ec);
    }
    ClassifierConfig cc = cfg.classifier;
    cc.in_channels = kStemChannels;
    stem_ = Stem<T>(ps_, "student.stem");
    if (wiring.uses_fusion()) {
      stem_enh_ = Stem<T>(ps_, "student.stem_enh");
      fusion_.emplace(ps_, "fusion");
    }
    student_ = Classifier<T>(ps_, "student.cls", cc);
    if (wiring.teacher) {
      teacher_stem_ = Stem<T>(ps_, "teacher.stem");
      teacher_ = Classifier<T>(ps_, "teacher.cls", cc);
    }
  }
  explicit DetectionSystem(const ExperimentConfig& cfg) : DetectionSystem(cfg, cfg.wiring()) {}

  DetectionSystem(const DetectionSystem&) = delete;
  DetectionSystem& operator=(const DetectionSystem&) = delete;

  ParamStore<T>& params() { return ps_; }
  const ParamStore<T>& params() const { return ps_; }
  const Wiring& wiring() const { return wiring_; }
  const ExperimentConfig& config() const { return cfg_; }

  static bool IsTeacherParam(const std::string& name) { return name.rfind("teacher.", 0) == 0; }

  /// Student branch on the observed waveform. The teacher is never touched.
  /// With `clean`, the enhancer's SE loss against the clean magnitude is added.
  StudentPass<T> Student(const Waveform& observed, const Waveform* clean = nullptr) const {
    StudentPass<T> r;
    const Tensor<T> x = WaveTensor(observed);
    switch (wiring_.input) {
      case StudentInput::kClean:
      case StudentInput::kNoisy:
      case StudentInput::kMixed:
        r.out = student_(stem_(Features(x)));
        return r;
      default:
        break;
    }
    const MagPhase mp = AnalyzeMagPhase(observed, cfg_.se_frame);
    const Tensor<T> est = (*enhancer_)(mp.MagnitudeTensor<T>());
    if (clean) r.se_loss = SeLoss(est, AnalyzeMagPhase(*clean, cfg_.se_frame).MagnitudeTensor<T>());
    Tensor<T> x_hat = ReconstructTime(est, mp, cfg_.se_frame);
    if (wiring_.detach_enhanced) x_hat = x_hat.detach();
    if (wiring_.input == StudentInput::kEnhanced) {
      r.out = student_(stem_(Features(x_hat)));
    } else if (wiring_.input == StudentInput::kObservationAdded) {
      const T a = static_cast<T>(cfg_.oa_ratio);
      r.out = student_(stem_(Features(Add(Scale(x_hat, a), Scale(x, T(1) - a)))));
    } else {
      const FusionState<T> s = (*fusion_)(stem_enh_(Features(x_hat)), stem_(Features(x)));
      r.mask = s.mask;
      r.out = student_(s.x_inter);
    }
    return r;
  }

  ClassifierOutput<T> Teacher(const Waveform& clean) const {
    if (!wiring_.teacher) throw ConfigError("variant " + VariantName(cfg_.variant) + " has no teacher");
    return teacher_(teacher_stem_(Features(WaveTensor(clean))));
  }

  /// The waveform the student trains on for this example and epoch.
  const Waveform& TrainingInput(const Example& ex, int epoch) const {
    switch (wiring_.input) {
      case StudentInput::kClean:
        return ex.clean;
      case StudentInput::kMixed: {
        Rng rng = Substream(cfg_.seed, "mct1", {static_cast<std::uint64_t>(epoch), detail::HashId(ex.utt_id)});
        if (rng() & 1) return ex.clean;
        break;
      }
      default:
        break;
    }
    if (ex.noisy.samples.empty()) throw DataError("example " + ex.utt_id + " lacks its noisy version");
    if (ex.noisy.size() != ex.clean.size())
      throw DataError("example " + ex.utt_id + ": noisy and clean waveforms are not paired");
    return ex.noisy;
  }

  /// Per-utterance objective. `step` drives the A-softmax annealing.
  LossTerms<T> Loss(const Example& ex, int epoch, long step, TrainPhase phase = TrainPhase::kJoint) const {
    LossTerms<T> l;
    if (phase == TrainPhase::kTeacherPretrain) {
      if (!wiring_.teacher) throw ConfigError("teacher pre-training without a teacher");
      const auto t = Teacher(ex.clean);
      l.tl = HardLoss(t.logits, t.norm, ex.label, cfg_.margin, step);
      l.total = l.tl;
      return l;
    }
    const StudentPass<T> s = Student(TrainingInput(ex, epoch), wiring_.enhancer ? &ex.clean : nullptr);
    l.sl = HardLoss(s.out.logits, s.out.norm, ex.label, cfg_.margin, step);
    l.se = s.se_loss;
    if (wiring_.teacher) {
      ClassifierOutput<T> t;
      if (wiring_.offline_teacher) {
        NoGradGuard frozen;
        t = Teacher(ex.clean);
      } else {
        t = Teacher(ex.clean);
        l.tl = HardLoss(t.logits, t.norm, ex.label, cfg_.margin, step);
      }
      if (wiring_.kd) l.kd = KdLoss(s.out.logits, t.logits, cfg_.distill.tau, cfg_.distill.detach_teacher);
    }
    const double alpha = cfg_.distill.alpha;
    if (wiring_.kd && l.tl.defined()) {
      l.total = SsdLoss(l.sl, l.kd, l.tl, alpha);
    } else if (wiring_.kd) {
      l.total = Add(Scale(l.sl, static_cast<T>(1 - alpha)), Scale(l.kd, static_cast<T>(alpha)));
    } else {
      l.total = l.tl.defined() ? Add(l.sl, l.tl) : l.sl;
    }
    if (l.se.defined()) l.total = Add(l.total, l.se);
    return l;
  }

  /// Mean of per-utterance terms over a batch.
  LossTerms<T> BatchLoss(const std::vector<const Example*>& batch, int epoch, long step,
                         TrainPhase phase = TrainPhase::kJoint) const {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    std::vector<LossTerms<T>> parts;
    parts.reserve(batch.size());
    for (const Example* ex : batch) parts.push_back(Loss(*ex, epoch, step, phase));
    const T inv = static_cast<T>(1.0 / batch.size());
    auto mean = [&](Tensor<T> LossTerms<T>::*field) {
      if (!(parts[0].*field).defined()) return Tensor<T>();
      Tensor<T> acc = parts[0].*field;
      for (std::size_t i = 1; i < parts.size(); ++i) acc = Add(acc, parts[i].*field);
      return Scale(acc, inv);
    };
    return {mean(&LossTerms<T>::total), mean(&LossTerms<T>::sl), mean(&LossTerms<T>::tl), mean(&LossTerms<T>::kd),
            mean(&LossTerms<T>::se)};
  }

  /// Detection score of the observed waveform (higher = more bonafide).
  double Infer(const Waveform& observed) const {
    NoGradGuard ng;
    return Score(Student(observed).out);
  }

  std::vector<double> InferBatch(const std::vector<Waveform>& observed) const {
    std::vector<double> s;
    s.reserve(observed.size());
    for (const auto& w : observed) s.push_back(Infer(w));
    return s;
  }

  /// Spatial fusion mask values of the observed waveform.
  std::vector<double> MaskValues(const Waveform& observed) const {
    if (!wiring_.uses_fusion()) throw ConfigError("variant " + VariantName(cfg_.variant) + " has no fusion module");
    NoGradGuard ng;
    const auto s = Student(observed);
    return {s.mask.data().begin(), s.mask.data().end()};
  }

  std::vector<Tensor<T>> TeacherParams() const { return ps_.WithPrefix({"teacher."}); }
  std::vector<Tensor<T>> NonTeacherParams() const {
    return ps_.WithPrefix({"enhancer.", "student.", "fusion."});
  }

 private:
  static Tensor<T> WaveTensor(const Waveform& w) {
    return Tensor<T>::FromData({static_cast<int>(w.size())}, std::vector<T>(w.samples.begin(), w.samples.end()));
  }
  Tensor<T> Features(const Tensor<T>& x) const { return LowbandLogMagTensor(x, cfg_.feature, kRequiredSampleRate); }

  ExperimentConfig cfg_;
  Wiring wiring_;
  ParamStore<T> ps_;
  std::optional<Enhancer<T>> enhancer_;
  Stem<T> stem_, stem_enh_, teacher_stem_;
  std::optional<InteractiveFusion<T>> fusion_;
  Classifier<T> student_, teacher_;
};

}  // namespace dkd
