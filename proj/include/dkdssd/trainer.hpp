// dkdssd/trainer.hpp

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

// Epoch loop, best-dev model selection, scoring and mask statistics.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dkdssd/checkpoint.hpp"
#include "dkdssd/metrics.hpp"
#include "dkdssd/optim.hpp"
#include "dkdssd/system.hpp"

namespace dkd {

/// Non-finite loss or gradient; training stops with the last good parameters saved.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kMetricsHeader = "epoch\tphase\tloss\tl_se\tl_sl\tl_kd\tl_tl\tdev_loss";

struct EpochRecord {
  int epoch = 0;
  std::string phase;  // "teacher" (offline pre-training) or "joint"
  double loss = 0;
  double se = std::numeric_limits<double>::quiet_NaN();
  double sl = std::numeric_limits<double>::quiet_NaN();
  double kd = std::numeric_limits<double>::quiet_NaN();
  double tl = std::numeric_limits<double>::quiet_NaN();
  double dev_loss = 0;
};

inline std::string FormatRecord(const EpochRecord& r) {
  std::ostringstream os;
  os << std::setprecision(9);
  auto num = [&](double v) -> std::ostream& { return std::isnan(v) ? os << '-' : os << v; };
  os << r.epoch << '\t' << r.phase << '\t';
  num(r.loss) << '\t';
  num(r.se) << '\t';
  num(r.sl) << '\t';
  num(r.kd) << '\t';
  num(r.tl) << '\t';
  num(r.dev_loss);
  return os.str();
}

struct TrainSummary {
  std::vector<EpochRecord> log;
  int best_epoch = -1;
  double best_dev = std::numeric_limits<double>::infinity();
  long steps = 0;
};

template <typename T>
class Trainer {
 public:
  Trainer(DetectionSystem<T>& sys, const CleanStore& store, const NoiseCatalog* cat, std::vector<ManifestEntry> train,
          std::vector<ManifestEntry> dev)
      : sys_(sys), cfg_(sys.config()), store_(store), cat_(cat), train_(std::move(train)), dev_(std::move(dev)) {
    if (train_.empty()) throw DataError("empty training manifest");
    if (dev_.empty()) throw DataError("empty development manifest");
    if (sys.wiring().uses_noise() && !cat) throw DataError("variant " + VariantName(cfg_.variant) + " needs noise");
  }

  /// Writes <out>/config.ini, <out>/metrics.tsv and the best-dev <out>/model.ckpt;
  /// on return the system holds the best-dev parameters.
  TrainSummary Run(const std::string& out_dir, std::ostream* progress = nullptr) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    SaveConfig((fs::path(out_dir) / "config.ini").string(), cfg_);
    const std::string ckpt = (fs::path(out_dir) / "model.ckpt").string();
    std::ofstream log((fs::path(out_dir) / "metrics.tsv").string());
    log << kMetricsHeader << '\n';
    TrainSummary sum;
    step_ = 0;
    const AdamConfig adam{cfg_.lr};
    auto emit = [&](const EpochRecord& r) {
      sum.log.push_back(r);
      log << FormatRecord(r) << '\n' << std::flush;
      if (progress) *progress << VariantName(cfg_.variant) << ' ' << FormatRecord(r) << '\n' << std::flush;
    };
    try {
      if (sys_.wiring().offline_teacher) {
        Adam<T> opt(sys_.TeacherParams(), adam);
        for (int e = 0; e < cfg_.teacher_epochs; ++e) {
          auto r = RunEpoch(e, TrainPhase::kTeacherPretrain, opt, out_dir);
          r.dev_loss = DevLoss(e, TrainPhase::kTeacherPretrain);
          r.phase = "teacher";
          emit(r);
        }
      }
      Adam<T> opt(sys_.wiring().offline_teacher ? sys_.NonTeacherParams() : AllParams(), adam);
      for (int e = 0; e < cfg_.epochs; ++e) {
        auto r = RunEpoch(e, TrainPhase::kJoint, opt, out_dir);
        r.dev_loss = DevLoss(e, TrainPhase::kJoint);
        r.phase = "joint";
        emit(r);
        if (!std::isfinite(r.dev_loss)) Abort(out_dir, "non-finite dev loss after epoch " + std::to_string(e));
        if (r.dev_loss < sum.best_dev) {
          sum.best_dev = r.dev_loss;
          sum.best_epoch = e;
          SaveParams(ckpt, sys_.params());
        }
      }
    } catch (const NumericError&) {
      sum.steps = step_;
      throw;
    }
    if (sum.best_epoch < 0) SaveParams(ckpt, sys_.params());
    else LoadParams(ReadCheckpoint(ckpt), sys_.params());
    sum.steps = step_;
    return sum;
  }

 private:
  std::vector<Tensor<T>> AllParams() const {
    std::vector<Tensor<T>> v;
    for (const auto& [n, t] : sys_.params().items()) v.push_back(t);
    return v;
  }

  NoiseMode Mode(TrainPhase phase) const {
    return phase == TrainPhase::kJoint && sys_.wiring().uses_noise() ? NoiseMode::kDynamic : NoiseMode::kNone;
  }

  std::vector<Example> Build(const std::vector<ManifestEntry>& rows, const std::vector<std::size_t>& idx,
                             NoiseMode mode, int epoch) const {
    std::vector<Example> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(MakeExample(rows[i], store_, cat_, mode, cfg_.seed, epoch));
    return out;
  }

  [[noreturn]] void Abort(const std::string& out_dir, const std::string& what) {
    const std::string path = (std::filesystem::path(out_dir) / "last_good.ckpt").string();
    SaveParams(path, sys_.params());
    throw NumericError(what + "; last good parameters saved to " + path);
  }

  EpochRecord RunEpoch(int epoch, TrainPhase phase, Adam<T>& opt, const std::string& out_dir) {
    std::vector<std::size_t> order(train_.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Substream(cfg_.seed, "shuffle", {static_cast<std::uint64_t>(phase), static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t bs = static_cast<std::size_t>(cfg_.batch_size);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < order.size(); i += bs)
      batches.emplace_back(order.begin() + i, order.begin() + std::min(order.size(), i + bs));

    const NoiseMode mode = Mode(phase);
    double n = 0, loss = 0, se = 0, sl = 0, kd = 0, tl = 0;
    auto next = std::async(std::launch::async, [&, b = batches[0]] { return Build(train_, b, mode, epoch); });
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      std::vector<Example> batch = next.get();
      if (bi + 1 < batches.size())
        next = std::async(std::launch::async, [&, b = batches[bi + 1]] { return Build(train_, b, mode, epoch); });
      std::vector<const Example*> ptrs;
      for (const auto& ex : batch) ptrs.push_back(&ex);
      sys_.params().ZeroGrad();
      const LossTerms<T> l = sys_.BatchLoss(ptrs, epoch, step_, phase);
      const double total = l.total.item();
      if (!std::isfinite(total)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", step " << step_ << " (first utterance " << batch[0].utt_id
            << ")";
        Abort(out_dir, msg.str());
      }
      Backward(l.total);
      for (const auto& [name, t] : sys_.params().items()) {
        if (!t.has_grad()) continue;
        for (T g : t.grad())
          if (!std::isfinite(g)) Abort(out_dir, "non-finite gradient in " + name + " at step " + std::to_string(step_));
      }
      opt.Step();
      ++step_;
      const double w = static_cast<double>(batch.size());
      n += w;
      loss += w * total;
      if (l.se.defined()) se += w * l.se.item();
      if (l.sl.defined()) sl += w * l.sl.item();
      if (l.kd.defined()) kd += w * l.kd.item();
      if (l.tl.defined()) tl += w * l.tl.item();
    }
    EpochRecord r;
    r.epoch = epoch;
    r.loss = loss / n;
    const auto& w = sys_.wiring();
    const bool joint = phase == TrainPhase::kJoint;
    if (joint && w.enhancer) r.se = se / n;
    if (joint) r.sl = sl / n;
    if (joint && w.kd) r.kd = kd / n;
    if (w.teacher && (!joint || !w.offline_teacher)) r.tl = tl / n;
    return r;
  }

  double DevLoss(int epoch, TrainPhase phase) const {
    NoGradGuard ng;
    std::vector<std::size_t> idx(dev_.size());
    std::iota(idx.begin(), idx.end(), 0);
    const auto examples = Build(dev_, idx, Mode(phase), epoch);
    double total = 0;
    for (const auto& ex : examples) total += sys_.Loss(ex, epoch, step_, phase).total.item();
    return total / examples.size();
  }

  DetectionSystem<T>& sys_;
  const ExperimentConfig& cfg_;
  const CleanStore& store_;
  const NoiseCatalog* cat_;
  std::vector<ManifestEntry> train_, dev_;
  long step_ = 0;
};

/// Scores every row: frozen rows are mixed with their stored noise triple,
/// rows without one are scored on the clean waveform.
template <typename T>
std::vector<TrialScore> ScoreRows(const DetectionSystem<T>& sys, const std::vector<ManifestEntry>& rows,
                                  const CleanStore& store, const NoiseCatalog* cat) {
  std::vector<TrialScore> out;
  out.reserve(rows.size());
  for (const auto& e : rows) {
    const NoiseMode mode = e.frozen() ? NoiseMode::kFrozen : NoiseMode::kNone;
    const Example ex = MakeExample(e, store, cat, mode, 0, 0);
    const double s = sys.Infer(mode == NoiseMode::kNone ? ex.clean : ex.noisy);
    if (!std::isfinite(s)) throw NumericError("non-finite score for " + e.utt_id);
    out.push_back({e.utt_id, s, e.label == kBonafide, ex.noise_id, ex.snr_db});
  }
  return out;
}

struct MaskReport {
  std::vector<MaskStats> rows;
  MaskHistogram histogram;
};

template <typename T>
MaskReport CollectMaskStats(const DetectionSystem<T>& sys, const std::vector<ManifestEntry>& rows,
                            const CleanStore& store, const NoiseCatalog* cat) {
  MaskReport r;
  for (const auto& e : rows) {
    const NoiseMode mode = e.frozen() ? NoiseMode::kFrozen : NoiseMode::kNone;
    const Example ex = MakeExample(e, store, cat, mode, 0, 0);
    const auto values = sys.MaskValues(mode == NoiseMode::kNone ? ex.clean : ex.noisy);
    r.histogram.Add(values);
    r.rows.push_back(ComputeMaskStats(e.utt_id, values));
  }
  return r;
}

}  // namespace dkd
