// dkdssd/pipeline.hpp

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

// Config-driven commands behind the command-line tool.
//
// Layout:
//   <manifest_dir>/{train,dev,eval_clean,eval_seen,eval_unseen,eval_unseen_0db}.tsv
//   <out_dir>/config.ini, metrics.tsv, model.ckpt
//   <out_dir>/eval/<name>.scores.tsv, <name>.report.tsv
//   <out_dir>/maskstats.tsv

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "dkdssd/trainer.hpp"

namespace dkd {

inline const std::vector<std::string>& EvalSetNames() {
  static const std::vector<std::string> names{"eval_clean", "eval_seen", "eval_unseen"};
  return names;
}

inline std::string ManifestPath(const ExperimentConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.manifest_dir) / (name + ".tsv")).string();
}

/// Corpus rows with paths made absolute, so derived manifests can live anywhere.
inline std::vector<ManifestEntry> ReadCorpus(const std::string& manifest) {
  if (!std::filesystem::exists(manifest)) throw DataError("corpus manifest " + manifest + " does not exist");
  auto rows = ReadManifest(manifest);
  for (auto& e : rows) e.path = std::filesystem::absolute(ResolvePath(manifest, e.path)).lexically_normal().string();
  return rows;
}

/// Writes the train/dev manifests and the frozen eval protocols.
inline std::map<std::string, std::vector<ManifestEntry>> Simulate(const ExperimentConfig& cfg) {
  const auto corpus = ReadCorpus(cfg.corpus_manifest);
  const NoiseCatalog cat = LoadNoiseCatalog(cfg.noise_dir);
  const auto eval_rows = FilterSplit(corpus, "eval");
  const CleanStore store(cfg.corpus_manifest, eval_rows);
  const auto lengths = store.Lengths();
  std::map<std::string, std::vector<ManifestEntry>> out;
  out["train"] = BuildNoisySplit(corpus, cat, Protocol::kTrain, cfg.seed, lengths);
  out["dev"] = BuildNoisySplit(corpus, cat, Protocol::kDev, cfg.seed, lengths);
  std::vector<ManifestEntry> clean;
  for (const auto& e : eval_rows)
    if (store.contains(e.utt_id)) clean.push_back(e);
  out["eval_clean"] = clean;
  auto keep_loaded = [&](std::vector<ManifestEntry> rows) {
    std::erase_if(rows, [&](const ManifestEntry& e) { return !store.contains(e.utt_id); });
    return rows;
  };
  out["eval_seen"] = keep_loaded(BuildNoisySplit(clean, cat, Protocol::kEvalSeen, cfg.seed, lengths));
  out["eval_unseen"] = keep_loaded(BuildNoisySplit(clean, cat, Protocol::kEvalUnseen, cfg.seed, lengths));
  out["eval_unseen_0db"] = keep_loaded(BuildNoisySplit(clean, cat, Protocol::kEvalUnseen, cfg.seed, lengths, 0.0));
  std::filesystem::create_directories(cfg.manifest_dir);
  for (const auto& [name, rows] : out) WriteManifest(ManifestPath(cfg, name), rows);
  return out;
}

inline std::vector<ManifestEntry> LoadManifestOrThrow(const std::string& path) {
  if (!std::filesystem::exists(path)) throw DataError("manifest " + path + " does not exist (run simulate first)");
  return ReadManifest(path);
}

struct LoadedData {
  CleanStore store;
  std::optional<NoiseCatalog> noise;
  const NoiseCatalog* catalog() const { return noise ? &*noise : nullptr; }
};

inline LoadedData LoadData(const ExperimentConfig& cfg, const std::string& manifest_path,
                           const std::vector<ManifestEntry>& rows, bool need_noise) {
  LoadedData d;
  d.store.Load(manifest_path, rows);
  if (need_noise) d.noise = LoadNoiseCatalog(cfg.noise_dir);
  return d;
}

inline TrainSummary TrainFromConfig(const ExperimentConfig& cfg, std::ostream* progress = nullptr) {
  const auto train = LoadManifestOrThrow(ManifestPath(cfg, "train"));
  const auto dev = LoadManifestOrThrow(ManifestPath(cfg, "dev"));
  std::vector<ManifestEntry> all = train;
  all.insert(all.end(), dev.begin(), dev.end());
  DetectionSystem<float> sys(cfg);
  // Noise-free training never opens the noise corpus.
  const LoadedData data = LoadData(cfg, ManifestPath(cfg, "train"), all, sys.wiring().uses_noise());
  auto usable = [&](std::vector<ManifestEntry> rows) {
    std::erase_if(rows, [&](const ManifestEntry& e) { return !data.store.contains(e.utt_id); });
    return rows;
  };
  Trainer<float> trainer(sys, data.store, data.catalog(), usable(train), usable(dev));
  return trainer.Run(cfg.out_dir, progress);
}

/// Loads the student-side parameters; shape or name mismatches are rejected.
inline void LoadForInference(DetectionSystem<float>& sys, const std::string& checkpoint) {
  LoadParams(ReadCheckpoint(checkpoint), sys.params(),
             [](const std::string& n) { return !DetectionSystem<float>::IsTeacherParam(n); });
}

inline std::string DefaultCheckpoint(const ExperimentConfig& cfg) {
  return (std::filesystem::path(cfg.out_dir) / "model.ckpt").string();
}

/// Scores each named manifest and writes <out>/eval/<name>.{scores,report}.tsv.
inline std::map<std::string, EvalReport> EvaluateFromConfig(const ExperimentConfig& cfg, const std::string& checkpoint,
                                                            const std::vector<std::string>& manifests) {
  DetectionSystem<float> sys(cfg);
  LoadForInference(sys, checkpoint);
  const auto dir = std::filesystem::path(cfg.out_dir) / "eval";
  std::filesystem::create_directories(dir);
  std::optional<NoiseCatalog> cat;
  std::map<std::string, EvalReport> reports;
  for (const auto& m : manifests) {
    const std::string path = std::filesystem::exists(m) ? m : ManifestPath(cfg, m);
    const auto rows = LoadManifestOrThrow(path);
    const bool noisy = std::any_of(rows.begin(), rows.end(), [](const ManifestEntry& e) { return e.frozen(); });
    if (noisy && !cat) cat = LoadNoiseCatalog(cfg.noise_dir);
    CleanStore store(path, rows);
    auto usable = rows;
    std::erase_if(usable, [&](const ManifestEntry& e) { return !store.contains(e.utt_id); });
    const auto trials = ScoreRows(sys, usable, store, cat ? &*cat : nullptr);
    const std::string name = std::filesystem::path(path).stem().string();
    {
      std::ofstream os((dir / (name + ".scores.tsv")).string());
      WriteScores(os, trials);
    }
    const auto report = BreakdownReport(trials);
    std::ofstream os((dir / (name + ".report.tsv")).string());
    WriteReport(os, report, VariantName(cfg.variant) + " " + name);
    reports[name] = report;
  }
  return reports;
}

inline MaskReport MaskStatsFromConfig(const ExperimentConfig& cfg, const std::string& checkpoint,
                                      const std::string& manifest) {
  DetectionSystem<float> sys(cfg);
  if (!sys.wiring().uses_fusion())
    throw ConfigError("variant " + VariantName(cfg.variant) + " has no interactive fusion module");
  LoadForInference(sys, checkpoint);
  const std::string path = std::filesystem::exists(manifest) ? manifest : ManifestPath(cfg, manifest);
  const auto rows = LoadManifestOrThrow(path);
  std::optional<NoiseCatalog> cat;
  if (std::any_of(rows.begin(), rows.end(), [](const ManifestEntry& e) { return e.frozen(); }))
    cat = LoadNoiseCatalog(cfg.noise_dir);
  CleanStore store(path, rows);
  auto usable = rows;
  std::erase_if(usable, [&](const ManifestEntry& e) { return !store.contains(e.utt_id); });
  auto report = CollectMaskStats(sys, usable, store, cat ? &*cat : nullptr);
  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream os((std::filesystem::path(cfg.out_dir) / "maskstats.tsv").string());
  WriteMaskReport(os, report.rows, report.histogram);
  return report;
}

}  // namespace dkd
