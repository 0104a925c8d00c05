// tools/dkdssd_cli.cpp

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

// dkdssd: generate corpora, simulate noise protocols, train, evaluate and
// inspect fusion masks. Exit status 0 = ok, 1 = user error, 2 = numeric failure.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "dkdssd/pipeline.hpp"

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string variant, out, manifests;
  long long seed = -1;
  int epochs = -1;
};

void AddCommon(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "experiment config file (INI)");
  cmd->add_option("--set", c.sets, "override a config key, section.key=value (repeatable)");
  cmd->add_option("--variant", c.variant, "system variant (train.variant)");
  cmd->add_option("--seed", c.seed, "master seed (train.seed)");
  cmd->add_option("--epochs", c.epochs, "training epochs (train.epochs)");
  cmd->add_option("--out", c.out, "output directory (paths.out_dir)");
  cmd->add_option("--manifests", c.manifests, "manifest directory (paths.manifest_dir)");
}

dkd::ExperimentConfig Resolve(const Common& c) {
  std::vector<std::string> sets = c.sets;
  if (!c.variant.empty()) sets.push_back("train.variant=" + c.variant);
  if (c.seed >= 0) sets.push_back("train.seed=" + std::to_string(c.seed));
  if (c.epochs >= 0) sets.push_back("train.epochs=" + std::to_string(c.epochs));
  if (!c.out.empty()) sets.push_back("paths.out_dir=" + c.out);
  if (!c.manifests.empty()) sets.push_back("paths.manifest_dir=" + c.manifests);
  return dkd::LoadConfig(c.config, sets);
}

void SaveAlongside(const std::string& dir, const dkd::ExperimentConfig& cfg) {
  std::filesystem::create_directories(dir);
  dkd::SaveConfig((std::filesystem::path(dir) / "config.ini").string(), cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-branch distillation synthetic-speech detection toolkit"};
  app.require_subcommand(1);

  Common common;
  std::string toy_dir;
  auto* gen = app.add_subcommand("gen-toy", "generate the toy corpus and the synthetic noise pack");
  AddCommon(gen, common);
  gen->add_option("--dir", toy_dir, "corpus directory (default: parent of paths.corpus_manifest)");

  auto* sim = app.add_subcommand("simulate", "write train/dev/eval manifests with frozen eval noise");
  AddCommon(sim, common);

  auto* train = app.add_subcommand("train", "train one system variant");
  AddCommon(train, common);

  std::string checkpoint;
  std::vector<std::string> eval_sets;
  auto* eval = app.add_subcommand("eval", "score manifests and write EER reports");
  AddCommon(eval, common);
  eval->add_option("--checkpoint", checkpoint, "model checkpoint (default <out>/model.ckpt)");
  eval->add_option("--manifest", eval_sets, "manifest path or name (default: eval_clean eval_seen eval_unseen)");

  std::string mask_manifest = "eval_unseen";
  auto* mask = app.add_subcommand("maskstats", "per-utterance fusion mask statistics");
  AddCommon(mask, common);
  mask->add_option("--checkpoint", checkpoint, "model checkpoint (default <out>/model.ckpt)");
  mask->add_option("--manifest", mask_manifest, "manifest path or name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const dkd::ExperimentConfig cfg = Resolve(common);
    if (gen->parsed()) {
      std::string dir = toy_dir;
      if (dir.empty()) dir = std::filesystem::path(cfg.corpus_manifest).parent_path().string();
      if (dir.empty()) throw dkd::ConfigError("gen-toy needs --dir or paths.corpus_manifest");
      const auto corpus = dkd::GenerateToyCorpus(cfg.toy, cfg.toy_counts, dir);
      for (const auto& r : corpus.report)
        std::cout << r.split << ": " << r.bonafide << " bonafide, " << r.spoof << " spoof, separability accuracy "
                  << r.accuracy << ", high-band energy bonafide " << r.bonafide_high_band << " spoof "
                  << r.spoof_high_band << '\n';
      const std::string noise = cfg.noise_dir.empty() ? (std::filesystem::path(dir) / "noise").string() : cfg.noise_dir;
      dkd::WriteNoisePack(noise, cfg.toy.seed, cfg.noise_seconds);
      SaveAlongside(dir, cfg);
      std::cout << "wrote " << corpus.manifest.size() << " utterances to " << dir << ", noise pack to " << noise << '\n';
    } else if (sim->parsed()) {
      const auto out = dkd::Simulate(cfg);
      SaveAlongside(cfg.manifest_dir, cfg);
      for (const auto& [name, rows] : out) std::cout << name << ": " << rows.size() << " rows\n";
    } else if (train->parsed()) {
      const auto sum = dkd::TrainFromConfig(cfg, &std::cerr);
      std::cout << "best dev loss " << sum.best_dev << " at epoch " << sum.best_epoch << " after " << sum.steps
                << " steps; checkpoint " << dkd::DefaultCheckpoint(cfg) << '\n';
    } else if (eval->parsed()) {
      if (eval_sets.empty()) eval_sets = dkd::EvalSetNames();
      const auto reports =
          dkd::EvaluateFromConfig(cfg, checkpoint.empty() ? dkd::DefaultCheckpoint(cfg) : checkpoint, eval_sets);
      SaveAlongside((std::filesystem::path(cfg.out_dir) / "eval").string(), cfg);
      for (const auto& [name, r] : reports)
        std::cout << name << "\tpooled EER " << dkd::FormatEer(r.pooled) << " (" << r.pooled.trials << " trials)\n";
    } else if (mask->parsed()) {
      const auto r =
          dkd::MaskStatsFromConfig(cfg, checkpoint.empty() ? dkd::DefaultCheckpoint(cfg) : checkpoint, mask_manifest);
      SaveAlongside(cfg.out_dir, cfg);
      std::cout << r.rows.size() << " utterances, pooled mask mean " << r.histogram.mean() << '\n';
    }
  } catch (const dkd::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
