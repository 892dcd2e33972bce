/*
 * Copyright 2026 The denspu authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "denspu/pipeline.hpp"

namespace {

using denspu::pipeline::PipelineConfig;

struct GlobalArgs {
  std::string profile = "desk";
  std::string config_path;
  std::vector<std::string> overrides;  // extra key=value settings
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

/// Precedence, lowest to highest: profile defaults, config file, repeated
/// --set overrides, then the --seed / --out flags.
PipelineConfig resolve_config(const GlobalArgs& g) {
  PipelineConfig c = denspu::pipeline::default_config(g.profile);
  if (!g.config_path.empty()) c = denspu::pipeline::load_config(g.config_path, std::move(c));
  std::string set_lines;
  for (const auto& kv : g.overrides) set_lines += kv + '\n';
  if (!set_lines.empty()) c = denspu::pipeline::parse_config(set_lines, std::move(c));
  if (g.seed) c.seed = *g.seed;
  if (g.out_dir) c.out_dir = *g.out_dir;
  return c;
}

void print_report(const denspu::pipeline::PipelineReport& rep) {
  std::cout << "dataset=" << rep.dataset << " variant=" << rep.variant << " seed=" << rep.seed
            << '\n';
  std::cout << "recovered=" << rep.n_recovered << " leftovers=" << rep.n_leftovers
            << " selected=" << rep.n_selected << " of " << rep.n_unlabeled << " unlabeled\n";
  if (!std::isnan(rep.neg_purity)) std::cout << "negative_purity=" << rep.neg_purity << '\n';
  const auto& m = rep.metrics;
  std::cout << "accuracy=" << m.accuracy << " precision=" << m.precision << " recall=" << m.recall
            << " f1=" << m.f1 << " auc=" << m.auc.value_or(0.0) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"denspu: positive-unlabeled image classification via latent densification"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--profile", g.profile, "configuration preset")
      ->check(CLI::IsMember({"paper", "desk"}))
      ->capture_default_str();
  app.add_option("--config", g.config_path, "key = value configuration file")
      ->check(CLI::ExistingFile);
  app.add_option("--set", g.overrides, "override a single key, e.g. --set augment.k=0.3");
  auto* seed_opt = app.add_option("--seed", "random seed");
  auto* out_opt = app.add_option("--out", "run output directory");

  std::string sweep = "variant";
  int n_seeds = 3;

  // global flags may appear after the subcommand name; let them fall through
  auto sub = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    s->fallthrough();
    return s;
  };
  auto* cmd_prepare = sub("prepare-data", "materialize the PU split");
  auto* cmd_cae = sub("train-cae", "train the autoencoder on labeled positives");
  auto* cmd_encode = sub("encode", "encode positives and unlabeled pool");
  auto* cmd_densify = sub("densify", "generate interpolated embeddings");
  auto* cmd_detect = sub("detect", "fit the isolation forest and score U");
  auto* cmd_select = sub("select-negatives", "rank leftovers and pick negatives");
  auto* cmd_clf = sub("train-classifier", "train the binary classifier");
  auto* cmd_eval = sub("evaluate", "score the test set and write reports");
  auto* cmd_pipeline = sub("pipeline", "run all stages end to end");
  auto* cmd_ablation = sub("ablation", "sweep one axis over repeated seeds");
  cmd_ablation->add_option("--sweep", sweep, "axis to sweep")
      ->check(CLI::IsMember({"labeled_fraction", "variant", "population"}))
      ->capture_default_str();
  cmd_ablation->add_option("--seeds", n_seeds, "number of repeated seeds")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  auto* cmd_psnr = sub("psnr-experiment", "reconstruction-quality threshold study");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count()) g.seed = seed_opt->as<std::uint64_t>();
  if (out_opt->count()) g.out_dir = out_opt->as<std::string>();

  try {
    PipelineConfig c = resolve_config(g);
    namespace pl = denspu::pipeline;

    if (cmd_prepare->parsed()) {
      pl::validate_config(c);
      pl::stage_prepare_data(c);
      std::cout << "data written under " << c.out_dir << "/data\n";
    } else if (cmd_cae->parsed()) {
      pl::stage_train_cae(c);
      std::cout << "autoencoder written to " << pl::RunPaths(c).cae_model().string() << '\n';
    } else if (cmd_encode->parsed()) {
      pl::stage_encode(c);
      std::cout << "encodings written under " << c.out_dir << "/latent\n";
    } else if (cmd_densify->parsed()) {
      pl::stage_densify(c);
      std::cout << "embeddings written to " << pl::RunPaths(c).z_dens().string() << '\n';
    } else if (cmd_detect->parsed()) {
      pl::stage_detect(c);
      std::cout << "forest written to " << pl::RunPaths(c).forest_file().string() << '\n';
    } else if (cmd_select->parsed()) {
      pl::stage_select_negatives(c);
      std::cout << "negatives written to " << pl::RunPaths(c).negatives_csv().string() << '\n';
    } else if (cmd_clf->parsed()) {
      pl::stage_train_classifier(c);
      std::cout << "classifier written to " << pl::RunPaths(c).clf_model().string() << '\n';
    } else if (cmd_eval->parsed()) {
      print_report(pl::stage_evaluate(c));
    } else if (cmd_pipeline->parsed()) {
      auto rep = pl::run_pipeline(c);
      print_report(rep);
      for (const auto& [stage, secs] : rep.stage_seconds)
        std::cout << "  " << stage << ": " << secs << "s\n";
    } else if (cmd_ablation->parsed()) {
      auto table = pl::run_ablation(c, sweep, n_seeds);
      std::cout << "sweep=" << table.sweep << " dataset=" << table.dataset << '\n';
      for (const auto& cell : table.cells)
        std::cout << "  " << cell.name << ": f1=" << cell.mean_f1 << " (std " << cell.std_f1
                  << "), acc=" << cell.mean_accuracy << ", auc=" << cell.mean_auc << '\n';
    } else if (cmd_psnr->parsed()) {
      auto rep = pl::run_psnr_experiment(c);
      std::cout << "n_pos=" << rep.n_pos << " n_neg=" << rep.n_neg << '\n';
      std::cout << "mann_whitney_u=" << rep.mw.u << " p_value=" << rep.mw.p_value << '\n';
      std::cout << "best_threshold_accuracy=" << rep.best_accuracy << " (psnr "
                << rep.best_direction << ' ' << rep.best_threshold << ")\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "denspu: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
