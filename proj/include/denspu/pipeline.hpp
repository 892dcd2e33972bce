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

#pragma once

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "denspu/augmentation.hpp"
#include "denspu/autoencoder.hpp"
#include "denspu/classifier.hpp"
#include "denspu/core.hpp"
#include "denspu/dataset.hpp"
#include "denspu/io.hpp"
#include "denspu/isolation_forest.hpp"
#include "denspu/metrics.hpp"
#include "denspu/selection.hpp"

namespace denspu::pipeline {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration. One flat record drives every stage; it serializes to a
// key = value text file and back without loss, so a persisted config plus the
// seed reproduces a run bit for bit.
// ---------------------------------------------------------------------------

struct PipelineConfig {
  std::string profile = "desk";      // paper | desk (preset label only)

  // dataset
  std::string source = "synthetic";  // synthetic | idx | cifar10
  std::string generator = "blobs";   // synthetic source only
  std::string data_path;             // idx / cifar10 root directory
  std::vector<int> positive_class_ids{0, 2, 4, 6};
  int n_labeled = 100;
  int n_unlabeled = 1000;            // synthetic size of U
  int n_test = 400;
  double positive_fraction = 0.5;
  double noise = 0.5;
  int max_unlabeled = 0;             // subsample cap on U, 0 keeps all
  int resize_height = 0;             // 0 keeps the native image shape
  int resize_width = 0;
  int resize_channels = 0;

  autoencoder::CaeHyper cae;

  // augmentation; mode "none" skips the stage entirely (ablation rows)
  std::string augment_mode = "dens"; // none | dens | mixup | dens-latent
  double augment_k = 0.2;
  int pairs_per_labeled = 16;
  int samples_per_pair = 11;
  double mixup_alpha = 0.2;

  int forest_trees = 1000;
  int forest_subsample = 256;
  double contamination = 0.0;        // 0 selects |Z_L| / |Z_nu| automatically

  std::string rank_mode = "forest_score";
  std::string select_mode = "match_positives";

  classifier::ClassifierHyper clf;

  // "naive" trains the classifier on all of U as negatives and skips the
  // densify / detect / select stages (ablation baseline)
  std::string variant = "full";
  std::uint64_t seed = 42;
  std::string out_dir = "runs/denspu";
};

inline PipelineConfig default_config(const std::string& profile) {
  PipelineConfig c;
  c.profile = profile;
  if (profile == "paper") {
    // full-scale settings: grayscale 28x28 inputs are upscaled to 32x32x3,
    // the whole unlabeled pool is kept and module defaults stay at their
    // published values
    c.source = "idx";
    c.n_labeled = 1000;
    c.max_unlabeled = 0;
    c.resize_height = 32;
    c.resize_width = 32;
    c.resize_channels = 3;
    c.forest_trees = 1000;
    c.forest_subsample = 256;
  } else if (profile == "desk") {
    // single-core scale: procedural shape surrogate, U capped at 6000, a
    // narrow autoencoder and classifier, forest shrunk proportionally
    c.source = "synthetic";
    c.generator = "shapes";
    c.n_labeled = 1000;
    c.n_unlabeled = 6000;
    c.n_test = 1000;
    c.max_unlabeled = 6000;
    c.cae.epochs = 60;
    c.cae.batch_size = 64;
    c.cae.learning_rate = 1e-3;
    c.cae.weight_decay = 1e-4;
    // the latent equals the flattened third conv map (7x7x4 on 28x28x1
    // input), the same all-convolutional shape the full-scale profile uses
    c.cae.latent_dim = 196;
    c.cae.filters = {16, 8, 4};
    c.cae.dense_hidden = 32;
    c.forest_trees = 200;
    c.forest_subsample = 256;
    c.clf.epochs = 60;
    c.clf.batch_size = 32;
    c.clf.learning_rate = 5e-3;
    c.clf.momentum = 0.9;
    c.clf.weight_decay = 1e-4;
    c.clf.conv_filters0 = 8;
    c.clf.conv_filters1 = 16;
    c.clf.dense_hidden = 32;
    c.clf.head_hidden = 64;
    // with few references the distance rank separates the leftover tail
    // more reliably than forest scores, which saturate far from the data
    c.rank_mode = "min_distance";
  } else {
    fail("default_config: unknown profile '", profile, "' (expected paper or desk)");
  }
  return c;
}

namespace detail {

inline std::string ids_to_string(const std::vector<int>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(ids[i]);
  }
  return s;
}

inline std::vector<int> ids_from_string(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      fail("config key ", key, ": '", item, "' is not an integer");
    }
  }
  require(!out.empty(), "config key ", key, ": empty id list");
  return out;
}

inline long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long r = std::stoll(v, &pos);
    require(pos == v.size(), "config key ", key, ": trailing characters in '", v, "'");
    return r;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail("config key ", key, ": '", v, "' is not an integer");
  }
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double r = std::stod(v, &pos);
    require(pos == v.size(), "config key ", key, ": trailing characters in '", v, "'");
    return r;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail("config key ", key, ": '", v, "' is not a number");
  }
}

struct KeyBinding {
  const char* key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

inline const std::vector<KeyBinding>& config_bindings() {
  using C = PipelineConfig;
  auto str = [](std::string C::* f, const char* key) {
    return KeyBinding{key, [f](const C& c) { return c.*f; },
                      [f](C& c, const std::string& v) { c.*f = v; }};
  };
  auto num = [](auto C::* f, const char* key) {
    using F = std::remove_reference_t<decltype(std::declval<C>().*f)>;
    return KeyBinding{key, [f](const C& c) { return std::to_string(c.*f); },
                      [f, key](C& c, const std::string& v) { c.*f = static_cast<F>(to_int(key, v)); }};
  };
  auto dbl = [](double C::* f, const char* key) {
    return KeyBinding{key, [f](const C& c) { return io::csv_double(c.*f, 17); },
                      [f, key](C& c, const std::string& v) { c.*f = to_double(key, v); }};
  };
  static const std::vector<KeyBinding> bindings = {
      str(&C::profile, "profile"),
      str(&C::source, "dataset.source"),
      str(&C::generator, "dataset.generator"),
      str(&C::data_path, "dataset.path"),
      {"dataset.positive_class_ids",
       [](const C& c) { return ids_to_string(c.positive_class_ids); },
       [](C& c, const std::string& v) {
         c.positive_class_ids = ids_from_string("dataset.positive_class_ids", v);
       }},
      num(&C::n_labeled, "dataset.n_labeled"),
      num(&C::n_unlabeled, "dataset.n_unlabeled"),
      num(&C::n_test, "dataset.n_test"),
      dbl(&C::positive_fraction, "dataset.positive_fraction"),
      dbl(&C::noise, "dataset.noise"),
      num(&C::max_unlabeled, "dataset.max_unlabeled"),
      num(&C::resize_height, "dataset.resize_height"),
      num(&C::resize_width, "dataset.resize_width"),
      num(&C::resize_channels, "dataset.resize_channels"),
      {"cae.epochs", [](const C& c) { return std::to_string(c.cae.epochs); },
       [](C& c, const std::string& v) { c.cae.epochs = static_cast<int>(to_int("cae.epochs", v)); }},
      {"cae.batch_size", [](const C& c) { return std::to_string(c.cae.batch_size); },
       [](C& c, const std::string& v) {
         c.cae.batch_size = static_cast<int>(to_int("cae.batch_size", v));
       }},
      {"cae.learning_rate", [](const C& c) { return io::csv_double(c.cae.learning_rate, 17); },
       [](C& c, const std::string& v) { c.cae.learning_rate = to_double("cae.learning_rate", v); }},
      {"cae.weight_decay", [](const C& c) { return io::csv_double(c.cae.weight_decay, 17); },
       [](C& c, const std::string& v) { c.cae.weight_decay = to_double("cae.weight_decay", v); }},
      {"cae.latent_dim", [](const C& c) { return std::to_string(c.cae.latent_dim); },
       [](C& c, const std::string& v) {
         c.cae.latent_dim = static_cast<std::size_t>(to_int("cae.latent_dim", v));
       }},
      {"cae.filters0", [](const C& c) { return std::to_string(c.cae.filters[0]); },
       [](C& c, const std::string& v) {
         c.cae.filters[0] = static_cast<int>(to_int("cae.filters0", v));
       }},
      {"cae.filters1", [](const C& c) { return std::to_string(c.cae.filters[1]); },
       [](C& c, const std::string& v) {
         c.cae.filters[1] = static_cast<int>(to_int("cae.filters1", v));
       }},
      {"cae.filters2", [](const C& c) { return std::to_string(c.cae.filters[2]); },
       [](C& c, const std::string& v) {
         c.cae.filters[2] = static_cast<int>(to_int("cae.filters2", v));
       }},
      {"cae.kernel_size", [](const C& c) { return std::to_string(c.cae.kernel_size); },
       [](C& c, const std::string& v) {
         c.cae.kernel_size = static_cast<int>(to_int("cae.kernel_size", v));
       }},
      {"cae.dense_hidden", [](const C& c) { return std::to_string(c.cae.dense_hidden); },
       [](C& c, const std::string& v) {
         c.cae.dense_hidden = static_cast<std::size_t>(to_int("cae.dense_hidden", v));
       }},
      str(&C::augment_mode, "augment.mode"),
      dbl(&C::augment_k, "augment.k"),
      num(&C::pairs_per_labeled, "augment.pairs_per_labeled"),
      num(&C::samples_per_pair, "augment.samples_per_pair"),
      dbl(&C::mixup_alpha, "augment.mixup_alpha"),
      num(&C::forest_trees, "forest.n_trees"),
      num(&C::forest_subsample, "forest.subsample"),
      dbl(&C::contamination, "forest.contamination"),
      str(&C::rank_mode, "select.rank_mode"),
      str(&C::select_mode, "select.mode"),
      {"classifier.epochs", [](const C& c) { return std::to_string(c.clf.epochs); },
       [](C& c, const std::string& v) {
         c.clf.epochs = static_cast<int>(to_int("classifier.epochs", v));
       }},
      {"classifier.batch_size", [](const C& c) { return std::to_string(c.clf.batch_size); },
       [](C& c, const std::string& v) {
         c.clf.batch_size = static_cast<int>(to_int("classifier.batch_size", v));
       }},
      {"classifier.learning_rate",
       [](const C& c) { return io::csv_double(c.clf.learning_rate, 17); },
       [](C& c, const std::string& v) {
         c.clf.learning_rate = to_double("classifier.learning_rate", v);
       }},
      {"classifier.weight_decay",
       [](const C& c) { return io::csv_double(c.clf.weight_decay, 17); },
       [](C& c, const std::string& v) {
         c.clf.weight_decay = to_double("classifier.weight_decay", v);
       }},
      {"classifier.momentum", [](const C& c) { return io::csv_double(c.clf.momentum, 17); },
       [](C& c, const std::string& v) { c.clf.momentum = to_double("classifier.momentum", v); }},
      {"classifier.plateau_delta",
       [](const C& c) { return io::csv_double(c.clf.plateau_delta, 17); },
       [](C& c, const std::string& v) {
         c.clf.plateau_delta = to_double("classifier.plateau_delta", v);
       }},
      {"classifier.plateau_patience",
       [](const C& c) { return std::to_string(c.clf.plateau_patience); },
       [](C& c, const std::string& v) {
         c.clf.plateau_patience = static_cast<int>(to_int("classifier.plateau_patience", v));
       }},
      {"classifier.conv_filters0", [](const C& c) { return std::to_string(c.clf.conv_filters0); },
       [](C& c, const std::string& v) {
         c.clf.conv_filters0 = static_cast<int>(to_int("classifier.conv_filters0", v));
       }},
      {"classifier.conv_filters1", [](const C& c) { return std::to_string(c.clf.conv_filters1); },
       [](C& c, const std::string& v) {
         c.clf.conv_filters1 = static_cast<int>(to_int("classifier.conv_filters1", v));
       }},
      {"classifier.dense_hidden", [](const C& c) { return std::to_string(c.clf.dense_hidden); },
       [](C& c, const std::string& v) {
         c.clf.dense_hidden = static_cast<std::size_t>(to_int("classifier.dense_hidden", v));
       }},
      {"classifier.head_hidden", [](const C& c) { return std::to_string(c.clf.head_hidden); },
       [](C& c, const std::string& v) {
         c.clf.head_hidden = static_cast<std::size_t>(to_int("classifier.head_hidden", v));
       }},
      str(&C::variant, "variant"),
      {"seed", [](const C& c) { return std::to_string(c.seed); },
       [](C& c, const std::string& v) { c.seed = static_cast<std::uint64_t>(to_int("seed", v)); }},
      str(&C::out_dir, "out"),
  };
  return bindings;
}

inline const KeyBinding& binding_for(const std::string& key) {
  for (const auto& b : config_bindings())
    if (key == b.key) return b;
  fail("config: unknown key '", key, "'");
}

inline std::string trim(std::string s) {
  auto issp = [](unsigned char ch) { return std::isspace(ch) != 0; };
  while (!s.empty() && issp(s.front())) s.erase(s.begin());
  while (!s.empty() && issp(s.back())) s.pop_back();
  return s;
}

}  // namespace detail

inline std::string serialize_config(const PipelineConfig& c) {
  std::string out;
  for (const auto& b : detail::config_bindings()) {
    out += b.key;
    out += " = ";
    out += b.get(c);
    out += '\n';
  }
  return out;
}

/// Apply `key = value` lines onto `base`. '#' starts a comment, blank lines
/// are skipped and unknown keys are an error. A `profile` line resets every
/// field to that profile's defaults, so it belongs at the top of a file;
/// serialize_config writes it first.
inline PipelineConfig parse_config(const std::string& text, PipelineConfig base = {}) {
  PipelineConfig c = std::move(base);
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    require(eq != std::string::npos, "config line ", line_no, ": expected 'key = value', got '",
            line, "'");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (key == "profile")
      c = default_config(value);
    else
      detail::binding_for(key).set(c, value);
  }
  return c;
}

inline PipelineConfig load_config(const fs::path& path, PipelineConfig base = {}) {
  return parse_config(io::slurp(path), std::move(base));
}

inline void save_config(const fs::path& path, const PipelineConfig& c) {
  auto os = io::open_out(path);
  os << serialize_config(c);
  require(bool(os), "save_config: write failed: ", path.string());
}

/// Hash of the canonical serialization with the output directory blanked;
/// two configs with the same hash produce bit-identical artifacts.
inline std::string config_hash(const PipelineConfig& c) {
  PipelineConfig copy = c;
  copy.out_dir.clear();
  return hex64(fnv1a(serialize_config(copy)));
}

inline std::string dataset_name(const PipelineConfig& c) {
  return c.source == "synthetic" ? c.generator : c.source;
}

inline std::string variant_name(const PipelineConfig& c) {
  if (c.variant == "naive") return "naive";
  return c.augment_mode + "+" + c.select_mode;
}

inline void validate_config(const PipelineConfig& c) {
  require(c.source == "synthetic" || c.source == "idx" || c.source == "cifar10",
          "config: unknown dataset.source '", c.source, "'");
  if (c.source == "synthetic")
    require(c.generator == "blobs" || c.generator == "rings" || c.generator == "shapes",
            "config: unknown dataset.generator '", c.generator, "'");
  else
    require(!c.data_path.empty(), "config: dataset.path required for source ", c.source);
  require(c.variant == "full" || c.variant == "naive", "config: unknown variant '", c.variant,
          "'");
  require(c.n_labeled > 0, "config: dataset.n_labeled must be positive");
  require(c.positive_fraction > 0.0 && c.positive_fraction < 1.0,
          "config: dataset.positive_fraction must lie in (0,1)");
  if (c.augment_mode != "none") parse_augment_mode(c.augment_mode);
  require(c.pairs_per_labeled >= 1, "config: augment.pairs_per_labeled must be positive");
  require(c.samples_per_pair >= 1, "config: augment.samples_per_pair must be positive");
  require(c.forest_trees >= 1, "config: forest.n_trees must be positive");
  require(c.forest_subsample >= 2, "config: forest.subsample must be at least 2");
  require(c.contamination >= 0.0 && c.contamination < 1.0,
          "config: forest.contamination must lie in [0,1)");
  selection::rank_mode_from_string(c.rank_mode);
  selection::select_mode_from_string(c.select_mode);
  require(!c.out_dir.empty(), "config: out directory must be set");
}

// ---------------------------------------------------------------------------
// Artifact layout of one run directory.
// ---------------------------------------------------------------------------

struct RunPaths {
  fs::path root;
  explicit RunPaths(const PipelineConfig& c) : root(c.out_dir) {}

  fs::path config_file() const { return root / "config.txt"; }
  fs::path pos_images() const { return root / "data" / "positive_labeled.dpui"; }
  fs::path unl_images() const { return root / "data" / "unlabeled.dpui"; }
  fs::path test_images() const { return root / "data" / "test.dpui"; }
  fs::path truth_csv() const { return root / "eval" / "unlabeled_truth.csv"; }
  fs::path cae_model() const { return root / "model" / "cae.dpua"; }
  fs::path cae_loss_csv() const { return root / "model" / "cae_loss.csv"; }
  fs::path z_pos() const { return root / "latent" / "z_pos.dpu1"; }
  fs::path z_unl() const { return root / "latent" / "z_unl.dpu1"; }
  fs::path z_dens() const { return root / "latent" / "z_dens.dpu1"; }
  fs::path provenance_csv() const { return root / "latent" / "provenance.csv"; }
  fs::path forest_file() const { return root / "model" / "forest.dpuf"; }
  fs::path scores_csv() const { return root / "select" / "scores.csv"; }
  fs::path negatives_csv() const { return root / "select" / "negatives.csv"; }
  fs::path clf_model() const { return root / "model" / "classifier.dpuc"; }
  fs::path clf_loss_csv() const { return root / "model" / "classifier_loss.csv"; }
  fs::path predictions_csv() const { return root / "eval" / "predictions.csv"; }
  fs::path metrics_csv() const { return root / "eval" / "metrics.csv"; }
  fs::path roc_csv() const { return root / "eval" / "roc.csv"; }
  fs::path report_json() const { return root / "eval" / "report.json"; }
  fs::path timings_csv() const { return root / "timings.csv"; }
  fs::path psnr_values_csv() const { return root / "psnr" / "values.csv"; }
  fs::path psnr_hist_csv() const { return root / "psnr" / "histogram.csv"; }
  fs::path psnr_report_json() const { return root / "psnr" / "report.json"; }

  /// Deterministic artifacts of a full pipeline run, relative to root.
  /// timings.csv is deliberately absent: wall-clock times are the one output
  /// allowed to differ between reruns.
  std::vector<fs::path> run_artifacts(const PipelineConfig& c) const {
    std::vector<fs::path> out = {config_file(),  pos_images(),      unl_images(),
                                 test_images(),  truth_csv(),       cae_model(),
                                 cae_loss_csv(), z_pos(),           z_unl(),
                                 clf_model(),    clf_loss_csv(),    predictions_csv(),
                                 metrics_csv(),  roc_csv(),         report_json()};
    if (c.variant != "naive") {
      out.insert(out.end(), {z_dens(), provenance_csv(), forest_file(), scores_csv(),
                             negatives_csv()});
    }
    return out;
  }
};

namespace detail {

inline void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

inline std::uint64_t stage_seed(const PipelineConfig& c, std::string_view stage) {
  return mix_seed(c.seed, fnv1a(stage));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Report record and the metrics CSV / JSON writers.
// ---------------------------------------------------------------------------

struct PipelineReport {
  MetricsRecord metrics;
  std::size_t n_unlabeled = 0;
  std::size_t n_recovered = 0;   // predicted inliers recovered as positives
  std::size_t n_leftovers = 0;
  std::size_t n_selected = 0;    // confident negatives
  double neg_purity = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::pair<std::string, double>> stage_seconds;
  std::string config_hash;
  std::string dataset;
  std::string variant;
  std::uint64_t seed = 0;
};

struct MetricsRow {
  std::string dataset;
  std::string variant;
  std::uint64_t seed = 0;
  MetricsRecord metrics;
};

inline void write_metrics_csv(const fs::path& path, std::span<const MetricsRow> rows) {
  detail::ensure_parent(path);
  io::CsvWriter csv(path);
  csv.row({"dataset", "variant", "seed", "acc", "prec", "rec", "f1", "auc"});
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    csv.row({r.dataset, r.variant, std::to_string(r.seed), io::csv_double(m.accuracy, 17),
             io::csv_double(m.precision, 17), io::csv_double(m.recall, 17),
             io::csv_double(m.f1, 17),
             io::csv_double(m.auc.value_or(std::numeric_limits<double>::quiet_NaN()), 17)});
  }
}

/// Threshold sweep of (false positive rate, true positive rate) points,
/// from (0,0) at threshold above every score down to (1,1).
inline void write_roc_csv(const fs::path& path, std::span<const int> truth,
                          std::span<const double> scores) {
  require(truth.size() == scores.size(), "write_roc_csv: length mismatch");
  detail::ensure_parent(path);
  std::vector<std::size_t> order(truth.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double total_p = 0, total_n = 0;
  for (int t : truth) (t == 1 ? total_p : total_n) += 1.0;

  io::CsvWriter csv(path);
  csv.row({"threshold", "fpr", "tpr"});
  double tp = 0, fp = 0;
  csv.row({"inf", "0", "0"});
  for (std::size_t k = 0; k < order.size(); ++k) {
    (truth[order[k]] == 1 ? tp : fp) += 1.0;
    // emit a point only after consuming every sample tied at this score
    if (k + 1 < order.size() && scores[order[k + 1]] == scores[order[k]]) continue;
    csv.row({io::csv_double(scores[order[k]], 17),
             io::csv_double(total_n > 0 ? fp / total_n : 0.0, 17),
             io::csv_double(total_p > 0 ? tp / total_p : 0.0, 17)});
  }
}

// ---------------------------------------------------------------------------
// In-memory stage computations. The file-driven stages below and the ablation
// harness both call these, so every path runs the same logic.
// ---------------------------------------------------------------------------

namespace detail {

inline ImageSet maybe_resize(const PipelineConfig& c, const ImageSet& images) {
  if (c.resize_height <= 0) return images;
  return dataset::preprocess(images, c.resize_height, c.resize_width, c.resize_channels);
}

inline dataset::PUSplit prepare_split(const PipelineConfig& c) {
  dataset::PUSplit split;
  if (c.source == "synthetic") {
    dataset::SyntheticSpec s;
    s.generator = c.generator;
    s.n_labeled = c.n_labeled;
    s.n_unlabeled = c.n_unlabeled;
    s.n_test = c.n_test;
    s.positive_fraction = c.positive_fraction;
    s.noise = c.noise;
    split = dataset::gen_synthetic(s, c.seed);
  } else {
    ImageSet train, test;
    fs::path dir(c.data_path);
    if (c.source == "idx") {
      train = dataset::load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
      test = dataset::load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
    } else {
      std::vector<fs::path> batches;
      for (int b = 1; b <= 5; ++b) batches.push_back(dir / ("data_batch_" + std::to_string(b) + ".bin"));
      train = dataset::load_cifar10(batches);
      test = dataset::load_cifar10({dir / "test_batch.bin"});
    }
    std::set<int> pos(c.positive_class_ids.begin(), c.positive_class_ids.end());
    split = dataset::make_pu_split(train, pos, c.n_labeled, test, c.seed);
  }
  if (c.max_unlabeled > 0) dataset::subsample_unlabeled(split, c.max_unlabeled, c.seed);
  split.positive_labeled = maybe_resize(c, split.positive_labeled);
  split.unlabeled = maybe_resize(c, split.unlabeled);
  split.test = maybe_resize(c, split.test);
  return split;
}

inline std::pair<autoencoder::AutoencoderModel, autoencoder::TrainReport> train_cae_mem(
    const PipelineConfig& c, const ImageSet& positives) {
  return autoencoder::train_cae(positives, c.cae, stage_seed(c, "stage_cae"));
}

/// Generated embeddings for the configured augmentation mode; an empty set
/// (0 rows, latent-width columns) when the mode is "none". The pair budget
/// is pairs_per_labeled * |P_L|, clamped to the number of distinct pairs.
inline EmbeddingSet densify_mem(const PipelineConfig& c, const EncodingMatrix& z_pos) {
  EmbeddingSet out;
  if (c.augment_mode == "none") {
    out.embeddings = EncodingMatrix(0, z_pos.cols);
    return out;
  }
  const std::uint64_t distinct =
      static_cast<std::uint64_t>(z_pos.rows) * (z_pos.rows - 1) / 2;
  AugmentationSpec spec;
  spec.mode = parse_augment_mode(c.augment_mode);
  spec.k = c.augment_k;
  spec.n_pairs = static_cast<std::size_t>(
      std::min<std::uint64_t>(static_cast<std::uint64_t>(c.pairs_per_labeled) * z_pos.rows,
                              distinct));
  spec.samples_per_pair = static_cast<std::size_t>(c.samples_per_pair);
  spec.mixup_alpha = c.mixup_alpha;
  spec.seed = stage_seed(c, "stage_densify");
  return densify(z_pos, spec);
}

/// Contamination value in force for this config: the explicit override when
/// set, otherwise |Z_L| / |Z_nu|. When no embeddings exist (mode "none") the
/// intended |Z_nu| from the config keeps the value on the same scale.
inline double contamination_for(const PipelineConfig& c, std::size_t n_pos,
                                std::size_t n_embeddings) {
  if (c.contamination > 0.0) return c.contamination;
  std::size_t denom_pairs = n_embeddings > 0
                                ? n_embeddings / static_cast<std::size_t>(c.samples_per_pair)
                                : static_cast<std::size_t>(c.pairs_per_labeled) * n_pos;
  return contamination_fraction(n_pos, denom_pairs, static_cast<std::size_t>(c.samples_per_pair));
}

inline std::pair<IsolationForest, AnomalyPartition> detect_mem(const PipelineConfig& c,
                                                               const EncodingMatrix& z_pos,
                                                               const EncodingMatrix& z_dens,
                                                               const EncodingMatrix& z_unl) {
  EncodingMatrix fitting = z_pos.concat(z_dens);
  IsolationForest forest =
      build_forest(fitting, static_cast<std::size_t>(c.forest_trees),
                   static_cast<std::size_t>(c.forest_subsample), stage_seed(c, "stage_forest"));
  fit_threshold(forest, fitting, contamination_for(c, z_pos.rows, z_dens.rows));
  AnomalyPartition part = partition_unlabeled(forest, z_unl);
  return {std::move(forest), std::move(part)};
}

inline selection::RankedLeftovers rank_mem(const PipelineConfig& c, const AnomalyPartition& part,
                                           const EncodingMatrix& z_unl,
                                           const EncodingMatrix& z_pos) {
  auto mode = selection::rank_mode_from_string(c.rank_mode);
  EncodingMatrix reference;
  if (mode == selection::RankMode::min_distance)
    reference = z_pos.concat(z_unl.select(part.inlier_ids));
  return selection::rank_leftovers(part, z_unl, reference, mode);
}

inline std::vector<std::size_t> select_mem(const PipelineConfig& c,
                                           const selection::RankedLeftovers& ranked,
                                           std::size_t n_positives) {
  return selection::select_negatives(ranked, selection::select_mode_from_string(c.select_mode),
                                     n_positives, stage_seed(c, "stage_select"));
}

inline std::pair<classifier::BinaryClassifier, classifier::FitReport> train_clf_mem(
    const PipelineConfig& c, const ImageSet& positives, const ImageSet& negatives) {
  return classifier::train_classifier(positives, negatives, c.clf,
                                      stage_seed(c, "stage_classifier"));
}

inline std::vector<int> to_int_ids(std::span<const std::size_t> ids) {
  std::vector<int> out(ids.size());
  for (std::size_t k = 0; k < ids.size(); ++k) out[k] = static_cast<int>(ids[k]);
  return out;
}

/// Metrics, counts and purity for a trained classifier. `selected` holds the
/// negative-set ids into U and `truth` the hidden labels of U (empty when
/// unavailable). Probabilities are returned through probs_out when the caller
/// needs them for prediction or ROC dumps.
inline PipelineReport evaluate_mem(const PipelineConfig& c, const classifier::BinaryClassifier& clf,
                                   const ImageSet& test, std::size_t n_unlabeled,
                                   std::size_t n_recovered, std::size_t n_leftovers,
                                   std::span<const std::size_t> selected,
                                   std::span<const int> truth,
                                   std::vector<double>* probs_out = nullptr) {
  require(test.has_labels(), "evaluate: test set carries no labels");
  std::vector<double> probs = classifier::predict(clf, test);
  std::vector<int> predicted(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) predicted[i] = classifier::label_of(probs[i]);

  PipelineReport rep;
  rep.metrics = classification_metrics(test.labels, predicted);
  rep.metrics.auc = auc(test.labels, probs);
  rep.n_unlabeled = n_unlabeled;
  rep.n_recovered = n_recovered;
  rep.n_leftovers = n_leftovers;
  rep.n_selected = selected.size();
  if (!truth.empty() && !selected.empty()) rep.neg_purity = negative_purity(selected, truth);
  rep.config_hash = config_hash(c);
  rep.dataset = dataset_name(c);
  rep.variant = variant_name(c);
  rep.seed = c.seed;
  if (probs_out) *probs_out = std::move(probs);
  return rep;
}

/// One full run without touching the filesystem; the reuse-heavy ablation
/// sweeps are built from the same pieces.
inline PipelineReport run_mem(const PipelineConfig& c) {
  auto split = prepare_split(c);
  auto truth = split.unlabeled_truth(dataset::EvalAccess{});
  auto [cae, cae_rep] = train_cae_mem(c, split.positive_labeled);
  std::size_t n_unl = static_cast<std::size_t>(split.unlabeled.n);

  if (c.variant == "naive") {
    std::vector<std::size_t> all(n_unl);
    std::iota(all.begin(), all.end(), std::size_t{0});
    auto [clf, clf_rep] = train_clf_mem(c, split.positive_labeled, split.unlabeled);
    return evaluate_mem(c, clf, split.test, n_unl, 0, n_unl, all, truth);
  }

  auto z_pos = autoencoder::encode(cae, split.positive_labeled);
  auto z_unl = autoencoder::encode(cae, split.unlabeled);
  auto dens = densify_mem(c, z_pos);
  auto [forest, part] = detect_mem(c, z_pos, dens.embeddings, z_unl);
  auto ranked = rank_mem(c, part, z_unl, z_pos);
  auto selected = select_mem(c, ranked, z_pos.rows);
  auto negatives = split.unlabeled.select(to_int_ids(selected));
  auto [clf, clf_rep] = train_clf_mem(c, split.positive_labeled, negatives);
  return evaluate_mem(c, clf, split.test, n_unl, part.inlier_ids.size(), part.leftover_ids.size(),
                      selected, truth);
}

inline void write_loss_csv(const fs::path& path, std::span<const double> total,
                           std::span<const double> recon = {},
                           std::span<const double> reg = {}) {
  ensure_parent(path);
  io::CsvWriter csv(path);
  if (recon.empty()) {
    csv.row({"epoch", "total_loss"});
    for (std::size_t e = 0; e < total.size(); ++e)
      csv.row({std::to_string(e + 1), io::csv_double(total[e], 17)});
  } else {
    csv.row({"epoch", "total_loss", "recon_loss", "reg_loss"});
    for (std::size_t e = 0; e < total.size(); ++e)
      csv.row({std::to_string(e + 1), io::csv_double(total[e], 17),
               io::csv_double(recon[e], 17), io::csv_double(reg[e], 17)});
  }
}

inline void write_truth_csv(const fs::path& path, std::span<const int> truth) {
  ensure_parent(path);
  io::CsvWriter csv(path);
  csv.row({"sample_id", "label"});
  for (std::size_t i = 0; i < truth.size(); ++i)
    csv.row({std::to_string(i), std::to_string(truth[i])});
}

inline std::vector<int> read_truth_csv(const fs::path& path) {
  auto rows = io::read_csv(path);
  require(!rows.empty() && rows[0].size() == 2, "truth csv: malformed ", path.string());
  std::vector<int> truth;
  for (std::size_t r = 1; r < rows.size(); ++r)
    truth.push_back(static_cast<int>(to_int("truth", rows[r][1])));
  return truth;
}

/// Ids whose selected_flag column is 1, in ascending order.
inline std::vector<std::size_t> read_selected_ids(const fs::path& path) {
  auto rows = io::read_csv(path);
  require(!rows.empty() && rows[0].size() == 3, "negatives csv: malformed ", path.string());
  std::vector<std::size_t> ids;
  for (std::size_t r = 1; r < rows.size(); ++r)
    if (rows[r][2] == "1") ids.push_back(static_cast<std::size_t>(to_int("sample_id", rows[r][0])));
  std::sort(ids.begin(), ids.end());
  return ids;
}

inline std::pair<std::size_t, std::size_t> read_partition_counts(const fs::path& path) {
  auto rows = io::read_csv(path);
  require(!rows.empty() && rows[0].size() == 3, "scores csv: malformed ", path.string());
  std::size_t flagged = 0;
  for (std::size_t r = 1; r < rows.size(); ++r)
    if (rows[r][2] == "1") ++flagged;
  return {rows.size() - 1 - flagged, flagged};  // inliers, leftovers
}

}  // namespace detail

// ---------------------------------------------------------------------------
// File-driven stages. Each one loads its inputs from the run directory,
// computes and persists its outputs, so running the subcommands one by one
// writes exactly the bytes the one-shot pipeline writes.
// ---------------------------------------------------------------------------

inline void write_run_config(const PipelineConfig& c) {
  RunPaths p(c);
  detail::ensure_parent(p.config_file());
  save_config(p.config_file(), c);
}

inline void stage_prepare_data(const PipelineConfig& c) {
  RunPaths p(c);
  write_run_config(c);
  auto split = detail::prepare_split(c);
  detail::ensure_parent(p.pos_images());
  io::write_images(p.pos_images(), split.positive_labeled);
  io::write_images(p.unl_images(), split.unlabeled);
  io::write_images(p.test_images(), split.test);
  detail::write_truth_csv(p.truth_csv(), split.unlabeled_truth(dataset::EvalAccess{}));
}

inline void stage_train_cae(const PipelineConfig& c) {
  RunPaths p(c);
  auto positives = io::read_images(p.pos_images());
  auto [model, report] = detail::train_cae_mem(c, positives);
  detail::ensure_parent(p.cae_model());
  autoencoder::save_autoencoder(p.cae_model(), model);
  detail::write_loss_csv(p.cae_loss_csv(), report.total_loss, report.recon_loss,
                         report.reg_loss);
}

inline void stage_encode(const PipelineConfig& c) {
  RunPaths p(c);
  auto model = autoencoder::load_autoencoder(p.cae_model());
  detail::ensure_parent(p.z_pos());
  io::write_matrix(p.z_pos(), autoencoder::encode(model, io::read_images(p.pos_images())));
  io::write_matrix(p.z_unl(), autoencoder::encode(model, io::read_images(p.unl_images())));
}

inline void stage_densify(const PipelineConfig& c) {
  if (c.variant == "naive") return;
  RunPaths p(c);
  auto z_pos = io::read_matrix(p.z_pos());
  EmbeddingSet dens = detail::densify_mem(c, z_pos);
  detail::ensure_parent(p.z_dens());
  io::write_matrix(p.z_dens(), dens.embeddings);
  write_provenance_csv(p.provenance_csv(), dens);
}

inline void stage_detect(const PipelineConfig& c) {
  if (c.variant == "naive") return;
  RunPaths p(c);
  auto z_pos = io::read_matrix(p.z_pos());
  auto z_dens = io::read_matrix(p.z_dens());
  auto z_unl = io::read_matrix(p.z_unl());
  auto [forest, part] = detail::detect_mem(c, z_pos, z_dens, z_unl);
  detail::ensure_parent(p.forest_file());
  save_forest(p.forest_file(), forest);
  detail::ensure_parent(p.scores_csv());
  write_scores_csv(p.scores_csv(), part.scores, forest.threshold);
}

inline void stage_select_negatives(const PipelineConfig& c) {
  if (c.variant == "naive") return;
  RunPaths p(c);
  auto forest = load_forest(p.forest_file());
  auto z_pos = io::read_matrix(p.z_pos());
  auto z_unl = io::read_matrix(p.z_unl());
  auto part = partition_unlabeled(forest, z_unl);
  auto ranked = detail::rank_mem(c, part, z_unl, z_pos);
  auto selected = detail::select_mem(c, ranked, z_pos.rows);
  detail::ensure_parent(p.negatives_csv());
  selection::write_negatives_csv(p.negatives_csv(), ranked, selected);
}

inline void stage_train_classifier(const PipelineConfig& c) {
  RunPaths p(c);
  auto positives = io::read_images(p.pos_images());
  auto unlabeled = io::read_images(p.unl_images());
  ImageSet negatives;
  if (c.variant == "naive") {
    negatives = unlabeled;
  } else {
    auto ids = detail::read_selected_ids(p.negatives_csv());
    require(!ids.empty(), "train-classifier: negative set is empty");
    negatives = unlabeled.select(detail::to_int_ids(ids));
  }
  auto [model, report] = detail::train_clf_mem(c, positives, negatives);
  detail::ensure_parent(p.clf_model());
  classifier::save_classifier(p.clf_model(), model);
  detail::write_loss_csv(p.clf_loss_csv(), report.total_loss);
}

inline PipelineReport stage_evaluate(const PipelineConfig& c) {
  RunPaths p(c);
  auto clf = classifier::load_classifier(p.clf_model());
  auto test = io::read_images(p.test_images());
  auto n_unl = static_cast<std::size_t>(io::read_images(p.unl_images()).n);

  std::size_t n_recovered = 0, n_leftovers = n_unl;
  std::vector<std::size_t> selected;
  if (c.variant == "naive") {
    selected.resize(n_unl);
    std::iota(selected.begin(), selected.end(), std::size_t{0});
  } else {
    std::tie(n_recovered, n_leftovers) = detail::read_partition_counts(p.scores_csv());
    selected = detail::read_selected_ids(p.negatives_csv());
  }
  std::vector<int> truth;
  if (fs::exists(p.truth_csv())) truth = detail::read_truth_csv(p.truth_csv());

  std::vector<double> probs;
  PipelineReport rep =
      detail::evaluate_mem(c, clf, test, n_unl, n_recovered, n_leftovers, selected, truth, &probs);

  detail::ensure_parent(p.predictions_csv());
  classifier::write_predictions_csv(p.predictions_csv(), probs);
  write_roc_csv(p.roc_csv(), test.labels, probs);
  MetricsRow row{rep.dataset, rep.variant, rep.seed, rep.metrics};
  write_metrics_csv(p.metrics_csv(), std::span<const MetricsRow>(&row, 1));

  nlohmann::ordered_json j;
  j["config_hash"] = rep.config_hash;
  j["dataset"] = rep.dataset;
  j["variant"] = rep.variant;
  j["seed"] = rep.seed;
  j["counts"] = {{"unlabeled", rep.n_unlabeled},
                 {"recovered", rep.n_recovered},
                 {"leftovers", rep.n_leftovers},
                 {"selected", rep.n_selected}};
  if (std::isnan(rep.neg_purity))
    j["negative_purity"] = nullptr;
  else
    j["negative_purity"] = rep.neg_purity;
  j["metrics"] = {{"accuracy", rep.metrics.accuracy}, {"precision", rep.metrics.precision},
                  {"recall", rep.metrics.recall},     {"f1", rep.metrics.f1},
                  {"auc", rep.metrics.auc.value()},   {"tp", rep.metrics.tp},
                  {"fp", rep.metrics.fp},             {"tn", rep.metrics.tn},
                  {"fn", rep.metrics.fn}};
  auto os = io::open_out(p.report_json());
  os << j.dump(2) << '\n';
  require(bool(os), "stage_evaluate: write failed: ", p.report_json().string());
  return rep;
}

/// The six-step batch run: prepare, autoencode, encode, densify, detect plus
/// select, classify, evaluate. Every stage persists its artifacts; a failure
/// aborts with the stage name while earlier artifacts stay on disk.
inline PipelineReport run_pipeline(const PipelineConfig& c) {
  validate_config(c);
  PipelineReport rep;
  std::vector<std::pair<std::string, double>> seconds;
  auto timed = [&](const char* name, auto&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    try {
      fn();
    } catch (const std::exception& e) {
      fail("stage ", name, ": ", e.what());
    }
    seconds.emplace_back(name, std::chrono::duration<double>(
                                   std::chrono::steady_clock::now() - t0).count());
  };
  timed("prepare-data", [&] { stage_prepare_data(c); });
  timed("train-cae", [&] { stage_train_cae(c); });
  timed("encode", [&] { stage_encode(c); });
  timed("densify", [&] { stage_densify(c); });
  timed("detect", [&] { stage_detect(c); });
  timed("select-negatives", [&] { stage_select_negatives(c); });
  timed("train-classifier", [&] { stage_train_classifier(c); });
  timed("evaluate", [&] { rep = stage_evaluate(c); });

  rep.stage_seconds = seconds;
  RunPaths p(c);
  io::CsvWriter csv(p.timings_csv());
  csv.row({"stage", "seconds"});
  for (const auto& [name, secs] : seconds) csv.row({name, io::csv_double(secs, 6)});
  return rep;
}

// ---------------------------------------------------------------------------
// Ablation sweeps. Upstream artifacts (split, autoencoder, encodings, and
// where possible embeddings and forest) are computed once per seed and shared
// across the cells that only differ downstream.
// ---------------------------------------------------------------------------

struct AblationCell {
  std::string name;
  std::vector<PipelineReport> runs;      // one per seed
  double mean_f1 = 0.0;
  double std_f1 = 0.0;
  double mean_accuracy = 0.0;
  double mean_auc = 0.0;
  double mean_purity = std::numeric_limits<double>::quiet_NaN();
};

struct AblationTable {
  std::string sweep;
  std::string dataset;
  std::vector<std::uint64_t> seeds;
  std::vector<AblationCell> cells;
};

namespace detail {

inline void finish_cell(AblationCell& cell) {
  const double n = static_cast<double>(cell.runs.size());
  cell.mean_purity = std::numeric_limits<double>::quiet_NaN();
  double purity_sum = 0.0;
  std::size_t purity_n = 0;
  for (const auto& r : cell.runs) {
    cell.mean_f1 += r.metrics.f1 / n;
    cell.mean_accuracy += r.metrics.accuracy / n;
    cell.mean_auc += r.metrics.auc.value_or(0.0) / n;
    if (!std::isnan(r.neg_purity)) {
      purity_sum += r.neg_purity;
      ++purity_n;
    }
  }
  if (purity_n > 0) cell.mean_purity = purity_sum / static_cast<double>(purity_n);
  if (cell.runs.size() > 1) {
    double ss = 0.0;
    for (const auto& r : cell.runs) {
      double d = r.metrics.f1 - cell.mean_f1;
      ss += d * d;
    }
    cell.std_f1 = std::sqrt(ss / (n - 1.0));
  }
}

/// The seven rows of the variant sweep, upstream-sharing aware: cells are
/// grouped by augmentation mode so embeddings and forest are built once per
/// mode, and the naive baseline skips the detector entirely.
inline void ablation_variant_seed(const PipelineConfig& base, std::uint64_t seed,
                                  AblationTable& table) {
  PipelineConfig c = base;
  c.seed = seed;
  c.variant = "full";
  auto split = prepare_split(c);
  auto truth = split.unlabeled_truth(dataset::EvalAccess{});
  std::size_t n_unl = static_cast<std::size_t>(split.unlabeled.n);
  auto [cae, cae_rep] = train_cae_mem(c, split.positive_labeled);
  auto z_pos = autoencoder::encode(cae, split.positive_labeled);
  auto z_unl = autoencoder::encode(cae, split.unlabeled);

  std::size_t cell_idx = 0;
  {
    PipelineConfig naive = c;
    naive.variant = "naive";
    std::vector<std::size_t> all(n_unl);
    std::iota(all.begin(), all.end(), std::size_t{0});
    auto [clf, fit] = train_clf_mem(naive, split.positive_labeled, split.unlabeled);
    table.cells[cell_idx++].runs.push_back(
        evaluate_mem(naive, clf, split.test, n_unl, 0, n_unl, all, truth));
  }
  for (const char* mode : {"none", "mixup", "dens"}) {
    PipelineConfig mc = c;
    mc.augment_mode = mode;
    auto dens = densify_mem(mc, z_pos);
    auto [forest, part] = detect_mem(mc, z_pos, dens.embeddings, z_unl);
    auto ranked = rank_mem(mc, part, z_unl, z_pos);
    for (const char* select : {"random_matched", "match_positives"}) {
      PipelineConfig sc = mc;
      sc.select_mode = select;
      auto selected = select_mem(sc, ranked, z_pos.rows);
      auto negatives = split.unlabeled.select(to_int_ids(selected));
      auto [clf, fit] = train_clf_mem(sc, split.positive_labeled, negatives);
      table.cells[cell_idx++].runs.push_back(
          evaluate_mem(sc, clf, split.test, n_unl, part.inlier_ids.size(),
                       part.leftover_ids.size(), selected, truth));
    }
  }
}

inline void ablation_population_seed(const PipelineConfig& base, std::uint64_t seed,
                                     AblationTable& table) {
  PipelineConfig c = base;
  c.seed = seed;
  c.variant = "full";
  auto split = prepare_split(c);
  auto truth = split.unlabeled_truth(dataset::EvalAccess{});
  std::size_t n_unl = static_cast<std::size_t>(split.unlabeled.n);
  auto [cae, cae_rep] = train_cae_mem(c, split.positive_labeled);
  auto z_pos = autoencoder::encode(cae, split.positive_labeled);
  auto z_unl = autoencoder::encode(cae, split.unlabeled);
  auto dens = densify_mem(c, z_pos);
  auto [forest, part] = detect_mem(c, z_pos, dens.embeddings, z_unl);
  auto ranked = rank_mem(c, part, z_unl, z_pos);

  std::size_t cell_idx = 0;
  for (const char* select : {"match_positives", "all_leftovers", "random_count"}) {
    PipelineConfig sc = c;
    sc.select_mode = select;
    auto selected = select_mem(sc, ranked, z_pos.rows);
    auto negatives = split.unlabeled.select(to_int_ids(selected));
    auto [clf, fit] = train_clf_mem(sc, split.positive_labeled, negatives);
    table.cells[cell_idx++].runs.push_back(
        evaluate_mem(sc, clf, split.test, n_unl, part.inlier_ids.size(),
                     part.leftover_ids.size(), selected, truth));
  }
}

}  // namespace detail

/// Sweep one axis and repeat every cell over `n_seeds` consecutive seeds
/// starting at base.seed. Writes ablation_<sweep>.csv (one row per cell and
/// seed) and ablation_<sweep>.json (per-cell mean and std) under base.out_dir.
inline AblationTable run_ablation(const PipelineConfig& base, const std::string& sweep,
                                  int n_seeds = 3) {
  validate_config(base);
  require(n_seeds >= 1, "run_ablation: n_seeds must be positive");
  AblationTable table;
  table.sweep = sweep;
  table.dataset = dataset_name(base);
  for (int i = 0; i < n_seeds; ++i) table.seeds.push_back(base.seed + static_cast<std::uint64_t>(i));

  if (sweep == "variant") {
    for (const char* name : {"naive", "none+random_matched", "none+match_positives",
                             "mixup+random_matched", "mixup+match_positives",
                             "dens+random_matched", "dens+match_positives"})
      table.cells.push_back({name, {}, 0, 0, 0, 0, 0});
    for (std::uint64_t seed : table.seeds) detail::ablation_variant_seed(base, seed, table);
  } else if (sweep == "population") {
    for (const char* name : {"match_positives", "all_leftovers", "random_count"})
      table.cells.push_back({name, {}, 0, 0, 0, 0, 0});
    for (std::uint64_t seed : table.seeds) detail::ablation_population_seed(base, seed, table);
  } else if (sweep == "labeled_fraction") {
    // fractions of the configured n_labeled, which acts as the 100% pool
    const double fractions[] = {0.01, 0.05, 0.10, 0.25, 0.30, 0.50};
    for (double f : fractions) {
      AblationCell cell;
      cell.name = io::csv_double(f * 100.0, 6) + "%";
      PipelineConfig c = base;
      c.n_labeled = std::max(2, static_cast<int>(std::lround(f * base.n_labeled)));
      for (std::uint64_t seed : table.seeds) {
        c.seed = seed;
        cell.runs.push_back(detail::run_mem(c));
      }
      table.cells.push_back(std::move(cell));
    }
  } else {
    fail("run_ablation: unknown sweep '", sweep, "' (labeled_fraction | variant | population)");
  }

  std::vector<MetricsRow> rows;
  for (auto& cell : table.cells) {
    detail::finish_cell(cell);
    for (const auto& r : cell.runs)
      rows.push_back({table.dataset, cell.name, r.seed, r.metrics});
  }

  fs::path root(base.out_dir);
  fs::create_directories(root);
  write_metrics_csv(root / ("ablation_" + sweep + ".csv"), rows);

  nlohmann::ordered_json j;
  j["sweep"] = table.sweep;
  j["dataset"] = table.dataset;
  j["seeds"] = table.seeds;
  j["cells"] = nlohmann::ordered_json::array();
  for (const auto& cell : table.cells) {
    nlohmann::ordered_json cj;
    cj["name"] = cell.name;
    cj["f1"] = nlohmann::ordered_json::array();
    for (const auto& r : cell.runs) cj["f1"].push_back(r.metrics.f1);
    cj["mean_f1"] = cell.mean_f1;
    cj["std_f1"] = cell.std_f1;
    cj["mean_accuracy"] = cell.mean_accuracy;
    cj["mean_auc"] = cell.mean_auc;
    if (std::isnan(cell.mean_purity))
      cj["mean_negative_purity"] = nullptr;
    else
      cj["mean_negative_purity"] = cell.mean_purity;
    j["cells"].push_back(std::move(cj));
  }
  auto os = io::open_out(root / ("ablation_" + sweep + ".json"));
  os << j.dump(2) << '\n';
  require(bool(os), "run_ablation: report write failed");
  return table;
}

// ---------------------------------------------------------------------------
// Reconstruction-quality experiment: is PSNR against a positives-only
// autoencoder already a usable classifier? The dumps show the distributions
// differ, the threshold accuracy shows the gap is not separable enough.
// ---------------------------------------------------------------------------

struct PsnrReport {
  MannWhitneyResult mw;
  double best_threshold = 0.0;
  std::string best_direction;  // ">=" flags high PSNR as positive, "<=" low
  double best_accuracy = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

namespace detail {

/// Best achievable accuracy of the rule "positive iff psnr >= t" or its
/// reversal over every realizable threshold.
inline void best_threshold_accuracy(std::span<const double> values, std::span<const int> truth,
                                    PsnrReport& rep) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  double total_p = 0;
  for (int t : truth) total_p += (t == 1);
  const double total_n = static_cast<double>(n) - total_p;

  // pos_below[k]: positives among the k smallest values. Cut k predicts
  // order[k..] positive; only cuts between distinct values are realizable.
  double pos_below = 0.0;
  rep.best_accuracy = -1.0;
  for (std::size_t k = 0; k <= n; ++k) {
    bool realizable = k == 0 || k == n || values[order[k]] != values[order[k - 1]];
    if (realizable) {
      double neg_below = static_cast<double>(k) - pos_below;
      double acc_high = ((total_p - pos_below) + neg_below) / static_cast<double>(n);
      double acc_low = (pos_below + (total_n - neg_below)) / static_cast<double>(n);
      double threshold = k == n ? values[order[n - 1]] + 1.0 : values[order[k]];
      if (acc_high > rep.best_accuracy) {
        rep.best_accuracy = acc_high;
        rep.best_threshold = threshold;
        rep.best_direction = ">=";
      }
      if (acc_low > rep.best_accuracy) {
        rep.best_accuracy = acc_low;
        rep.best_threshold = threshold;
        rep.best_direction = "<=";
      }
    }
    if (k < n) pos_below += (truth[order[k]] == 1);
  }
}

}  // namespace detail

inline PsnrReport run_psnr_experiment(const PipelineConfig& c) {
  validate_config(c);
  RunPaths p(c);
  write_run_config(c);

  auto split = detail::prepare_split(c);
  auto truth = split.unlabeled_truth(dataset::EvalAccess{});
  require(!truth.empty(), "psnr experiment: dataset provides no hidden ground truth");
  auto [cae, cae_rep] = detail::train_cae_mem(c, split.positive_labeled);
  auto recon = autoencoder::reconstruct(cae, split.unlabeled);

  const std::size_t n = static_cast<std::size_t>(split.unlabeled.n);
  std::vector<double> values(n);
  std::vector<double> pos_vals, neg_vals;
  std::vector<int> truth_vec(truth.begin(), truth.end());
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = autoencoder::psnr(split.unlabeled.image(static_cast<int>(i)),
                                  recon.image(static_cast<int>(i)));
    (truth[i] == 1 ? pos_vals : neg_vals).push_back(values[i]);
  }
  require(!pos_vals.empty() && !neg_vals.empty(),
          "psnr experiment: need both hidden classes in U");

  detail::ensure_parent(p.psnr_values_csv());
  {
    io::CsvWriter csv(p.psnr_values_csv());
    csv.row({"sample_id", "psnr", "truth"});
    for (std::size_t i = 0; i < n; ++i)
      csv.row({std::to_string(i), io::csv_double(values[i], 17), std::to_string(truth[i])});
  }

  // 30 equal-width bins over the finite range; infinities land in the last bin
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : values)
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  require(std::isfinite(lo), "psnr experiment: no finite psnr values");
  if (hi <= lo) hi = lo + 1.0;
  const int bins = 30;
  const double width = (hi - lo) / bins;
  std::vector<long> pos_count(bins, 0), neg_count(bins, 0);
  for (std::size_t i = 0; i < n; ++i) {
    int b = std::isfinite(values[i])
                ? std::min(bins - 1, static_cast<int>((values[i] - lo) / width))
                : bins - 1;
    (truth[i] == 1 ? pos_count : neg_count)[static_cast<std::size_t>(b)]++;
  }
  {
    io::CsvWriter csv(p.psnr_hist_csv());
    csv.row({"bin_lo", "bin_hi", "positives", "negatives"});
    for (int b = 0; b < bins; ++b)
      csv.row({io::csv_double(lo + b * width, 17), io::csv_double(lo + (b + 1) * width, 17),
               std::to_string(pos_count[b]), std::to_string(neg_count[b])});
  }

  PsnrReport rep;
  rep.n_pos = pos_vals.size();
  rep.n_neg = neg_vals.size();
  rep.mw = mann_whitney_u(pos_vals, neg_vals);
  detail::best_threshold_accuracy(values, truth_vec, rep);

  nlohmann::ordered_json j;
  j["config_hash"] = config_hash(c);
  j["dataset"] = dataset_name(c);
  j["n_positive"] = rep.n_pos;
  j["n_negative"] = rep.n_neg;
  j["mann_whitney_u"] = rep.mw.u;
  j["p_value"] = rep.mw.p_value;
  j["exact"] = rep.mw.exact;
  j["best_threshold"] = rep.best_threshold;
  j["best_direction"] = rep.best_direction;
  j["best_threshold_accuracy"] = rep.best_accuracy;
  auto os = io::open_out(p.psnr_report_json());
  os << j.dump(2) << '\n';
  require(bool(os), "psnr experiment: report write failed");
  return rep;
}

}  // namespace denspu::pipeline
