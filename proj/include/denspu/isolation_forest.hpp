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

#include <bit>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <vector>

#include "denspu/core.hpp"
#include "denspu/io.hpp"

namespace denspu {

/// Expected path length of an unsuccessful BST search over m points:
/// c(m) = 2*H(m-1) - 2*(m-1)/m with H(i) = ln(i) + 0.5772156649.
/// Used both as the score normalizer and as the credit granted at
/// external nodes that still hold more than one point.
inline double average_path_length(std::size_t m) {
  if (m <= 1) return 0.0;
  const double euler_gamma = 0.5772156649;
  double mm = static_cast<double>(m);
  return 2.0 * (std::log(mm - 1.0) + euler_gamma) - 2.0 * (mm - 1.0) / mm;
}

struct IsolationTreeNode {
  int feature = -1;      // -1 marks an external node
  double split = 0.0;
  int left = -1;
  int right = -1;
  std::uint32_t size = 0; // subset size at external nodes
};

struct IsolationTree {
  std::vector<IsolationTreeNode> nodes; // root at index 0

  double path_length(std::span<const float> x) const {
    int node = 0;
    int depth = 0;
    while (nodes[node].feature >= 0) {
      const auto& nd = nodes[node];
      node = (static_cast<double>(x[nd.feature]) < nd.split) ? nd.left : nd.right;
      ++depth;
    }
    return depth + average_path_length(nodes[node].size);
  }
};

/// Isolation forest with a contamination-calibrated score threshold.
///
/// The construction consumes randomness in a fixed, documented order so a
/// reference simulator fed the same seed reproduces every tree exactly:
///   * tree t uses Rng(mix_seed(seed, t));
///   * if subsample_size < n, the tree draws its subsample by a partial
///     Fisher-Yates pass (k = 0..psi-1: j = uniform_int(k, n-1), swap);
///     if subsample_size >= n no draw occurs and all rows are used;
///   * nodes are built depth-first, left child before right. Each split
///     attempt draws feature = uniform_int(0, dim-1) and, when the feature
///     has nonzero width over the node's subset, split = uniform_real(min,
///     max). A zero-width feature costs one draw and is retried, up to dim
///     attempts, after which the node becomes external.
class IsolationForest {
public:
  std::vector<IsolationTree> trees;
  std::size_t n_trees = 0;
  std::size_t subsample_size = 0;   // effective (clamped) psi
  std::size_t dim = 0;
  double threshold = 0.0;
  double contamination = 0.0;
  bool has_threshold = false;

  /// Anomaly score s(x) = 2^(-E[h(x)] / c(psi)); higher means more anomalous.
  double score(std::span<const float> x) const {
    require(x.size() == dim, "anomaly_score: vector has ", x.size(), " features, forest expects ",
            dim);
    double total = 0.0;
    for (const auto& tree : trees) total += tree.path_length(x);
    double mean_path = total / static_cast<double>(trees.size());
    return std::exp2(-mean_path / average_path_length(subsample_size));
  }

  std::vector<double> score_all(const EncodingMatrix& data) const {
    std::vector<double> out(data.rows);
    for (std::size_t i = 0; i < data.rows; ++i) out[i] = score(data.row(i));
    return out;
  }
};

/// Contamination fraction C = n_outliers / (n_pairs * s).
inline double contamination_fraction(std::size_t n_outliers, std::size_t n_pairs, std::size_t s) {
  require(n_pairs > 0 && s > 0, "contamination: zero denominator (n_pairs=", n_pairs, ", s=", s,
          ")");
  return static_cast<double>(n_outliers) / (static_cast<double>(n_pairs) * static_cast<double>(s));
}

namespace detail {

inline int isolation_depth_limit(std::size_t psi) {
  // ceil(log2(psi)), exact in integer arithmetic
  if (psi <= 1) return 0;
  return static_cast<int>(std::bit_width(psi - 1));
}

inline int build_isolation_node(IsolationTree& tree, std::vector<std::uint32_t>& subset,
                                std::size_t begin, std::size_t end, int depth, int depth_limit,
                                const EncodingMatrix& data, Rng& rng) {
  const std::size_t count = end - begin;
  const int node_id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();

  if (count <= 1 || depth >= depth_limit) {
    tree.nodes[node_id].size = static_cast<std::uint32_t>(count);
    return node_id;
  }

  const std::size_t dims = data.cols;
  std::uniform_int_distribution<std::size_t> feature_dist(0, dims - 1);
  for (std::size_t attempt = 0; attempt < dims; ++attempt) {
    const std::size_t feature = feature_dist(rng);
    float lo = data.row(subset[begin])[feature];
    float hi = lo;
    for (std::size_t k = begin + 1; k < end; ++k) {
      float v = data.row(subset[k])[feature];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!(hi > lo)) continue; // zero width, retry with a fresh feature draw

    std::uniform_real_distribution<double> split_dist(static_cast<double>(lo),
                                                      static_cast<double>(hi));
    const double split = split_dist(rng);

    // stable two-way partition: left keeps x[feature] < split
    std::vector<std::uint32_t> left_ids, right_ids;
    left_ids.reserve(count);
    for (std::size_t k = begin; k < end; ++k) {
      if (static_cast<double>(data.row(subset[k])[feature]) < split)
        left_ids.push_back(subset[k]);
      else
        right_ids.push_back(subset[k]);
    }
    std::copy(left_ids.begin(), left_ids.end(), subset.begin() + begin);
    std::copy(right_ids.begin(), right_ids.end(), subset.begin() + begin + left_ids.size());
    const std::size_t mid = begin + left_ids.size();

    tree.nodes[node_id].feature = static_cast<int>(feature);
    tree.nodes[node_id].split = split;
    int left = build_isolation_node(tree, subset, begin, mid, depth + 1, depth_limit, data, rng);
    int right = build_isolation_node(tree, subset, mid, end, depth + 1, depth_limit, data, rng);
    tree.nodes[node_id].left = left;
    tree.nodes[node_id].right = right;
    return node_id;
  }

  // every attempted feature had zero width over this subset
  tree.nodes[node_id].feature = -1;
  tree.nodes[node_id].size = static_cast<std::uint32_t>(count);
  return node_id;
}

} // namespace detail

/// Build an unthresholded forest: each tree on its own psi-subsample drawn
/// without replacement (independently across trees), uniform random feature
/// and split, depth capped at ceil(log2(psi)).
inline IsolationForest build_forest(const EncodingMatrix& data, std::size_t n_trees,
                                    std::size_t subsample, std::uint64_t seed) {
  require(data.rows > 0, "build_forest: empty data");
  require(data.cols > 0, "build_forest: zero-dimensional data");
  require(n_trees > 0, "build_forest: n_trees must be positive");
  require(subsample >= 2, "build_forest: subsample must be at least 2");

  std::size_t psi = subsample;
  if (psi > data.rows) {
    std::cerr << "build_forest: subsample " << psi << " clamped to n=" << data.rows << "\n";
    psi = data.rows;
  }

  IsolationForest forest;
  forest.n_trees = n_trees;
  forest.subsample_size = psi;
  forest.dim = data.cols;
  forest.trees.resize(n_trees);
  const int depth_limit = detail::isolation_depth_limit(psi);

  std::vector<std::uint32_t> indices(data.rows);
  for (std::size_t t = 0; t < n_trees; ++t) {
    Rng rng(mix_seed(seed, t));
    for (std::size_t i = 0; i < data.rows; ++i) indices[i] = static_cast<std::uint32_t>(i);
    if (psi < data.rows) {
      for (std::size_t k = 0; k < psi; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, data.rows - 1);
        std::swap(indices[k], indices[pick(rng)]);
      }
    }
    std::vector<std::uint32_t> subset(indices.begin(), indices.begin() + psi);
    forest.trees[t].nodes.reserve(2 * psi);
    detail::build_isolation_node(forest.trees[t], subset, 0, psi, 0, depth_limit, data, rng);
  }
  return forest;
}

/// Calibrate the score threshold so that the top C fraction of the fitting
/// set is flagged as outliers. The cutoff sits at the (1-C)-quantile; ties at
/// the cutoff count as inliers (flagging fewer points).
inline void fit_threshold(IsolationForest& forest, const EncodingMatrix& fitting_data, double c) {
  require(c >= 0.0 && c < 1.0, "fit_threshold: contamination ", c, " outside [0,1)");
  require(fitting_data.rows > 0, "fit_threshold: empty fitting data");
  std::vector<double> scores = forest.score_all(fitting_data);
  std::sort(scores.begin(), scores.end(), std::greater<double>());
  auto flagged = static_cast<std::size_t>(
      std::llround(c * static_cast<double>(scores.size())));
  if (flagged >= scores.size()) flagged = scores.size() - 1;
  forest.threshold = scores[flagged];
  forest.contamination = c;
  forest.has_threshold = true;
}

struct AnomalyPartition {
  std::vector<std::size_t> inlier_ids;
  std::vector<std::size_t> leftover_ids;
  std::vector<double> scores; // one per scored row
};

/// Split unlabeled encodings at the fitted threshold: score <= threshold
/// lands in inlier_ids, the rest in leftover_ids.
inline AnomalyPartition partition_unlabeled(const IsolationForest& forest,
                                            const EncodingMatrix& encodings_u) {
  require(forest.has_threshold, "partition_unlabeled: forest has no fitted threshold");
  AnomalyPartition part;
  part.scores = forest.score_all(encodings_u);
  for (std::size_t i = 0; i < part.scores.size(); ++i) {
    if (part.scores[i] <= forest.threshold)
      part.inlier_ids.push_back(i);
    else
      part.leftover_ids.push_back(i);
  }
  return part;
}

/// Empirical plug-in estimate of the detection loss at a given cutoff:
/// C * (miss rate on true outliers) + (1-C) * (false-alarm rate on true
/// inliers). Diagnostic only, never optimized.
inline double expected_detection_loss(std::span<const double> scores_in,
                                      std::span<const double> scores_out, double threshold,
                                      double c) {
  require(!scores_in.empty() && !scores_out.empty(), "expected_detection_loss: empty score list");
  double missed = 0.0;
  for (double s : scores_out)
    if (s <= threshold) missed += 1.0;
  double false_alarm = 0.0;
  for (double s : scores_in)
    if (s > threshold) false_alarm += 1.0;
  return c * (missed / static_cast<double>(scores_out.size())) +
         (1.0 - c) * (false_alarm / static_cast<double>(scores_in.size()));
}

// ---------------------------------------------------------------------------
// Persistence: versioned little-endian checkpoint, plus the score dump CSV.
// ---------------------------------------------------------------------------

inline void save_forest(const std::filesystem::path& path, const IsolationForest& forest) {
  auto os = io::open_out(path);
  os.write("DPUF", 4);
  io::put_u32(os, 1); // version
  io::put_u32(os, static_cast<std::uint32_t>(forest.n_trees));
  io::put_u64(os, forest.subsample_size);
  io::put_u64(os, forest.dim);
  io::put_u32(os, forest.has_threshold ? 1 : 0);
  io::put_f64(os, forest.threshold);
  io::put_f64(os, forest.contamination);
  for (const auto& tree : forest.trees) {
    io::put_u32(os, static_cast<std::uint32_t>(tree.nodes.size()));
    for (const auto& nd : tree.nodes) {
      io::put_u32(os, static_cast<std::uint32_t>(nd.feature));
      io::put_f64(os, nd.split);
      io::put_u32(os, static_cast<std::uint32_t>(nd.left));
      io::put_u32(os, static_cast<std::uint32_t>(nd.right));
      io::put_u32(os, nd.size);
    }
  }
  require(bool(os), "write failed: ", path.string());
}

inline IsolationForest load_forest(const std::filesystem::path& path) {
  auto is = io::open_in(path);
  char magic[4];
  is.read(magic, 4);
  require(bool(is) && std::string(magic, 4) == "DPUF", "bad forest magic in ", path.string());
  std::uint32_t version = io::get_u32(is);
  require(version == 1, "unsupported forest version ", version);
  IsolationForest forest;
  forest.n_trees = io::get_u32(is);
  forest.subsample_size = io::get_u64(is);
  forest.dim = io::get_u64(is);
  forest.has_threshold = io::get_u32(is) != 0;
  forest.threshold = io::get_f64(is);
  forest.contamination = io::get_f64(is);
  forest.trees.resize(forest.n_trees);
  for (auto& tree : forest.trees) {
    tree.nodes.resize(io::get_u32(is));
    for (auto& nd : tree.nodes) {
      nd.feature = static_cast<int>(io::get_u32(is));
      nd.split = io::get_f64(is);
      nd.left = static_cast<int>(io::get_u32(is));
      nd.right = static_cast<int>(io::get_u32(is));
      nd.size = io::get_u32(is);
    }
  }
  return forest;
}

inline void write_scores_csv(const std::filesystem::path& path, std::span<const double> scores,
                             double threshold) {
  io::CsvWriter csv(path);
  csv.row({"sample_id", "score", "flagged"});
  for (std::size_t i = 0; i < scores.size(); ++i)
    csv.row({std::to_string(i), io::csv_double(scores[i]), scores[i] > threshold ? "1" : "0"});
}

} // namespace denspu
