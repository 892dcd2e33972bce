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

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "denspu/core.hpp"
#include "denspu/io.hpp"
#include "denspu/isolation_forest.hpp"

namespace denspu::selection {

/// How the anomaly degree of a leftover sample is measured.
/// forest_score is the default: the isolation score already computed while
/// partitioning the unlabeled pool. min_distance re-ranks by the Euclidean
/// distance to the nearest vector of a reference set (labeled positives plus
/// recovered positives); it exists so the distance-based ordering can be
/// exercised on its own.
enum class RankMode { forest_score, min_distance };

/// How the confident-negative set is drawn from the ranked leftovers.
///   match_positives: the n most anomalous, n = number of labeled positives.
///   all_leftovers:   every leftover.
///   random_count:    a uniformly random size, then a random subset (ignores
///                    rank; a control population for ablations).
///   random_matched:  a random subset of the match_positives size (separates
///                    the effect of ranking from the effect of set size).
enum class SelectMode { match_positives, all_leftovers, random_count, random_matched };

inline std::string to_string(RankMode m) {
  return m == RankMode::forest_score ? "forest_score" : "min_distance";
}

inline std::string to_string(SelectMode m) {
  switch (m) {
    case SelectMode::match_positives: return "match_positives";
    case SelectMode::all_leftovers: return "all_leftovers";
    case SelectMode::random_count: return "random_count";
    default: return "random_matched";
  }
}

inline RankMode rank_mode_from_string(const std::string& s) {
  if (s == "forest_score") return RankMode::forest_score;
  if (s == "min_distance") return RankMode::min_distance;
  fail("rank_mode_from_string: unknown mode '", s, "'");
}

inline SelectMode select_mode_from_string(const std::string& s) {
  if (s == "match_positives") return SelectMode::match_positives;
  if (s == "all_leftovers") return SelectMode::all_leftovers;
  if (s == "random_count") return SelectMode::random_count;
  if (s == "random_matched") return SelectMode::random_matched;
  fail("select_mode_from_string: unknown mode '", s, "'");
}

/// Leftover samples ordered by anomaly degree, most anomalous first.
/// sample_ids and rank_values are parallel; rank_values is non-increasing.
/// Ids refer to rows of the unlabeled encoding matrix the partition was
/// computed from.
struct RankedLeftovers {
  std::vector<std::size_t> sample_ids;
  std::vector<double> rank_values;
  RankMode mode = RankMode::forest_score;

  std::size_t size() const { return sample_ids.size(); }
};

/// Order the leftovers of an anomaly partition by decreasing anomaly degree.
///
/// forest_score mode reads the per-sample isolation scores already stored in
/// the partition. min_distance mode assigns each leftover the distance to its
/// nearest neighbour in `reference` (the positive-side embeddings); a sample
/// far from every positive is ranked as strongly negative. `encodings_u` must
/// be the matrix the partition indexes into; forest_score mode never touches
/// its values. Ties are broken by ascending sample id so the ordering is a
/// pure function of its inputs.
inline RankedLeftovers rank_leftovers(const AnomalyPartition& partition,
                                      const EncodingMatrix& encodings_u,
                                      const EncodingMatrix& reference,
                                      RankMode mode = RankMode::forest_score) {
  require(!partition.leftover_ids.empty(), "rank_leftovers: no leftovers to rank");
  RankedLeftovers out;
  out.mode = mode;
  const std::size_t n = partition.leftover_ids.size();
  out.sample_ids = partition.leftover_ids;
  out.rank_values.resize(n);

  if (mode == RankMode::forest_score) {
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t id = out.sample_ids[k];
      require(id < partition.scores.size(), "rank_leftovers: leftover id ", id,
              " has no score (", partition.scores.size(), " scores)");
      out.rank_values[k] = partition.scores[id];
    }
  } else {
    require(reference.rows > 0, "rank_leftovers: empty reference set in min_distance mode");
    require(reference.cols == encodings_u.cols, "rank_leftovers: reference dimension ",
            reference.cols, " does not match encodings ", encodings_u.cols);
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t id = out.sample_ids[k];
      require(id < encodings_u.rows, "rank_leftovers: leftover id ", id, " out of range (",
              encodings_u.rows, " rows)");
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < reference.rows; ++j)
        best = std::min(best, euclidean_distance(encodings_u.row(id), reference.row(j)));
      out.rank_values[k] = best;
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (out.rank_values[a] != out.rank_values[b]) return out.rank_values[a] > out.rank_values[b];
    return out.sample_ids[a] < out.sample_ids[b];
  });
  RankedLeftovers sorted;
  sorted.mode = mode;
  sorted.sample_ids.reserve(n);
  sorted.rank_values.reserve(n);
  for (std::size_t k : order) {
    sorted.sample_ids.push_back(out.sample_ids[k]);
    sorted.rank_values.push_back(out.rank_values[k]);
  }
  return sorted;
}

/// Draw the confident-negative id set from the ranking. The result is sorted
/// ascending and is always a subset of the ranked leftover ids, so it can
/// never intersect the predicted inliers. `n_positives` is only consulted by
/// the match_positives and random_matched modes; `seed` only by the random
/// modes. Random sizes never come out empty: a zero-sized negative set would
/// make the downstream classifier unfittable.
inline std::vector<std::size_t> select_negatives(const RankedLeftovers& ranked, SelectMode mode,
                                                 std::size_t n_positives, std::uint64_t seed) {
  require(ranked.size() > 0, "select_negatives: empty ranking");
  require(ranked.sample_ids.size() == ranked.rank_values.size(),
          "select_negatives: malformed ranking");
  const std::size_t n = ranked.size();
  std::vector<std::size_t> chosen;

  switch (mode) {
    case SelectMode::match_positives: {
      std::size_t take = std::min(n_positives, n);
      chosen.assign(ranked.sample_ids.begin(), ranked.sample_ids.begin() + take);
      break;
    }
    case SelectMode::all_leftovers:
      chosen = ranked.sample_ids;
      break;
    case SelectMode::random_count:
    case SelectMode::random_matched: {
      Rng rng(mix_seed(seed, fnv1a("select_neg")));
      std::size_t take = mode == SelectMode::random_matched
                             ? std::min(n_positives, n)
                             : std::uniform_int_distribution<std::size_t>(1, n)(rng);
      std::vector<std::size_t> pool = ranked.sample_ids;
      std::shuffle(pool.begin(), pool.end(), rng);
      chosen.assign(pool.begin(), pool.begin() + take);
      break;
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

/// Dump the ranking with selection flags: sample_id, rank_value, selected_flag.
/// Rows keep the ranked order (most anomalous first); selected_flag is 1 when
/// the id is part of the negative set.
inline void write_negatives_csv(const std::filesystem::path& path, const RankedLeftovers& ranked,
                                std::span<const std::size_t> selected) {
  std::vector<char> flag(ranked.size(), 0);
  for (std::size_t id : selected) {
    auto it = std::find(ranked.sample_ids.begin(), ranked.sample_ids.end(), id);
    require(it != ranked.sample_ids.end(), "write_negatives_csv: selected id ", id,
            " is not a ranked leftover");
    flag[static_cast<std::size_t>(it - ranked.sample_ids.begin())] = 1;
  }
  io::CsvWriter csv(path);
  csv.row({"sample_id", "rank_value", "selected_flag"});
  for (std::size_t k = 0; k < ranked.size(); ++k)
    csv.row({std::to_string(ranked.sample_ids[k]), io::csv_double(ranked.rank_values[k]),
             flag[k] ? "1" : "0"});
}

}  // namespace denspu::selection
