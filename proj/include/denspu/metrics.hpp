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
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "denspu/core.hpp"

namespace denspu {

struct MetricsRecord {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> auc;        // set when scores are available
  long tp = 0, fp = 0, tn = 0, fn = 0;
};

/// Confusion-matrix metrics over binary labels. Degenerate denominators
/// follow the zero convention: precision=0 when TP+FP=0, recall=0 when
/// TP+FN=0, f1=0 when precision+recall=0.
inline MetricsRecord classification_metrics(std::span<const int> truth,
                                            std::span<const int> predicted) {
  require(truth.size() == predicted.size(), "classification_metrics: length mismatch ",
          truth.size(), " vs ", predicted.size());
  MetricsRecord r;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require(truth[i] == 0 || truth[i] == 1, "classification_metrics: truth label ", truth[i],
            " not in {0,1}");
    require(predicted[i] == 0 || predicted[i] == 1, "classification_metrics: predicted label ",
            predicted[i], " not in {0,1}");
    if (truth[i] == 1)
      (predicted[i] == 1 ? r.tp : r.fn)++;
    else
      (predicted[i] == 1 ? r.fp : r.tn)++;
  }
  long total = r.tp + r.fp + r.tn + r.fn;
  r.accuracy = total ? static_cast<double>(r.tp + r.tn) / total : 0.0;
  r.precision = (r.tp + r.fp) ? static_cast<double>(r.tp) / (r.tp + r.fp) : 0.0;
  r.recall = (r.tp + r.fn) ? static_cast<double>(r.tp) / (r.tp + r.fn) : 0.0;
  r.f1 = (r.precision + r.recall > 0.0)
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

/// AUC as the probability that a random positive outranks a random negative,
/// ties counted 1/2. Computed from midranks; the numerator is an exact
/// half-integer, so the result matches the brute-force pairwise count
/// bit-for-bit.
inline double auc(std::span<const int> truth, std::span<const double> scores) {
  require(truth.size() == scores.size(), "auc: length mismatch");
  long pos = 0, neg = 0;
  for (int t : truth) {
    require(t == 0 || t == 1, "auc: label ", t, " not in {0,1}");
    (t == 1 ? pos : neg)++;
  }
  require(pos > 0 && neg > 0, "auc: needs both classes present (", pos, " positives, ", neg,
          " negatives)");

  std::vector<std::size_t> order(truth.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks: tied values share the average of their 1-based positions.
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k)
      if (truth[order[k]] == 1) pos_rank_sum += midrank;
    i = j;
  }
  double wins = pos_rank_sum - 0.5 * static_cast<double>(pos) * (pos + 1);
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

namespace detail {

/// Midranks of the combined sample a++b (1-based, ties averaged).
inline std::vector<double> combined_midranks(std::span<const double> a,
                                             std::span<const double> b) {
  std::vector<double> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return all[x] < all[y]; });
  std::vector<double> ranks(all.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && all[order[j]] == all[order[i]]) ++j;
    double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = midrank;
    i = j;
  }
  return ranks;
}

inline double u_from_ranks(const std::vector<double>& ranks, std::span<const std::size_t> a_ids,
                           std::size_t na) {
  double rank_sum = 0.0;
  for (std::size_t id : a_ids) rank_sum += ranks[id];
  return rank_sum - 0.5 * static_cast<double>(na) * (na + 1);
}

/// Exhaustive two-sided p-value over all C(n, na) group assignments of the
/// combined sample. The U distribution under exchangeability is symmetric
/// about na*nb/2, so the two-sided p is 2*min(P(U<=u), P(U>=u)) capped at 1.
inline double exact_mann_whitney_p(std::span<const double> a, std::span<const double> b,
                                   double u_obs) {
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  std::vector<double> ranks = combined_midranks(a, b);
  std::vector<std::size_t> pick(na);
  std::iota(pick.begin(), pick.end(), 0);
  long total = 0, le = 0, ge = 0;
  const double eps = 1e-9;
  while (true) {
    double u = u_from_ranks(ranks, pick, na);
    ++total;
    if (u <= u_obs + eps) ++le;
    if (u >= u_obs - eps) ++ge;
    // next combination in lexicographic order
    std::size_t i = na;
    while (i > 0 && pick[i - 1] == n - na + i - 1) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (std::size_t j = i; j < na; ++j) pick[j] = pick[j - 1] + 1;
  }
  double p = 2.0 * std::min(static_cast<double>(le), static_cast<double>(ge)) / total;
  return std::min(1.0, p);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

} // namespace detail

struct MannWhitneyResult {
  double u = 0.0;        // U statistic of the first sample
  double p_value = 1.0;  // two-sided
  bool exact = false;    // true when computed by exhaustive enumeration
};

/// Rank-sum U with midrank ties. Small samples (both sizes <= 8) are solved
/// by exhaustive enumeration; larger ones use the normal approximation with
/// tie-corrected variance and continuity correction.
inline MannWhitneyResult mann_whitney_u(std::span<const double> sample_a,
                                        std::span<const double> sample_b) {
  require(!sample_a.empty() && !sample_b.empty(), "mann_whitney_u: empty sample");
  const std::size_t na = sample_a.size(), nb = sample_b.size(), n = na + nb;

  std::vector<double> ranks = detail::combined_midranks(sample_a, sample_b);
  std::vector<std::size_t> a_ids(na);
  std::iota(a_ids.begin(), a_ids.end(), 0);
  MannWhitneyResult res;
  res.u = detail::u_from_ranks(ranks, a_ids, na);

  if (na <= 8 && nb <= 8) {
    res.exact = true;
    res.p_value = detail::exact_mann_whitney_p(sample_a, sample_b, res.u);
    return res;
  }

  // Tie correction: sum of (t^3 - t) over tie groups of the combined sample.
  std::vector<double> all(sample_a.begin(), sample_a.end());
  all.insert(all.end(), sample_b.begin(), sample_b.end());
  std::sort(all.begin(), all.end());
  double tie_term = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j] == all[i]) ++j;
    double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  double mean_u = 0.5 * static_cast<double>(na) * nb;
  double var_u = (static_cast<double>(na) * nb / 12.0) *
                 (static_cast<double>(n + 1) -
                  tie_term / (static_cast<double>(n) * (static_cast<double>(n) - 1.0)));
  if (var_u <= 0.0) {
    res.p_value = 1.0; // every value tied
    return res;
  }
  double diff = res.u - mean_u;
  double corrected = std::abs(diff) - 0.5; // continuity correction
  if (corrected < 0.0) corrected = 0.0;
  double z = corrected / std::sqrt(var_u);
  res.p_value = std::min(1.0, 2.0 * detail::normal_cdf(-z));
  return res;
}

/// Fraction of the selected samples whose hidden ground truth is negative.
inline double negative_purity(std::span<const std::size_t> selected,
                              std::span<const int> hidden_truth) {
  require(!selected.empty(), "negative_purity: empty selection");
  long negatives = 0;
  for (std::size_t id : selected) {
    require(id < hidden_truth.size(), "negative_purity: index ", id, " out of range");
    if (hidden_truth[id] == 0) ++negatives;
  }
  return static_cast<double>(negatives) / static_cast<double>(selected.size());
}

} // namespace denspu
