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

#include <cstdint>
#include <limits>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "denspu/core.hpp"
#include "denspu/io.hpp"

namespace denspu {

enum class AugmentMode { dens, mixup, dens_latent };

inline std::string augment_mode_name(AugmentMode m) {
  switch (m) {
    case AugmentMode::dens: return "dens";
    case AugmentMode::mixup: return "mixup";
    case AugmentMode::dens_latent: return "dens-latent";
  }
  fail("augment_mode_name: bad mode");
}

inline AugmentMode parse_augment_mode(std::string_view s) {
  if (s == "dens") return AugmentMode::dens;
  if (s == "mixup") return AugmentMode::mixup;
  if (s == "dens-latent") return AugmentMode::dens_latent;
  fail("unknown augmentation mode '", std::string(s), "'");
}

struct AugmentationSpec {
  AugmentMode mode = AugmentMode::dens;
  double k = 0.2;                 // spread of the lambda distribution
  std::size_t n_pairs = 0;
  std::size_t samples_per_pair = 11;
  double mixup_alpha = 0.2;       // Beta(alpha, alpha), mixup mode only
  std::uint64_t seed = 0;
};

/// Generated embeddings plus one provenance record per row.
struct EmbeddingSet {
  struct Provenance {
    std::uint32_t i = 0;
    std::uint32_t j = 0;
    double lambda = 0.0; // NaN in dens-latent mode (no scalar coefficient)
  };

  EncodingMatrix embeddings;
  std::vector<Provenance> provenance;
};

/// Uniformly sample n_pairs distinct unordered index pairs. Small pair
/// spaces are enumerated and partially shuffled; large ones are rejection
/// sampled. Both paths are deterministic given the seed.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> sample_pairs(std::size_t n_items,
                                                                         std::size_t n_pairs,
                                                                         std::uint64_t seed) {
  require(n_items >= 2, "sample_pairs: need at least 2 items, got ", n_items);
  const std::uint64_t total =
      static_cast<std::uint64_t>(n_items) * (n_items - 1) / 2;
  require(n_pairs <= total, "sample_pairs: ", n_pairs, " pairs requested but only ", total,
          " distinct pairs exist");

  Rng rng(mix_seed(seed, fnv1a("pairs")));
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  out.reserve(n_pairs);

  if (total <= (std::uint64_t{1} << 22) || n_pairs * 4 >= total) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> all;
    all.reserve(total);
    for (std::uint32_t i = 0; i + 1 < n_items; ++i)
      for (std::uint32_t j = i + 1; j < n_items; ++j) all.emplace_back(i, j);
    for (std::size_t k = 0; k < n_pairs; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, all.size() - 1);
      std::swap(all[k], all[pick(rng)]);
    }
    all.resize(n_pairs);
    return all;
  }

  // sparse regime: two distinct uniform draws hit every unordered pair with
  // equal probability; duplicates are rejected via a key set
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(n_pairs * 2);
  std::uniform_int_distribution<std::uint32_t> item(0, static_cast<std::uint32_t>(n_items - 1));
  while (out.size() < n_pairs) {
    std::uint32_t a = item(rng), b = item(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | b;
    if (seen.insert(key).second) out.emplace_back(a, b);
  }
  return out;
}

/// Interpolation coefficient for the dens mode: Normal(0.5, (k/2)^2),
/// redrawn until it lands strictly inside (0,1).
inline double draw_lambda(double k, Rng& rng) {
  require(k > 0.0 && k < 1.0, "draw_lambda: k=", k, " outside (0,1)");
  std::normal_distribution<double> dist(0.5, 0.5 * k);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    double lambda = dist(rng);
    if (lambda > 0.0 && lambda < 1.0) return lambda;
  }
  fail("draw_lambda: rejection sampling did not terminate (k=", k, ")");
}

/// One interpolated row per coefficient: x = lambda*z_i + (1-lambda)*z_j.
inline EncodingMatrix interpolate_pair(std::span<const float> z_i, std::span<const float> z_j,
                                       std::span<const double> lambdas) {
  require(z_i.size() == z_j.size(), "interpolate_pair: length mismatch ", z_i.size(), " vs ",
          z_j.size());
  EncodingMatrix out(lambdas.size(), z_i.size());
  for (std::size_t r = 0; r < lambdas.size(); ++r) {
    double lambda = lambdas[r];
    require(lambda >= 0.0 && lambda <= 1.0, "interpolate_pair: lambda ", lambda,
            " outside [0,1]");
    auto row = out.row(r);
    for (std::size_t c = 0; c < z_i.size(); ++c)
      row[c] = static_cast<float>(lambda * z_i[c] + (1.0 - lambda) * z_j[c]);
  }
  return out;
}

namespace detail {

inline double draw_beta(double alpha, Rng& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  double g1 = gamma(rng), g2 = gamma(rng);
  if (g1 + g2 <= 0.0) return 0.5; // both underflowed, astronomically rare
  return g1 / (g1 + g2);
}

} // namespace detail

/// Generate the dense embedding set from pairs of encodings. Each pair owns
/// an independent seed stream keyed by its position in the sampled pair
/// list, so generation order cannot change the output.
inline EmbeddingSet densify(const EncodingMatrix& encodings, const AugmentationSpec& spec) {
  require(encodings.rows >= 2, "densify: need at least 2 encodings, got ", encodings.rows);
  require(spec.samples_per_pair >= 1, "densify: samples_per_pair must be at least 1");
  require(spec.n_pairs >= 1, "densify: n_pairs must be at least 1");
  if (spec.mode == AugmentMode::mixup)
    require(spec.mixup_alpha > 0.0, "densify: mixup_alpha must be positive");

  auto pairs = sample_pairs(encodings.rows, spec.n_pairs, spec.seed);
  const std::size_t s = spec.samples_per_pair;
  const std::size_t dim = encodings.cols;

  EmbeddingSet out;
  out.embeddings = EncodingMatrix(pairs.size() * s, dim);
  out.provenance.resize(pairs.size() * s);

  for (std::size_t p = 0; p < pairs.size(); ++p) {
    Rng rng(mix_seed(spec.seed, p));
    auto z_i = encodings.row(pairs[p].first);
    auto z_j = encodings.row(pairs[p].second);

    for (std::size_t q = 0; q < s; ++q) {
      const std::size_t r = p * s + q;
      auto row = out.embeddings.row(r);
      auto& prov = out.provenance[r];
      prov.i = pairs[p].first;
      prov.j = pairs[p].second;

      switch (spec.mode) {
        case AugmentMode::dens:
        case AugmentMode::mixup: {
          double lambda = spec.mode == AugmentMode::dens
                              ? draw_lambda(spec.k, rng)
                              : detail::draw_beta(spec.mixup_alpha, rng);
          prov.lambda = lambda;
          for (std::size_t c = 0; c < dim; ++c)
            row[c] = static_cast<float>(lambda * z_i[c] + (1.0 - lambda) * z_j[c]);
          break;
        }
        case AugmentMode::dens_latent: {
          // alternate reading: draw around the segment midpoint with
          // isotropic std e^(k/2) * (|z_j - z_i| / 2)
          double sigma = std::exp(0.5 * spec.k) * 0.5 * euclidean_distance(z_i, z_j);
          std::normal_distribution<double> unit(0.0, 1.0);
          prov.lambda = std::numeric_limits<double>::quiet_NaN();
          for (std::size_t c = 0; c < dim; ++c) {
            double mid = 0.5 * (static_cast<double>(z_i[c]) + static_cast<double>(z_j[c]));
            row[c] = static_cast<float>(mid + sigma * unit(rng));
          }
          break;
        }
      }
    }
  }
  return out;
}

inline void write_provenance_csv(const std::filesystem::path& path, const EmbeddingSet& set) {
  io::CsvWriter csv(path);
  csv.row({"row_id", "i", "j", "lambda"});
  for (std::size_t r = 0; r < set.provenance.size(); ++r) {
    const auto& p = set.provenance[r];
    csv.row({std::to_string(r), std::to_string(p.i), std::to_string(p.j),
             io::csv_double(p.lambda, 17)});
  }
}

} // namespace denspu
