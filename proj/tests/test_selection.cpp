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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "denspu/dataset.hpp"
#include "denspu/isolation_forest.hpp"
#include "denspu/selection.hpp"

using denspu::AnomalyPartition;
using denspu::EncodingMatrix;
using namespace denspu::selection;

namespace {

// Partition with explicit scores; every id in `leftovers` must index `scores`.
AnomalyPartition make_partition(std::vector<double> scores, std::vector<std::size_t> leftovers) {
  AnomalyPartition part;
  part.scores = std::move(scores);
  part.leftover_ids = std::move(leftovers);
  std::vector<char> is_left(part.scores.size(), 0);
  for (std::size_t id : part.leftover_ids) is_left[id] = 1;
  for (std::size_t i = 0; i < part.scores.size(); ++i)
    if (!is_left[i]) part.inlier_ids.push_back(i);
  return part;
}

EncodingMatrix matrix_from(std::vector<std::vector<float>> rows) {
  EncodingMatrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  return m;
}

EncodingMatrix matrix_from_images(const denspu::ImageSet& images) {
  EncodingMatrix m(images.n, images.pixels_per_image());
  std::copy(images.data.begin(), images.data.end(), m.values.begin());
  return m;
}

// Fraction of the given unlabeled ids whose hidden label is negative.
double negative_purity(std::span<const std::size_t> ids, std::span<const int> truth) {
  REQUIRE(!ids.empty());
  double neg = 0.0;
  for (std::size_t id : ids)
    if (truth[id] == 0) neg += 1.0;
  return neg / static_cast<double>(ids.size());
}

}  // namespace

TEST_CASE("rank_leftovers orders by forest score descending", "[selection]") {
  // Scores {a:0.9, b:0.6, c:0.7} at ids {0,1,2} must come out [a, c, b].
  auto part = make_partition({0.9, 0.6, 0.7}, {0, 1, 2});
  EncodingMatrix unused;
  auto ranked = rank_leftovers(part, unused, unused, RankMode::forest_score);

  REQUIRE(ranked.size() == 3);
  CHECK(ranked.sample_ids == std::vector<std::size_t>{0, 2, 1});
  CHECK(ranked.rank_values == std::vector<double>{0.9, 0.7, 0.6});
  CHECK(ranked.mode == RankMode::forest_score);

  SECTION("inlier scores are ignored") {
    // Same scores but id 0 is an inlier now; only {b, c} get ranked.
    auto part2 = make_partition({0.9, 0.6, 0.7}, {1, 2});
    auto ranked2 = rank_leftovers(part2, unused, unused, RankMode::forest_score);
    CHECK(ranked2.sample_ids == std::vector<std::size_t>{2, 1});
  }

  SECTION("single leftover gives a list of length 1") {
    auto part3 = make_partition({0.5, 0.8}, {1});
    auto ranked3 = rank_leftovers(part3, unused, unused, RankMode::forest_score);
    REQUIRE(ranked3.size() == 1);
    CHECK(ranked3.sample_ids[0] == 1);
    CHECK(ranked3.rank_values[0] == 0.8);
  }

  SECTION("ties break toward the smaller id") {
    auto part4 = make_partition({0.5, 0.5, 0.5}, {2, 0, 1});
    auto ranked4 = rank_leftovers(part4, unused, unused, RankMode::forest_score);
    CHECK(ranked4.sample_ids == std::vector<std::size_t>{0, 1, 2});
  }
}

TEST_CASE("rank_leftovers min_distance matches brute-force distances", "[selection]") {
  // Reference {(0,0)}, leftovers (1,0) and (3,0): distances 1 and 3, the
  // farther sample first.
  auto encodings = matrix_from({{5.0f, 5.0f}, {1.0f, 0.0f}, {3.0f, 0.0f}});
  auto reference = matrix_from({{0.0f, 0.0f}});
  auto part = make_partition({0.0, 0.4, 0.3}, {1, 2});

  auto ranked = rank_leftovers(part, encodings, reference, RankMode::min_distance);
  REQUIRE(ranked.size() == 2);
  CHECK(ranked.sample_ids == std::vector<std::size_t>{2, 1});
  CHECK(ranked.rank_values[0] == Catch::Approx(3.0));
  CHECK(ranked.rank_values[1] == Catch::Approx(1.0));

  SECTION("nearest reference vector wins with several references") {
    auto many = matrix_from({{0.0f, 0.0f}, {3.0f, 1.0f}});
    auto ranked2 = rank_leftovers(part, encodings, many, RankMode::min_distance);
    // (3,0) is 1 away from (3,1); (1,0) stays at 1 from the origin. The tie
    // breaks toward the smaller id.
    CHECK(ranked2.sample_ids == std::vector<std::size_t>{1, 2});
    CHECK(ranked2.rank_values[0] == Catch::Approx(1.0));
    CHECK(ranked2.rank_values[1] == Catch::Approx(1.0));
  }

  SECTION("agrees with an independent brute-force oracle on random data") {
    denspu::Rng rng(4242);
    std::uniform_real_distribution<float> u(-2.0f, 2.0f);
    EncodingMatrix enc(40, 3), ref(7, 3);
    for (auto& v : enc.values) v = u(rng);
    for (auto& v : ref.values) v = u(rng);
    std::vector<std::size_t> left;
    for (std::size_t i = 0; i < enc.rows; i += 2) left.push_back(i);
    auto part2 = make_partition(std::vector<double>(enc.rows, 0.0), left);

    auto ranked2 = rank_leftovers(part2, enc, ref, RankMode::min_distance);
    REQUIRE(ranked2.size() == left.size());
    for (std::size_t k = 0; k < ranked2.size(); ++k) {
      std::size_t id = ranked2.sample_ids[k];
      double want = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < ref.rows; ++j) {
        double d2 = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
          double diff = enc.values[id * 3 + c] - ref.values[j * 3 + c];
          d2 += diff * diff;
        }
        want = std::min(want, std::sqrt(d2));
      }
      CHECK(ranked2.rank_values[k] == Catch::Approx(want));
      if (k > 0) CHECK(ranked2.rank_values[k - 1] >= ranked2.rank_values[k]);
    }
  }
}

TEST_CASE("rank_leftovers rejects bad input", "[selection]") {
  EncodingMatrix unused;
  auto empty = make_partition({0.1, 0.2}, {});
  CHECK_THROWS_AS(rank_leftovers(empty, unused, unused, RankMode::forest_score), denspu::Error);

  auto part = make_partition({0.1, 0.2}, {0, 1});
  SECTION("min_distance needs a reference set") {
    auto enc = matrix_from({{1.0f}, {2.0f}});
    CHECK_THROWS_AS(rank_leftovers(part, enc, unused, RankMode::min_distance), denspu::Error);
  }
  SECTION("min_distance needs matching dimensions") {
    auto enc = matrix_from({{1.0f}, {2.0f}});
    auto ref = matrix_from({{1.0f, 2.0f}});
    CHECK_THROWS_AS(rank_leftovers(part, enc, ref, RankMode::min_distance), denspu::Error);
  }
  SECTION("leftover id outside the score list") {
    AnomalyPartition bad;
    bad.scores = {0.3};
    bad.leftover_ids = {5};
    CHECK_THROWS_AS(rank_leftovers(bad, unused, unused, RankMode::forest_score), denspu::Error);
  }
}

TEST_CASE("select_negatives draws each documented population", "[selection]") {
  // 5000 leftovers with distinct scrambled scores; ids 0..4999.
  const std::size_t n = 5000;
  std::vector<double> scores(n);
  std::vector<std::size_t> ids(n);
  denspu::Rng rng(99);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = i;
    scores[i] = static_cast<double>((i * 2654435761u) % n) / static_cast<double>(n);
  }
  auto part = make_partition(scores, ids);
  EncodingMatrix unused;
  auto ranked = rank_leftovers(part, unused, unused, RankMode::forest_score);

  SECTION("match_positives takes the n_positives largest rank values") {
    auto chosen = select_negatives(ranked, SelectMode::match_positives, 1000, 7);
    REQUIRE(chosen.size() == 1000);
    // Every chosen score must be >= every unchosen score.
    std::set<std::size_t> in(chosen.begin(), chosen.end());
    double min_in = 2.0, max_out = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (in.count(i))
        min_in = std::min(min_in, scores[i]);
      else
        max_out = std::max(max_out, scores[i]);
    }
    CHECK(min_in >= max_out);
  }

  SECTION("match_positives clamps to the leftover count") {
    auto small = make_partition({0.9, 0.8, 0.7}, {0, 1, 2});
    auto ranked_small = rank_leftovers(small, unused, unused, RankMode::forest_score);
    auto chosen = select_negatives(ranked_small, SelectMode::match_positives, 1000, 7);
    CHECK(chosen == std::vector<std::size_t>{0, 1, 2});
  }

  SECTION("all_leftovers keeps everything") {
    auto chosen = select_negatives(ranked, SelectMode::all_leftovers, 1000, 7);
    REQUIRE(chosen.size() == n);
    CHECK(std::is_sorted(chosen.begin(), chosen.end()));
  }

  SECTION("random_count is deterministic per seed and varies across seeds") {
    auto a = select_negatives(ranked, SelectMode::random_count, 1000, 31);
    auto b = select_negatives(ranked, SelectMode::random_count, 31 * 0 + 31, 31);
    CHECK(a == b);
    REQUIRE(a.size() >= 1);
    REQUIRE(a.size() <= n);
    std::set<std::size_t> sizes;
    for (std::uint64_t s = 0; s < 50; ++s)
      sizes.insert(select_negatives(ranked, SelectMode::random_count, 1000, s).size());
    // Uniform sizes over [1, 5000] collide across 50 seeds with negligible
    // probability.
    CHECK(sizes.size() > 40);
  }

  SECTION("random_matched keeps the match_positives size but random members") {
    auto a = select_negatives(ranked, SelectMode::random_matched, 1000, 5);
    REQUIRE(a.size() == 1000);
    auto b = select_negatives(ranked, SelectMode::random_matched, 1000, 5);
    CHECK(a == b);
    auto top = select_negatives(ranked, SelectMode::match_positives, 1000, 5);
    CHECK(a != top);
  }

  SECTION("selected ids are always leftover ids, never inliers") {
    auto holes = make_partition({0.1, 0.9, 0.2, 0.8, 0.3, 0.7}, {1, 3, 5});
    auto ranked_holes = rank_leftovers(holes, unused, unused, RankMode::forest_score);
    std::set<std::size_t> inliers(holes.inlier_ids.begin(), holes.inlier_ids.end());
    for (auto mode : {SelectMode::match_positives, SelectMode::all_leftovers,
                      SelectMode::random_count, SelectMode::random_matched}) {
      auto chosen = select_negatives(ranked_holes, mode, 2, 17);
      for (std::size_t id : chosen) CHECK_FALSE(inliers.count(id));
    }
  }

  SECTION("empty ranking is rejected") {
    RankedLeftovers none;
    CHECK_THROWS_AS(select_negatives(none, SelectMode::all_leftovers, 10, 0), denspu::Error);
  }
}

TEST_CASE("top ranked leftovers are purer negatives on separated blobs", "[selection]") {
  // Two Gaussian blobs several sigma apart. A forest fitted on the labeled
  // positives flags most hidden negatives as leftovers; ranking by anomaly
  // degree must concentrate true negatives at the top: purity of the top-q
  // slice >= purity of the whole leftover set for q in {0.1, 0.25, 0.5}.
  denspu::dataset::SyntheticSpec spec;
  spec.generator = "blobs";
  spec.n_labeled = 200;
  spec.n_unlabeled = 1200;
  spec.n_test = 50;
  spec.positive_fraction = 0.5;
  spec.noise = 0.5;
  auto split = denspu::dataset::gen_synthetic(spec, 2024);

  auto z_p = matrix_from_images(split.positive_labeled);
  auto z_u = matrix_from_images(split.unlabeled);
  auto truth = split.unlabeled_truth(denspu::dataset::EvalAccess{});

  auto forest = denspu::build_forest(z_p, 100, 64, 11);
  denspu::fit_threshold(forest, z_p, 0.05);
  auto part = denspu::partition_unlabeled(forest, z_u);
  REQUIRE(part.leftover_ids.size() > 100);

  auto check_monotone_purity = [&](const RankedLeftovers& ranked) {
    double base = negative_purity(ranked.sample_ids, truth);
    CHECK(base > 0.6);
    for (double q : {0.1, 0.25, 0.5}) {
      std::size_t take = static_cast<std::size_t>(q * static_cast<double>(ranked.size()));
      REQUIRE(take > 0);
      std::span<const std::size_t> top(ranked.sample_ids.data(), take);
      CHECK(negative_purity(top, truth) >= base);
    }
  };

  SECTION("forest_score ranking") {
    auto ranked = rank_leftovers(part, z_u, z_p, RankMode::forest_score);
    check_monotone_purity(ranked);
    // The matched-size selection should be nearly pure on this toy.
    auto chosen = select_negatives(ranked, SelectMode::match_positives,
                                   split.positive_labeled.n, 3);
    CHECK(negative_purity(chosen, truth) >= 0.95);
  }

  SECTION("min_distance ranking") {
    auto ranked = rank_leftovers(part, z_u, z_p, RankMode::min_distance);
    check_monotone_purity(ranked);
  }
}

TEST_CASE("negative set export round-trips through CSV", "[selection]") {
  auto part = make_partition({0.2, 0.9, 0.5, 0.7}, {1, 2, 3});
  EncodingMatrix unused;
  auto ranked = rank_leftovers(part, unused, unused, RankMode::forest_score);
  auto chosen = select_negatives(ranked, SelectMode::match_positives, 2, 0);

  auto path = std::filesystem::temp_directory_path() / "denspu_test_negatives.csv";
  write_negatives_csv(path, ranked, chosen);

  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "sample_id,rank_value,selected_flag");

  std::vector<std::size_t> got_ids;
  std::vector<double> got_ranks;
  std::vector<int> got_flags;
  while (std::getline(in, line)) {
    auto c1 = line.find(',');
    auto c2 = line.find(',', c1 + 1);
    got_ids.push_back(std::stoul(line.substr(0, c1)));
    got_ranks.push_back(std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
    got_flags.push_back(std::stoi(line.substr(c2 + 1)));
  }
  REQUIRE(got_ids.size() == ranked.size());
  CHECK(got_ids == ranked.sample_ids);
  // Ranked order [1 (0.9), 3 (0.7), 2 (0.5)]; the top two are selected.
  CHECK(got_ranks == std::vector<double>{0.9, 0.7, 0.5});
  CHECK(got_flags == std::vector<int>{1, 1, 0});

  SECTION("selected ids must come from the ranking") {
    std::vector<std::size_t> alien{0};
    CHECK_THROWS_AS(write_negatives_csv(path, ranked, alien), denspu::Error);
  }
  std::filesystem::remove(path);
}
