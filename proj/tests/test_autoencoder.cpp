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

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "denspu/autoencoder.hpp"
#include "support/gradient_check.hpp"

using namespace denspu;
namespace cae = denspu::autoencoder;

namespace {

ImageSet constant_images(int n, int h, int w, int c, float value) {
  ImageSet s;
  s.n = n;
  s.height = h;
  s.width = w;
  s.channels = c;
  s.data.assign(static_cast<std::size_t>(n) * h * w * c, value);
  return s;
}

ImageSet random_images(int n, int h, int w, int c, std::uint64_t seed) {
  ImageSet s;
  s.n = n;
  s.height = h;
  s.width = w;
  s.channels = c;
  s.data.resize(static_cast<std::size_t>(n) * h * w * c);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  for (auto& v : s.data) v = dist(rng);
  return s;
}

std::vector<float> net_params(const nn::Network<float>& net) {
  std::vector<float> out;
  for (const auto& l : net.layers()) {
    auto p = const_cast<nn::Layer<float>&>(*l).params();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

} // namespace

TEST_CASE("conv autoencoder is structurally symmetric", "[cae]") {
  cae::CaeHyper hyper;
  hyper.filters = {6, 4, 2};
  hyper.latent_dim = 3;
  auto model = cae::build_cae<float>(8, 8, 1, hyper);

  // encoder: conv pool conv pool conv dense; decoder mirrors it
  REQUIRE(model.encoder_layers == 6);
  REQUIRE(model.net.layers().size() == 12);
  REQUIRE(model.net.in_size() == 64);
  REQUIRE(model.net.out_size() == 64);
  REQUIRE(model.net.layers()[5]->out_size() == 3);
  REQUIRE(model.net.layers()[6]->in_size() == 3);

  // flattened conv code equal to latent_dim drops the dense pair
  hyper.latent_dim = 2 * 2 * 2;
  auto tight = cae::build_cae<float>(8, 8, 1, hyper);
  REQUIRE(tight.encoder_layers == 5);
  REQUIRE(tight.net.layers().size() == 10);
  REQUIRE(tight.net.layers()[4]->out_size() == 8);
}

TEST_CASE("paper-scale configuration builds and trains one epoch", "[cae]") {
  // 32x32x3 input, filters 64/32/8: the flattened code is 8*8*8 = 512,
  // which matches the default latent width with no dense pair.
  cae::CaeHyper hyper;
  REQUIRE(hyper.filters[0] == 64);
  REQUIRE(hyper.filters[1] == 32);
  REQUIRE(hyper.filters[2] == 8);
  REQUIRE(hyper.latent_dim == 512);
  REQUIRE(hyper.epochs == 50);
  REQUIRE(hyper.batch_size == 64);
  REQUIRE(hyper.learning_rate == 1e-4);
  REQUIRE(hyper.weight_decay == 1e-3);

  hyper.epochs = 1;
  auto [model, report] = cae::train_cae(random_images(2, 32, 32, 3, 7), hyper, 1);
  REQUIRE(model.encoder_layers == 5);
  REQUIRE(model.latent_dim == 512);
  REQUIRE(report.total_loss.size() == 1);
  REQUIRE(std::isfinite(report.total_loss[0]));

  auto z = cae::encode(model, random_images(4, 32, 32, 3, 8));
  REQUIRE(z.rows == 4);
  REQUIRE(z.cols == 512);
}

TEST_CASE("constant image trains to near-zero reconstruction loss", "[cae]") {
  auto images = constant_images(1, 4, 4, 1, 0.6f);
  cae::CaeHyper hyper;
  hyper.filters = {4, 3, 2};
  hyper.latent_dim = 2;           // equals the flattened code, conv-only
  hyper.epochs = 200;
  hyper.batch_size = 64;
  hyper.learning_rate = 5e-3;
  hyper.weight_decay = 1e-5;
  auto [model, report] = cae::train_cae(images, hyper, 3);

  REQUIRE(report.recon_loss.back() < 1e-3);
  REQUIRE(report.total_loss.back() < report.total_loss.front());

  SECTION("loss decomposition holds at every epoch") {
    for (std::size_t e = 0; e < report.total_loss.size(); ++e) {
      double lhs = report.total_loss[e];
      double rhs = report.recon_loss[e] + report.reg_loss[e];
      REQUIRE(std::abs(lhs - rhs) <= 1e-5 * std::max(1.0, std::abs(lhs)));
    }
  }

  SECTION("5-epoch moving average of the total loss is non-increasing") {
    // gentler rate than the convergence run above: once Adam reaches its
    // noise floor its normalized steps wander, which is not a descent bug
    auto gentle = hyper;
    gentle.learning_rate = 4e-4;
    auto [gm, greport] = cae::train_cae(images, gentle, 3);
    std::vector<double> ma;
    for (std::size_t e = 4; e < greport.total_loss.size(); ++e) {
      double s = 0.0;
      for (std::size_t k = e - 4; k <= e; ++k) s += greport.total_loss[k];
      ma.push_back(s / 5.0);
    }
    for (std::size_t i = 1; i < ma.size(); ++i) REQUIRE(ma[i] <= ma[i - 1] + 1e-9);
  }

  SECTION("reconstruction of the training image beats an unrelated image") {
    auto recon = cae::reconstruct(model, images);
    auto unrelated = constant_images(1, 4, 4, 1, 0.1f);
    double self = cae::psnr(images.image(0), recon.image(0));
    double other = cae::psnr(images.image(0), unrelated.image(0));
    REQUIRE(self > other);
  }
}

TEST_CASE("dense autoencoder gradients match central finite differences", "[cae]") {
  // single-pixel inputs force the dense variant; with no hidden layer the
  // 3 -> 1 -> 3 stack holds exactly 10 parameters
  cae::CaeHyper hyper;
  hyper.dense_hidden = 0;
  hyper.latent_dim = 1;
  std::size_t worst_checked = SIZE_MAX, totals = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto model = cae::build_cae<double>(1, 1, 3, hyper);
    REQUIRE(model.net.param_count() == 10);
    model.net.init(seed);

    auto x = gradcheck::random_mat(4, 3, seed + 500, 0.05, 0.95);
    gradcheck::MseObjective obj{x, 1e-3};
    auto res = gradcheck::gradient_check(model.net, x, obj);
    REQUIRE(res.worst_rel < 1e-3);
    worst_checked = std::min(worst_checked, res.checked);
    totals = res.total;
  }
  REQUIRE(worst_checked * 5 >= totals * 4);

  SECTION("two-hidden-layer variant stays within tolerance") {
    cae::CaeHyper deep;
    deep.dense_hidden = 3;
    deep.latent_dim = 2;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto model = cae::build_cae<double>(1, 1, 2, deep);
      REQUIRE(model.net.param_count() <= 50);
      model.net.init(seed);
      auto x = gradcheck::random_mat(5, 2, seed + 800, 0.05, 0.95);
      gradcheck::MseObjective obj{x, 0.0};
      auto res = gradcheck::gradient_check(model.net, x, obj);
      REQUIRE(res.worst_rel < 1e-3);
      REQUIRE(res.checked * 5 >= res.total * 4);
    }
  }
}

TEST_CASE("encode produces one latent row per image", "[cae]") {
  cae::CaeHyper hyper;
  hyper.dense_hidden = 4;
  hyper.latent_dim = 5;
  hyper.epochs = 2;
  auto images = random_images(10, 1, 1, 2, 21);
  auto [model, report] = cae::train_cae(images, hyper, 5);

  auto z = cae::encode(model, images);
  REQUIRE(z.rows == 10);
  REQUIRE(z.cols == 5);

  SECTION("deterministic across calls") {
    auto z2 = cae::encode(model, images);
    REQUIRE(z.values == z2.values);
  }

  SECTION("zero weights and biases yield all-zero encodings through ReLU") {
    for (auto& l : model.net.layers())
      for (float& v : l->params()) v = 0.0f;
    auto z0 = cae::encode(model, images);
    for (float v : z0.values) REQUIRE(v == 0.0f);
  }

  SECTION("shape mismatch is rejected") {
    auto wrong = random_images(3, 1, 1, 3, 22);
    REQUIRE_THROWS_AS(cae::encode(model, wrong), Error);
    REQUIRE_THROWS_AS(cae::reconstruct(model, wrong), Error);
  }
}

TEST_CASE("reconstruction clamps to the unit interval on a random model", "[cae]") {
  cae::CaeHyper hyper;
  hyper.filters = {3, 2, 2};
  hyper.latent_dim = 2 * 2 * 2;
  auto model = cae::build_cae<float>(8, 8, 1, hyper);
  model.net.init(99);

  auto images = random_images(6, 8, 8, 1, 23);
  auto recon = cae::reconstruct(model, images);
  REQUIRE(recon.n == images.n);
  REQUIRE(recon.height == images.height);
  REQUIRE(recon.width == images.width);
  REQUIRE(recon.channels == images.channels);
  for (float v : recon.data) {
    REQUIRE(std::isfinite(v));
    REQUIRE(v >= 0.0f);
    REQUIRE(v <= 1.0f);
  }
}

TEST_CASE("psnr formula, sentinel, and symmetry", "[cae]") {
  std::vector<float> zeros(16, 0.0f), ones(16, 1.0f), tenths(16, 0.1f);

  SECTION("identical images hit the +inf sentinel, serialized as inf") {
    double v = cae::psnr(zeros, zeros);
    REQUIRE(std::isinf(v));
    REQUIRE(v > 0.0);
    REQUIRE(io::csv_double(v) == "inf");
    REQUIRE(v > 1e308);   // greater than any finite value
  }

  SECTION("all-zeros vs all-ones is 0 dB") {
    REQUIRE(cae::psnr(zeros, ones) == Catch::Approx(0.0).margin(1e-12));
  }

  SECTION("MSE 0.01 is 20 dB") {
    REQUIRE(cae::psnr(zeros, tenths) == Catch::Approx(20.0).margin(1e-6));
  }

  SECTION("exact symmetry") {
    std::vector<float> a(16), b(16);
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    for (int i = 0; i < 16; ++i) {
      a[i] = dist(rng);
      b[i] = dist(rng);
    }
    REQUIRE(cae::psnr(a, b) == cae::psnr(b, a));
  }

  SECTION("shape mismatch is rejected") {
    REQUIRE_THROWS_AS(cae::psnr(zeros, std::span<const float>(ones.data(), 8)), Error);
  }
}

TEST_CASE("training is deterministic in the seed", "[cae]") {
  auto images = random_images(12, 1, 1, 2, 41);
  cae::CaeHyper hyper;
  hyper.dense_hidden = 4;
  hyper.latent_dim = 3;
  hyper.epochs = 5;
  hyper.batch_size = 4;

  auto [m1, r1] = cae::train_cae(images, hyper, 77);
  auto [m2, r2] = cae::train_cae(images, hyper, 77);
  auto [m3, r3] = cae::train_cae(images, hyper, 78);

  REQUIRE(net_params(m1.net) == net_params(m2.net));
  REQUIRE(r1.total_loss == r2.total_loss);
  REQUIRE(net_params(m1.net) != net_params(m3.net));
}

TEST_CASE("autoencoder checkpoint round trip preserves behavior", "[cae]") {
  auto images = random_images(8, 4, 4, 1, 55);
  cae::CaeHyper hyper;
  hyper.filters = {3, 2, 2};
  hyper.latent_dim = 4;
  hyper.epochs = 3;
  auto [model, report] = cae::train_cae(images, hyper, 9);

  auto path = std::filesystem::temp_directory_path() / "denspu_cae_roundtrip.bin";
  cae::save_autoencoder(path, model);
  auto loaded = cae::load_autoencoder(path);
  std::filesystem::remove(path);

  REQUIRE(loaded.encoder_layers == model.encoder_layers);
  REQUIRE(loaded.latent_dim == model.latent_dim);
  REQUIRE(loaded.height == model.height);

  auto za = cae::encode(model, images);
  auto zb = cae::encode(loaded, images);
  REQUIRE(za.values == zb.values);

  auto ra = cae::reconstruct(model, images);
  auto rb = cae::reconstruct(loaded, images);
  REQUIRE(ra.data == rb.data);
}

TEST_CASE("empty dataset and bad shapes are rejected", "[cae]") {
  cae::CaeHyper hyper;
  REQUIRE_THROWS_AS(cae::train_cae(ImageSet{}, hyper, 1), Error);
  REQUIRE_THROWS_AS(cae::build_cae<float>(0, 4, 1, hyper), Error);
  cae::CaeHyper zero_latent;
  zero_latent.latent_dim = 0;
  REQUIRE_THROWS_AS(cae::build_cae<float>(4, 4, 1, zero_latent), Error);
}
