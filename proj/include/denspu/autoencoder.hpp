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

// Convolutional autoencoder trained on the labeled positives. Images whose
// spatial size divides by 4 get the conv/pool stack; anything else (the 2-D
// synthetic sets in particular) gets a dense stack behind the same interface.

#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "denspu/core.hpp"
#include "denspu/io.hpp"
#include "denspu/nn.hpp"

namespace denspu::autoencoder {

struct CaeHyper {
  int epochs = 50;
  int batch_size = 64;
  double learning_rate = 1e-4;
  double weight_decay = 1e-3;
  std::size_t latent_dim = 512;
  std::array<int, 3> filters = {64, 32, 8};
  int kernel_size = 3;
  // Hidden width of the dense variant's extra encoder/decoder layer. Zero
  // means the encoder is a single dense layer straight to the latent code.
  std::size_t dense_hidden = 32;
};

/// Per-epoch loss accounting. total_loss[e] is the mean over the epoch's
/// minibatches of the reconstruction term plus the L2 term, both measured
/// before the optimizer step, so total = recon + reg holds by construction
/// up to accumulation rounding.
struct TrainReport {
  std::vector<double> total_loss;
  std::vector<double> recon_loss;
  std::vector<double> reg_loss;
  double wall_seconds = 0.0;
  int epochs_run = 0;
};

template <typename T>
struct CaeNet {
  nn::Network<T> net;
  std::size_t encoder_layers = 0;   // net.layers()[0..encoder_layers) is f_enc
  int height = 0, width = 0, channels = 0;
  std::size_t latent_dim = 0;
};

using AutoencoderModel = CaeNet<float>;

/// Builds the symmetric encoder/decoder stack for the given input shape.
/// Conv path: three conv+relu stages with 2x2 pooling after the first two,
/// mirrored by conv+upsample stages and a final sigmoid conv. A dense pair
/// maps between the flattened conv code and latent_dim when they differ.
template <typename T>
inline CaeNet<T> build_cae(int height, int width, int channels, const CaeHyper& hyper) {
  require(height > 0 && width > 0 && channels > 0, "build_cae: bad input shape ", height, "x",
          width, "x", channels);
  require(hyper.latent_dim > 0, "build_cae: latent_dim must be positive");
  CaeNet<T> model;
  model.height = height;
  model.width = width;
  model.channels = channels;
  model.latent_dim = hyper.latent_dim;

  const bool convolutional = height % 4 == 0 && width % 4 == 0 && height >= 4 && width >= 4;
  auto& net = model.net;
  using nn::Activation;
  if (convolutional) {
    const auto [f0, f1, f2] = hyper.filters;
    require(f0 > 0 && f1 > 0 && f2 > 0, "build_cae: filter counts must be positive");
    const int k = hyper.kernel_size;
    const int h2 = height / 2, w2 = width / 2, h4 = height / 4, w4 = width / 4;
    net.add(std::make_unique<nn::Conv2DLayer<T>>(height, width, channels, f0, k, Activation::relu));
    net.add(std::make_unique<nn::MaxPool2Layer<T>>(height, width, f0));
    net.add(std::make_unique<nn::Conv2DLayer<T>>(h2, w2, f0, f1, k, Activation::relu));
    net.add(std::make_unique<nn::MaxPool2Layer<T>>(h2, w2, f1));
    net.add(std::make_unique<nn::Conv2DLayer<T>>(h4, w4, f1, f2, k, Activation::relu));
    const std::size_t flat = static_cast<std::size_t>(h4) * w4 * f2;
    model.encoder_layers = 5;
    if (hyper.latent_dim != flat) {
      net.add(std::make_unique<nn::DenseLayer<T>>(flat, hyper.latent_dim, Activation::relu));
      net.add(std::make_unique<nn::DenseLayer<T>>(hyper.latent_dim, flat, Activation::relu));
      model.encoder_layers = 6;
    }
    net.add(std::make_unique<nn::Conv2DLayer<T>>(h4, w4, f2, f1, k, Activation::relu));
    net.add(std::make_unique<nn::Upsample2Layer<T>>(h4, w4, f1));
    net.add(std::make_unique<nn::Conv2DLayer<T>>(h2, w2, f1, f0, k, Activation::relu));
    net.add(std::make_unique<nn::Upsample2Layer<T>>(h2, w2, f0));
    net.add(std::make_unique<nn::Conv2DLayer<T>>(height, width, f0, channels, k,
                                                 Activation::sigmoid));
  } else {
    const std::size_t in = static_cast<std::size_t>(height) * width * channels;
    if (hyper.dense_hidden > 0) {
      net.add(std::make_unique<nn::DenseLayer<T>>(in, hyper.dense_hidden, Activation::relu));
      net.add(std::make_unique<nn::DenseLayer<T>>(hyper.dense_hidden, hyper.latent_dim,
                                                  Activation::relu));
      net.add(std::make_unique<nn::DenseLayer<T>>(hyper.latent_dim, hyper.dense_hidden,
                                                  Activation::relu));
      net.add(std::make_unique<nn::DenseLayer<T>>(hyper.dense_hidden, in, Activation::sigmoid));
      model.encoder_layers = 2;
    } else {
      net.add(std::make_unique<nn::DenseLayer<T>>(in, hyper.latent_dim, Activation::relu));
      net.add(std::make_unique<nn::DenseLayer<T>>(hyper.latent_dim, in, Activation::sigmoid));
      model.encoder_layers = 1;
    }
  }
  return model;
}

/// Minibatch Adam on MSE plus (weight_decay/2)*||W||^2 over the weight
/// slices. Deterministic given the seed; single writer.
inline std::pair<AutoencoderModel, TrainReport> train_cae(const ImageSet& images,
                                                          const CaeHyper& hyper,
                                                          std::uint64_t seed) {
  require(images.n > 0, "train_cae: empty dataset");
  require(hyper.epochs > 0 && hyper.batch_size > 0, "train_cae: bad epochs/batch");
  const auto t0 = std::chrono::steady_clock::now();

  AutoencoderModel model = build_cae<float>(images.height, images.width, images.channels, hyper);
  model.net.init(seed);

  const nn::Mat<float> x = nn::to_matrix<float>(images);
  const int n = images.n;
  const int batch = std::min(hyper.batch_size, n);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng order_rng(mix_seed(seed, fnv1a("order")));

  TrainReport report;
  nn::AdamOptimizer<float> opt(hyper.learning_rate, hyper.weight_decay);
  nn::Mat<float> xb(batch, x.cols());
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double sum_recon = 0.0, sum_reg = 0.0, sum_total = 0.0;
    int batches = 0;
    for (int start = 0; start < n; start += batch) {
      const int take = std::min(batch, n - start);
      xb.resize(take, x.cols());
      for (int r = 0; r < take; ++r) xb.row(r) = x.row(order[start + r]);

      auto acts = model.net.forward_cached(xb);
      auto loss = nn::mse_loss(acts.back(), xb);
      const double reg = 0.5 * hyper.weight_decay * model.net.weight_squared_norm();
      const double total = loss.value + reg;
      require(std::isfinite(total), "train_cae: non-finite loss at epoch ", epoch, " batch ",
              batches);
      sum_recon += loss.value;
      sum_reg += reg;
      sum_total += total;
      ++batches;

      model.net.zero_grads();
      model.net.backward(acts, loss.grad);
      opt.step(model.net);
    }
    report.recon_loss.push_back(sum_recon / batches);
    report.reg_loss.push_back(sum_reg / batches);
    report.total_loss.push_back(sum_total / batches);
  }
  report.epochs_run = hyper.epochs;
  require(model.net.all_finite(), "train_cae: non-finite weights after training");
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(model), std::move(report)};
}

namespace detail {

template <typename T>
inline void check_shape(const CaeNet<T>& model, const ImageSet& images, const char* op) {
  require(images.height == model.height && images.width == model.width &&
              images.channels == model.channels,
          op, ": image shape ", images.height, "x", images.width, "x", images.channels,
          " does not match model ", model.height, "x", model.width, "x", model.channels);
}

// Runs images through the first n_layers of the net in fixed-size chunks so
// intermediate conv activations stay bounded.
template <typename T>
inline nn::Mat<T> forward_prefix(const CaeNet<T>& model, const ImageSet& images,
                                 std::size_t n_layers) {
  const long out_cols = static_cast<long>(
      n_layers == 0 ? model.net.in_size() : model.net.layers()[n_layers - 1]->out_size());
  nn::Mat<T> out(images.n, out_cols);
  const int chunk = 128;
  for (int start = 0; start < images.n; start += chunk) {
    const int take = std::min(chunk, images.n - start);
    nn::Mat<T> cur(take, static_cast<long>(model.net.in_size()));
    for (int r = 0; r < take; ++r) {
      auto img = images.image(start + r);
      for (std::size_t j = 0; j < img.size(); ++j) cur(r, static_cast<long>(j)) = static_cast<T>(img[j]);
    }
    for (std::size_t li = 0; li < n_layers; ++li) cur = model.net.layers()[li]->forward(cur);
    out.middleRows(start, take) = cur;
  }
  return out;
}

} // namespace detail

inline EncodingMatrix encode(const AutoencoderModel& model, const ImageSet& images) {
  detail::check_shape(model, images, "encode");
  nn::Mat<float> z = detail::forward_prefix(model, images, model.encoder_layers);
  EncodingMatrix out(static_cast<std::size_t>(images.n), model.latent_dim);
  require(static_cast<std::size_t>(z.cols()) == model.latent_dim,
          "encode: encoder output width ", z.cols(), " != latent_dim ", model.latent_dim);
  for (int i = 0; i < images.n; ++i)
    for (std::size_t j = 0; j < model.latent_dim; ++j) out.row(i)[j] = z(i, static_cast<long>(j));
  return out;
}

inline ImageSet reconstruct(const AutoencoderModel& model, const ImageSet& images) {
  detail::check_shape(model, images, "reconstruct");
  nn::Mat<float> y = detail::forward_prefix(model, images, model.net.layers().size());
  ImageSet out;
  out.n = images.n;
  out.height = images.height;
  out.width = images.width;
  out.channels = images.channels;
  out.labels = images.labels;
  out.data.resize(y.size());
  for (long i = 0; i < y.rows(); ++i)
    for (long j = 0; j < y.cols(); ++j)
      out.data[static_cast<std::size_t>(i) * y.cols() + j] =
          std::clamp(y(i, j), 0.0f, 1.0f);
  return out;
}

/// Peak signal-to-noise ratio in decibels with signal peak 1. Identical
/// inputs return +infinity; io::csv_double renders that as "inf".
inline double psnr(std::span<const float> a, std::span<const float> b) {
  require(a.size() == b.size(), "psnr: shape mismatch, ", a.size(), " vs ", b.size());
  require(!a.empty(), "psnr: empty image");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

// ---------------------------------------------------------------------------
// Checkpoint: "DPUA" magic, version, input shape, latent width, encoder
// layer count, then the shared layer-table-plus-weights body.
// ---------------------------------------------------------------------------

inline void save_autoencoder(const std::filesystem::path& path, const AutoencoderModel& model) {
  auto os = io::open_out(path);
  os.write("DPUA", 4);
  io::put_u32(os, 1); // version
  io::put_u32(os, static_cast<std::uint32_t>(model.height));
  io::put_u32(os, static_cast<std::uint32_t>(model.width));
  io::put_u32(os, static_cast<std::uint32_t>(model.channels));
  io::put_u32(os, static_cast<std::uint32_t>(model.latent_dim));
  io::put_u32(os, static_cast<std::uint32_t>(model.encoder_layers));
  nn::write_network_body(os, model.net);
  require(bool(os), "write failed: ", path.string());
}

inline AutoencoderModel load_autoencoder(const std::filesystem::path& path) {
  auto is = io::open_in(path);
  char magic[4];
  is.read(magic, 4);
  require(bool(is) && std::string(magic, 4) == "DPUA", "bad autoencoder magic in ",
          path.string());
  const std::uint32_t version = io::get_u32(is);
  require(version == 1, "unsupported autoencoder version ", version);
  AutoencoderModel model;
  model.height = static_cast<int>(io::get_u32(is));
  model.width = static_cast<int>(io::get_u32(is));
  model.channels = static_cast<int>(io::get_u32(is));
  model.latent_dim = io::get_u32(is);
  model.encoder_layers = io::get_u32(is);
  model.net = nn::read_network_body<float>(is);
  require(bool(is), "truncated autoencoder file: ", path.string());
  require(model.encoder_layers <= model.net.layers().size(),
          "autoencoder file: encoder layer count out of range");
  return model;
}

} // namespace denspu::autoencoder
