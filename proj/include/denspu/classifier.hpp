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

// Final binary classifier over labeled positives vs mined negatives. Every
// minibatch draws equal counts per class, so unbalanced inputs never skew
// the gradient; training stops early once the loss plateaus.

#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "denspu/core.hpp"
#include "denspu/io.hpp"
#include "denspu/nn.hpp"

namespace denspu::classifier {

struct ClassifierHyper {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-4;
  double weight_decay = 1e-3;
  double momentum = 0.0;
  // Plateau rule: stop when the best epoch loss has not improved by at
  // least plateau_delta for plateau_patience consecutive epochs.
  double plateau_delta = 1e-4;
  int plateau_patience = 10;
  int conv_filters0 = 16;
  int conv_filters1 = 32;
  std::size_t dense_hidden = 32;    // first hidden width of the dense variant
  std::size_t head_hidden = 128;    // shared ReLU head before the sigmoid unit
  bool force_dense = false;         // classify flat vectors even if image-shaped
};

struct BinaryClassifier {
  nn::Network<float> net;
  int height = 0, width = 0, channels = 0;
};

struct FitReport {
  std::vector<double> total_loss;   // per-epoch mean of BCE plus L2 term
  double wall_seconds = 0.0;
  int epochs_run = 0;
  bool stopped_early = false;
};

/// Conv path for 4-divisible images: two conv+pool blocks into the dense
/// head. Dense path otherwise: one hidden layer into the same head.
template <typename T>
inline nn::Network<T> build_classifier_net(int height, int width, int channels,
                                           const ClassifierHyper& hyper) {
  require(height > 0 && width > 0 && channels > 0, "build_classifier_net: bad input shape ",
          height, "x", width, "x", channels);
  nn::Network<T> net;
  using nn::Activation;
  const bool convolutional =
      !hyper.force_dense && height % 4 == 0 && width % 4 == 0 && height >= 4 && width >= 4;
  if (convolutional) {
    const int f0 = hyper.conv_filters0, f1 = hyper.conv_filters1;
    require(f0 > 0 && f1 > 0, "build_classifier_net: filter counts must be positive");
    const int h2 = height / 2, w2 = width / 2, h4 = height / 4, w4 = width / 4;
    net.add(std::make_unique<nn::Conv2DLayer<T>>(height, width, channels, f0, 3, Activation::relu));
    net.add(std::make_unique<nn::MaxPool2Layer<T>>(height, width, f0));
    net.add(std::make_unique<nn::Conv2DLayer<T>>(h2, w2, f0, f1, 3, Activation::relu));
    net.add(std::make_unique<nn::MaxPool2Layer<T>>(h2, w2, f1));
    net.add(std::make_unique<nn::DenseLayer<T>>(static_cast<std::size_t>(h4) * w4 * f1,
                                                hyper.head_hidden, Activation::relu));
  } else {
    const std::size_t in = static_cast<std::size_t>(height) * width * channels;
    net.add(std::make_unique<nn::DenseLayer<T>>(in, hyper.dense_hidden, Activation::relu));
    net.add(std::make_unique<nn::DenseLayer<T>>(hyper.dense_hidden, hyper.head_hidden,
                                                Activation::relu));
  }
  net.add(std::make_unique<nn::DenseLayer<T>>(hyper.head_hidden, 1, Activation::sigmoid));
  return net;
}

/// Cycles a class's shuffled index stream; reshuffles on exhaustion so every
/// epoch-sized window covers the class nearly uniformly.
class ClassStream {
public:
  ClassStream(int n, std::uint64_t seed) : n_(n), rng_(seed), order_(n) {
    std::iota(order_.begin(), order_.end(), 0);
    std::shuffle(order_.begin(), order_.end(), rng_);
  }

  int next() {
    if (pos_ == n_) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      pos_ = 0;
    }
    return order_[pos_++];
  }

private:
  int n_;
  Rng rng_;
  std::vector<int> order_;
  int pos_ = 0;
};

/// Equal per-class draws per minibatch. One epoch is enough batches for the
/// larger class to be seen once, so per-class draw counts per epoch are
/// exactly equal (difference 0, well under the batch_size/2 contract).
class BalancedSampler {
public:
  BalancedSampler(int n_pos, int n_neg, int batch_size, std::uint64_t seed)
      : pos_(n_pos, mix_seed(seed, fnv1a("pos"))), neg_(n_neg, mix_seed(seed, fnv1a("neg"))) {
    per_class_ = std::max(1, batch_size / 2);
    const int larger = std::max(n_pos, n_neg);
    batches_per_epoch_ = (larger + per_class_ - 1) / per_class_;
  }

  int batches_per_epoch() const { return batches_per_epoch_; }
  int per_class() const { return per_class_; }

  /// Fills one minibatch: per_class() positive indices then as many negative
  /// indices.
  void next_batch(std::vector<int>& pos_ids, std::vector<int>& neg_ids) {
    pos_ids.resize(per_class_);
    neg_ids.resize(per_class_);
    for (int i = 0; i < per_class_; ++i) pos_ids[i] = pos_.next();
    for (int i = 0; i < per_class_; ++i) neg_ids[i] = neg_.next();
  }

private:
  ClassStream pos_, neg_;
  int per_class_ = 0;
  int batches_per_epoch_ = 0;
};

/// SGD on binary cross-entropy with L2 on the weight slices; positives are
/// labeled 1, negatives 0. Deterministic given the seed.
inline std::pair<BinaryClassifier, FitReport> train_classifier(const ImageSet& positives,
                                                               const ImageSet& negatives,
                                                               const ClassifierHyper& hyper,
                                                               std::uint64_t seed) {
  require(positives.n > 0, "train_classifier: empty positive class");
  require(negatives.n > 0, "train_classifier: empty negative class");
  require(positives.height == negatives.height && positives.width == negatives.width &&
              positives.channels == negatives.channels,
          "train_classifier: class shapes differ");
  require(hyper.epochs > 0 && hyper.batch_size > 0, "train_classifier: bad epochs/batch");
  const auto t0 = std::chrono::steady_clock::now();

  BinaryClassifier model;
  model.height = positives.height;
  model.width = positives.width;
  model.channels = positives.channels;
  model.net = build_classifier_net<float>(model.height, model.width, model.channels, hyper);
  model.net.init(seed);

  const nn::Mat<float> xp = nn::to_matrix<float>(positives);
  const nn::Mat<float> xn = nn::to_matrix<float>(negatives);

  BalancedSampler sampler(positives.n, negatives.n, hyper.batch_size, seed);
  const int per_class = sampler.per_class();
  nn::Mat<float> xb(2 * per_class, xp.cols());
  nn::Mat<float> yb(2 * per_class, 1);
  for (int i = 0; i < per_class; ++i) {
    yb(i, 0) = 1.0f;
    yb(per_class + i, 0) = 0.0f;
  }

  nn::SgdOptimizer<float> opt(hyper.learning_rate, hyper.momentum, hyper.weight_decay);
  FitReport report;
  std::vector<int> pos_ids, neg_ids;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    double sum_total = 0.0;
    for (int b = 0; b < sampler.batches_per_epoch(); ++b) {
      sampler.next_batch(pos_ids, neg_ids);
      for (int i = 0; i < per_class; ++i) xb.row(i) = xp.row(pos_ids[i]);
      for (int i = 0; i < per_class; ++i) xb.row(per_class + i) = xn.row(neg_ids[i]);

      auto acts = model.net.forward_cached(xb);
      auto loss = nn::bce_loss(acts.back(), yb);
      const double reg = 0.5 * hyper.weight_decay * model.net.weight_squared_norm();
      const double total = loss.value + reg;
      require(std::isfinite(total), "train_classifier: non-finite loss at epoch ", epoch,
              " batch ", b);
      sum_total += total;

      model.net.zero_grads();
      model.net.backward(acts, loss.grad);
      opt.step(model.net);
    }
    const double epoch_loss = sum_total / sampler.batches_per_epoch();
    report.total_loss.push_back(epoch_loss);
    report.epochs_run = epoch + 1;
    if (best - epoch_loss >= hyper.plateau_delta) {
      best = epoch_loss;
      stale = 0;
    } else {
      best = std::min(best, epoch_loss);
      if (++stale >= hyper.plateau_patience) {
        report.stopped_early = true;
        break;
      }
    }
  }
  require(model.net.all_finite(), "train_classifier: non-finite weights after training");
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(model), std::move(report)};
}

/// Per-sample sigmoid outputs, evaluated in fixed-size chunks.
inline std::vector<double> predict(const BinaryClassifier& model, const ImageSet& images) {
  require(images.height == model.height && images.width == model.width &&
              images.channels == model.channels,
          "predict: image shape ", images.height, "x", images.width, "x", images.channels,
          " does not match model ", model.height, "x", model.width, "x", model.channels);
  std::vector<double> probs(static_cast<std::size_t>(images.n));
  const int chunk = 256;
  for (int start = 0; start < images.n; start += chunk) {
    const int take = std::min(chunk, images.n - start);
    nn::Mat<float> cur(take, static_cast<long>(model.net.in_size()));
    for (int r = 0; r < take; ++r) {
      auto img = images.image(start + r);
      for (std::size_t j = 0; j < img.size(); ++j)
        cur(r, static_cast<long>(j)) = img[j];
    }
    nn::Mat<float> out = model.net.predict(cur);
    for (int r = 0; r < take; ++r) {
      // float sigmoid saturates to the closed endpoints for |logit| > ~17;
      // nudge one ulp inside so outputs stay strictly in (0,1)
      float p = std::min(std::max(out(r, 0), std::nextafter(0.0f, 1.0f)),
                         std::nextafter(1.0f, 0.0f));
      probs[static_cast<std::size_t>(start + r)] = p;
    }
  }
  return probs;
}

inline int label_of(double probability) { return probability >= 0.5 ? 1 : 0; }

inline std::vector<int> predict_labels(const BinaryClassifier& model, const ImageSet& images) {
  auto probs = predict(model, images);
  std::vector<int> labels(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) labels[i] = label_of(probs[i]);
  return labels;
}

inline void write_predictions_csv(const std::filesystem::path& path,
                                  std::span<const double> probabilities) {
  io::CsvWriter csv(path);
  csv.row({"sample_id", "probability", "label"});
  for (std::size_t i = 0; i < probabilities.size(); ++i)
    csv.row({std::to_string(i), io::csv_double(probabilities[i], 17),
             std::to_string(label_of(probabilities[i]))});
}

inline void save_classifier(const std::filesystem::path& path, const BinaryClassifier& model) {
  auto os = io::open_out(path);
  os.write("DPUC", 4);
  io::put_u32(os, 1); // version
  io::put_u32(os, static_cast<std::uint32_t>(model.height));
  io::put_u32(os, static_cast<std::uint32_t>(model.width));
  io::put_u32(os, static_cast<std::uint32_t>(model.channels));
  nn::write_network_body(os, model.net);
  require(bool(os), "write failed: ", path.string());
}

inline BinaryClassifier load_classifier(const std::filesystem::path& path) {
  auto is = io::open_in(path);
  char magic[4];
  is.read(magic, 4);
  require(bool(is) && std::string(magic, 4) == "DPUC", "bad classifier magic in ", path.string());
  const std::uint32_t version = io::get_u32(is);
  require(version == 1, "unsupported classifier version ", version);
  BinaryClassifier model;
  model.height = static_cast<int>(io::get_u32(is));
  model.width = static_cast<int>(io::get_u32(is));
  model.channels = static_cast<int>(io::get_u32(is));
  model.net = nn::read_network_body<float>(is);
  require(bool(is), "truncated classifier file: ", path.string());
  return model;
}

} // namespace denspu::classifier
