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

// Minimal sequential network: dense, 3x3-style convolution (stride 1, same
// padding), 2x2 max pooling, 2x2 nearest upsampling. Templated on the scalar
// so training runs in float while finite-difference tests run in double.
// Image tensors are channel-last, flattened row-major as (y, x, c).

#pragma once

#include <Eigen/Dense>
#include <array>
#include <memory>
#include <vector>

#include "denspu/core.hpp"
#include "denspu/io.hpp"

namespace denspu::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Parameter buffers are mapped into Eigen kernels whose summation grouping
// can depend on pointer alignment. Maximal alignment keeps every run on the
// same code path, which the bit-reproducibility contract relies on.
template <typename T>
using AlignedVec = std::vector<T, Eigen::aligned_allocator<T>>;

enum class Activation : std::uint32_t { linear = 0, relu = 1, sigmoid = 2 };

enum class LayerKind : std::uint32_t { dense = 0, conv = 1, maxpool = 2, upsample = 3 };

/// Serializable layer description; meaning of the dims depends on the kind:
///   dense:    dims = {in, out}
///   conv:     dims = {height, width, in_channels, out_channels, ksize}
///   maxpool:  dims = {height, width, channels}
///   upsample: dims = {height, width, channels}
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  Activation act = Activation::linear;
  std::array<std::uint32_t, 5> dims = {0, 0, 0, 0, 0};
};

namespace detail {

template <typename T>
inline void apply_activation(Mat<T>& y, Activation act) {
  switch (act) {
    case Activation::linear:
      return;
    case Activation::relu:
      y = y.cwiseMax(T(0));
      return;
    case Activation::sigmoid:
      y = y.unaryExpr([](T v) { return T(1) / (T(1) + std::exp(-v)); });
      return;
  }
}

// derivative expressed through the activation output
template <typename T>
inline void scale_by_activation_grad(Mat<T>& dy, const Mat<T>& y, Activation act) {
  switch (act) {
    case Activation::linear:
      return;
    case Activation::relu:
      dy = dy.binaryExpr(y, [](T g, T v) { return v > T(0) ? g : T(0); });
      return;
    case Activation::sigmoid:
      dy = dy.binaryExpr(y, [](T g, T v) { return g * v * (T(1) - v); });
      return;
  }
}

} // namespace detail

template <typename T>
class Layer {
public:
  virtual ~Layer() = default;

  virtual std::size_t in_size() const = 0;
  virtual std::size_t out_size() const = 0;
  virtual LayerSpec spec() const = 0;

  virtual Mat<T> forward(const Mat<T>& x) = 0;
  /// Propagates dy back to dx, accumulating parameter gradients.
  virtual Mat<T> backward(const Mat<T>& x, const Mat<T>& y, const Mat<T>& dy) = 0;

  std::span<T> params() { return params_; }
  std::span<T> grads() { return grads_; }
  /// Leading slice of params() subject to L2 regularization (weights, not
  /// biases).
  std::size_t weight_count() const { return weight_count_; }

  void zero_grads() { std::fill(grads_.begin(), grads_.end(), T(0)); }

  virtual void init(Rng& rng) {
    double bound = fan_in_ > 0 ? 1.0 / std::sqrt(static_cast<double>(fan_in_)) : 0.0;
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < weight_count_; ++i) params_[i] = static_cast<T>(dist(rng));
    for (std::size_t i = weight_count_; i < params_.size(); ++i) params_[i] = T(0);
  }

protected:
  AlignedVec<T> params_;
  AlignedVec<T> grads_;
  std::size_t weight_count_ = 0;
  std::size_t fan_in_ = 0;
};

template <typename T>
class DenseLayer final : public Layer<T> {
public:
  DenseLayer(std::size_t in, std::size_t out, Activation act) : in_(in), out_(out), act_(act) {
    this->params_.resize(in * out + out, T(0));
    this->grads_.resize(this->params_.size(), T(0));
    this->weight_count_ = in * out;
    this->fan_in_ = in;
  }

  std::size_t in_size() const override { return in_; }
  std::size_t out_size() const override { return out_; }

  LayerSpec spec() const override {
    return {LayerKind::dense, act_,
            {static_cast<std::uint32_t>(in_), static_cast<std::uint32_t>(out_), 0, 0, 0}};
  }

  Mat<T> forward(const Mat<T>& x) override {
    Mat<T> y = x * weights();
    y.rowwise() += bias();
    detail::apply_activation(y, act_);
    return y;
  }

  Mat<T> backward(const Mat<T>& x, const Mat<T>& y, const Mat<T>& dy) override {
    Mat<T> dpre = dy;
    detail::scale_by_activation_grad(dpre, y, act_);
    weight_grads() += x.transpose() * dpre;
    bias_grads() += dpre.colwise().sum();
    return dpre * weights().transpose();
  }

private:
  using MatMap = Eigen::Map<Mat<T>>;
  using RowMap = Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>;

  MatMap weights() { return {this->params_.data(), static_cast<long>(in_), static_cast<long>(out_)}; }
  RowMap bias() { return {this->params_.data() + in_ * out_, static_cast<long>(out_)}; }
  MatMap weight_grads() {
    return {this->grads_.data(), static_cast<long>(in_), static_cast<long>(out_)};
  }
  RowMap bias_grads() { return {this->grads_.data() + in_ * out_, static_cast<long>(out_)}; }

  std::size_t in_, out_;
  Activation act_;
};

/// Square convolution, stride 1, zero padding preserving the spatial size.
/// Implemented as im2col followed by one matrix product per sample.
template <typename T>
class Conv2DLayer final : public Layer<T> {
public:
  Conv2DLayer(int height, int width, int in_c, int out_c, int ksize, Activation act)
      : h_(height), w_(width), in_c_(in_c), out_c_(out_c), k_(ksize), act_(act) {
    require(ksize % 2 == 1, "Conv2DLayer: kernel size ", ksize, " must be odd");
    patch_ = static_cast<std::size_t>(k_) * k_ * in_c_;
    this->params_.resize(patch_ * out_c_ + out_c_, T(0));
    this->grads_.resize(this->params_.size(), T(0));
    this->weight_count_ = patch_ * out_c_;
    this->fan_in_ = patch_;
  }

  std::size_t in_size() const override {
    return static_cast<std::size_t>(h_) * w_ * in_c_;
  }
  std::size_t out_size() const override {
    return static_cast<std::size_t>(h_) * w_ * out_c_;
  }

  LayerSpec spec() const override {
    return {LayerKind::conv, act_,
            {static_cast<std::uint32_t>(h_), static_cast<std::uint32_t>(w_),
             static_cast<std::uint32_t>(in_c_), static_cast<std::uint32_t>(out_c_),
             static_cast<std::uint32_t>(k_)}};
  }

  Mat<T> forward(const Mat<T>& x) override {
    const long batch = x.rows();
    Mat<T> y(batch, out_size());
    Mat<T> col(static_cast<long>(h_) * w_, patch_);
    for (long s = 0; s < batch; ++s) {
      im2col(x.row(s).data(), col);
      Eigen::Map<Mat<T>> ys(y.row(s).data(), static_cast<long>(h_) * w_, out_c_);
      ys.noalias() = col * weights();
      ys.rowwise() += bias();
    }
    detail::apply_activation(y, act_);
    return y;
  }

  Mat<T> backward(const Mat<T>& x, const Mat<T>& y, const Mat<T>& dy) override {
    Mat<T> dpre = dy;
    detail::scale_by_activation_grad(dpre, y, act_);

    const long batch = x.rows();
    Mat<T> dx = Mat<T>::Zero(batch, in_size());
    Mat<T> col(static_cast<long>(h_) * w_, patch_);
    Mat<T> dcol(static_cast<long>(h_) * w_, patch_);
    for (long s = 0; s < batch; ++s) {
      im2col(x.row(s).data(), col);
      Eigen::Map<const Mat<T>> dps(dpre.row(s).data(), static_cast<long>(h_) * w_, out_c_);
      weight_grads().noalias() += col.transpose() * dps;
      bias_grads() += dps.colwise().sum();
      dcol.noalias() = dps * weights().transpose();
      col2im(dcol, dx.row(s).data());
    }
    return dx;
  }

private:
  using MatMap = Eigen::Map<Mat<T>>;
  using RowMap = Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>;

  MatMap weights() {
    return {this->params_.data(), static_cast<long>(patch_), static_cast<long>(out_c_)};
  }
  RowMap bias() { return {this->params_.data() + patch_ * out_c_, static_cast<long>(out_c_)}; }
  MatMap weight_grads() {
    return {this->grads_.data(), static_cast<long>(patch_), static_cast<long>(out_c_)};
  }
  RowMap bias_grads() { return {this->grads_.data() + patch_ * out_c_, static_cast<long>(out_c_)}; }

  void im2col(const T* img, Mat<T>& col) const {
    const int pad = k_ / 2;
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) {
        T* dst = col.row(static_cast<long>(y) * w_ + x).data();
        for (int dy = 0; dy < k_; ++dy) {
          const int sy = y + dy - pad;
          for (int dx = 0; dx < k_; ++dx) {
            const int sx = x + dx - pad;
            if (sy < 0 || sy >= h_ || sx < 0 || sx >= w_) {
              for (int c = 0; c < in_c_; ++c) *dst++ = T(0);
            } else {
              const T* src = img + (static_cast<std::size_t>(sy) * w_ + sx) * in_c_;
              for (int c = 0; c < in_c_; ++c) *dst++ = src[c];
            }
          }
        }
      }
    }
  }

  void col2im(const Mat<T>& dcol, T* dimg) const {
    const int pad = k_ / 2;
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) {
        const T* src = dcol.row(static_cast<long>(y) * w_ + x).data();
        for (int dy = 0; dy < k_; ++dy) {
          const int sy = y + dy - pad;
          for (int dx = 0; dx < k_; ++dx) {
            const int sx = x + dx - pad;
            if (sy < 0 || sy >= h_ || sx < 0 || sx >= w_) {
              src += in_c_;
            } else {
              T* dst = dimg + (static_cast<std::size_t>(sy) * w_ + sx) * in_c_;
              for (int c = 0; c < in_c_; ++c) dst[c] += *src++;
            }
          }
        }
      }
    }
  }

  int h_, w_, in_c_, out_c_, k_;
  Activation act_;
  std::size_t patch_ = 0;
};

/// 2x2 max pooling with stride 2; spatial dims must be even. The winner of
/// each window is cached during forward for the backward scatter.
template <typename T>
class MaxPool2Layer final : public Layer<T> {
public:
  MaxPool2Layer(int height, int width, int channels) : h_(height), w_(width), c_(channels) {
    require(h_ % 2 == 0 && w_ % 2 == 0, "MaxPool2Layer: odd spatial size ", h_, "x", w_);
  }

  std::size_t in_size() const override { return static_cast<std::size_t>(h_) * w_ * c_; }
  std::size_t out_size() const override { return static_cast<std::size_t>(h_ / 2) * (w_ / 2) * c_; }

  LayerSpec spec() const override {
    return {LayerKind::maxpool, Activation::linear,
            {static_cast<std::uint32_t>(h_), static_cast<std::uint32_t>(w_),
             static_cast<std::uint32_t>(c_), 0, 0}};
  }

  Mat<T> forward(const Mat<T>& x) override {
    const long batch = x.rows();
    const int oh = h_ / 2, ow = w_ / 2;
    Mat<T> y(batch, out_size());
    argmax_.assign(static_cast<std::size_t>(batch) * out_size(), 0);
    for (long s = 0; s < batch; ++s) {
      const T* img = x.row(s).data();
      T* out = y.row(s).data();
      std::size_t* win = argmax_.data() + static_cast<std::size_t>(s) * out_size();
      for (int yo = 0; yo < oh; ++yo)
        for (int xo = 0; xo < ow; ++xo)
          for (int c = 0; c < c_; ++c) {
            std::size_t best = idx(2 * yo, 2 * xo, c);
            T best_v = img[best];
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                std::size_t i = idx(2 * yo + dy, 2 * xo + dx, c);
                if (img[i] > best_v) {
                  best_v = img[i];
                  best = i;
                }
              }
            std::size_t o = (static_cast<std::size_t>(yo) * ow + xo) * c_ + c;
            out[o] = best_v;
            win[o] = best;
          }
    }
    return y;
  }

  Mat<T> backward(const Mat<T>& x, const Mat<T>&, const Mat<T>& dy) override {
    const long batch = x.rows();
    Mat<T> dx = Mat<T>::Zero(batch, in_size());
    for (long s = 0; s < batch; ++s) {
      const T* g = dy.row(s).data();
      T* out = dx.row(s).data();
      const std::size_t* win = argmax_.data() + static_cast<std::size_t>(s) * out_size();
      for (std::size_t o = 0; o < out_size(); ++o) out[win[o]] += g[o];
    }
    return dx;
  }

private:
  std::size_t idx(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * w_ + x) * c_ + c;
  }

  int h_, w_, c_;
  std::vector<std::size_t> argmax_;
};

/// 2x2 nearest-neighbor upsampling.
template <typename T>
class Upsample2Layer final : public Layer<T> {
public:
  Upsample2Layer(int height, int width, int channels) : h_(height), w_(width), c_(channels) {}

  std::size_t in_size() const override { return static_cast<std::size_t>(h_) * w_ * c_; }
  std::size_t out_size() const override { return static_cast<std::size_t>(h_) * 2 * w_ * 2 * c_; }

  LayerSpec spec() const override {
    return {LayerKind::upsample, Activation::linear,
            {static_cast<std::uint32_t>(h_), static_cast<std::uint32_t>(w_),
             static_cast<std::uint32_t>(c_), 0, 0}};
  }

  Mat<T> forward(const Mat<T>& x) override {
    const long batch = x.rows();
    const int ow = 2 * w_;
    Mat<T> y(batch, out_size());
    for (long s = 0; s < batch; ++s) {
      const T* img = x.row(s).data();
      T* out = y.row(s).data();
      for (int yo = 0; yo < 2 * h_; ++yo)
        for (int xo = 0; xo < ow; ++xo) {
          const T* src = img + (static_cast<std::size_t>(yo / 2) * w_ + xo / 2) * c_;
          T* dst = out + (static_cast<std::size_t>(yo) * ow + xo) * c_;
          for (int c = 0; c < c_; ++c) dst[c] = src[c];
        }
    }
    return y;
  }

  Mat<T> backward(const Mat<T>& x, const Mat<T>&, const Mat<T>& dy) override {
    const long batch = x.rows();
    const int ow = 2 * w_;
    Mat<T> dx = Mat<T>::Zero(batch, in_size());
    for (long s = 0; s < batch; ++s) {
      const T* g = dy.row(s).data();
      T* out = dx.row(s).data();
      for (int yo = 0; yo < 2 * h_; ++yo)
        for (int xo = 0; xo < ow; ++xo) {
          const T* src = g + (static_cast<std::size_t>(yo) * ow + xo) * c_;
          T* dst = out + (static_cast<std::size_t>(yo / 2) * w_ + xo / 2) * c_;
          for (int c = 0; c < c_; ++c) dst[c] += src[c];
        }
    }
    return dx;
  }

private:
  int h_, w_, c_;
};

template <typename T>
class Network {
public:
  void add(std::unique_ptr<Layer<T>> layer) {
    if (!layers_.empty())
      require(layers_.back()->out_size() == layer->in_size(), "Network: layer size mismatch, ",
              layers_.back()->out_size(), " -> ", layer->in_size());
    layers_.push_back(std::move(layer));
  }

  std::size_t in_size() const { return layers_.front()->in_size(); }
  std::size_t out_size() const { return layers_.back()->out_size(); }
  std::vector<std::unique_ptr<Layer<T>>>& layers() { return layers_; }
  const std::vector<std::unique_ptr<Layer<T>>>& layers() const { return layers_; }

  void init(std::uint64_t seed) {
    Rng rng(mix_seed(seed, fnv1a("init")));
    for (auto& l : layers_) l->init(rng);
  }

  /// Forward pass keeping every intermediate activation; acts[0] is the
  /// input, acts.back() the network output.
  std::vector<Mat<T>> forward_cached(const Mat<T>& x) const {
    std::vector<Mat<T>> acts;
    acts.reserve(layers_.size() + 1);
    acts.push_back(x);
    for (const auto& l : layers_) acts.push_back(const_cast<Layer<T>&>(*l).forward(acts.back()));
    return acts;
  }

  Mat<T> predict(const Mat<T>& x) const {
    Mat<T> cur = x;
    for (const auto& l : layers_) cur = const_cast<Layer<T>&>(*l).forward(cur);
    return cur;
  }

  /// Backpropagate the output gradient, accumulating parameter gradients.
  void backward(const std::vector<Mat<T>>& acts, Mat<T> dy) {
    for (std::size_t i = layers_.size(); i-- > 0;)
      dy = layers_[i]->backward(acts[i], acts[i + 1], dy);
  }

  void zero_grads() {
    for (auto& l : layers_) l->zero_grads();
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += const_cast<Layer<T>&>(*l).params().size();
    return n;
  }

  /// Sum of squared regularized weights, for the L2 term.
  double weight_squared_norm() const {
    double total = 0.0;
    for (const auto& l : layers_) {
      auto p = const_cast<Layer<T>&>(*l).params();
      for (std::size_t i = 0; i < l->weight_count(); ++i)
        total += static_cast<double>(p[i]) * static_cast<double>(p[i]);
    }
    return total;
  }

  bool all_finite() const {
    for (const auto& l : layers_)
      for (T v : const_cast<Layer<T>&>(*l).params())
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

// ---------------------------------------------------------------------------
// Losses. Both return the scalar loss and the gradient w.r.t. predictions.
// ---------------------------------------------------------------------------

template <typename T>
struct LossResult {
  double value = 0.0;
  Mat<T> grad;
};

/// Mean squared error over every element of the batch.
template <typename T>
inline LossResult<T> mse_loss(const Mat<T>& pred, const Mat<T>& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(),
          "mse_loss: shape mismatch");
  const double scale = 1.0 / (static_cast<double>(pred.rows()) * pred.cols());
  LossResult<T> r;
  Mat<T> diff = pred - target;
  r.value = diff.template cast<double>().array().square().sum() * scale;
  r.grad = diff * static_cast<T>(2.0 * scale);
  return r;
}

/// Binary cross-entropy over a single-column probability output. Labels are
/// 0/1 entries in the target column. Probabilities are clamped away from the
/// endpoints; the gradient is zero where the clamp is active.
template <typename T>
inline LossResult<T> bce_loss(const Mat<T>& pred, const Mat<T>& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(),
          "bce_loss: shape mismatch");
  const T eps = static_cast<T>(1e-7);
  const double scale = 1.0 / static_cast<double>(pred.rows() * pred.cols());
  LossResult<T> r;
  r.grad = Mat<T>::Zero(pred.rows(), pred.cols());
  double total = 0.0;
  for (long i = 0; i < pred.rows(); ++i)
    for (long j = 0; j < pred.cols(); ++j) {
      T p = pred(i, j);
      T clamped = std::min(std::max(p, eps), T(1) - eps);
      double t = static_cast<double>(target(i, j));
      total -= t * std::log(static_cast<double>(clamped)) +
               (1.0 - t) * std::log(1.0 - static_cast<double>(clamped));
      if (p == clamped)
        r.grad(i, j) =
            static_cast<T>(scale * (static_cast<double>(p) - t) /
                           (static_cast<double>(p) * (1.0 - static_cast<double>(p))));
    }
  r.value = total * scale;
  return r;
}

// ---------------------------------------------------------------------------
// Optimizers. Weight decay (the L2 gradient) applies to each layer's weight
// slice only, never to biases.
// ---------------------------------------------------------------------------

template <typename T>
class SgdOptimizer {
public:
  SgdOptimizer(double lr, double momentum, double weight_decay)
      : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {}

  void step(Network<T>& net) {
    if (velocity_.empty()) {
      for (auto& l : net.layers()) velocity_.emplace_back(l->params().size(), T(0));
    }
    for (std::size_t li = 0; li < net.layers().size(); ++li) {
      auto& layer = *net.layers()[li];
      auto p = layer.params();
      auto g = layer.grads();
      auto& v = velocity_[li];
      const std::size_t wc = layer.weight_count();
      for (std::size_t i = 0; i < p.size(); ++i) {
        double grad = static_cast<double>(g[i]);
        if (i < wc) grad += weight_decay_ * static_cast<double>(p[i]);
        double vel = momentum_ * static_cast<double>(v[i]) - lr_ * grad;
        v[i] = static_cast<T>(vel);
        p[i] = static_cast<T>(static_cast<double>(p[i]) + vel);
      }
    }
  }

private:
  double lr_, momentum_, weight_decay_;
  std::vector<std::vector<T>> velocity_;
};

template <typename T>
class AdamOptimizer {
public:
  AdamOptimizer(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(Network<T>& net) {
    if (m_.empty()) {
      for (auto& l : net.layers()) {
        m_.emplace_back(l->params().size(), 0.0);
        v_.emplace_back(l->params().size(), 0.0);
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t li = 0; li < net.layers().size(); ++li) {
      auto& layer = *net.layers()[li];
      auto p = layer.params();
      auto g = layer.grads();
      const std::size_t wc = layer.weight_count();
      for (std::size_t i = 0; i < p.size(); ++i) {
        double grad = static_cast<double>(g[i]);
        if (i < wc) grad += weight_decay_ * static_cast<double>(p[i]);
        m_[li][i] = beta1_ * m_[li][i] + (1.0 - beta1_) * grad;
        v_[li][i] = beta2_ * v_[li][i] + (1.0 - beta2_) * grad * grad;
        double update = lr_ * (m_[li][i] / bc1) / (std::sqrt(v_[li][i] / bc2) + eps_);
        p[i] = static_cast<T>(static_cast<double>(p[i]) - update);
      }
    }
  }

private:
  double lr_, weight_decay_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// ---------------------------------------------------------------------------
// Checkpoints: layer spec table then all parameters as little-endian f32 in
// declaration order. The body is shared by every model file format.
// ---------------------------------------------------------------------------

template <typename T>
inline void write_network_body(std::ostream& os, const Network<T>& net) {
  io::put_u32(os, static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& l : net.layers()) {
    LayerSpec s = l->spec();
    io::put_u32(os, static_cast<std::uint32_t>(s.kind));
    io::put_u32(os, static_cast<std::uint32_t>(s.act));
    for (std::uint32_t d : s.dims) io::put_u32(os, d);
  }
  for (const auto& l : net.layers())
    for (T v : const_cast<Layer<T>&>(*l).params()) io::put_f32(os, static_cast<float>(v));
}

template <typename T>
inline void save_network(const std::filesystem::path& path, const Network<T>& net) {
  auto os = io::open_out(path);
  os.write("DPUM", 4);
  io::put_u32(os, 1); // version
  write_network_body(os, net);
  require(bool(os), "write failed: ", path.string());
}

template <typename T>
inline std::unique_ptr<Layer<T>> make_layer(const LayerSpec& s) {
  switch (s.kind) {
    case LayerKind::dense:
      return std::make_unique<DenseLayer<T>>(s.dims[0], s.dims[1], s.act);
    case LayerKind::conv:
      return std::make_unique<Conv2DLayer<T>>(s.dims[0], s.dims[1], s.dims[2], s.dims[3],
                                              s.dims[4], s.act);
    case LayerKind::maxpool:
      return std::make_unique<MaxPool2Layer<T>>(s.dims[0], s.dims[1], s.dims[2]);
    case LayerKind::upsample:
      return std::make_unique<Upsample2Layer<T>>(s.dims[0], s.dims[1], s.dims[2]);
  }
  fail("make_layer: bad layer kind");
}

template <typename T>
inline Network<T> read_network_body(std::istream& is) {
  std::uint32_t n_layers = io::get_u32(is);
  Network<T> net;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    LayerSpec s;
    s.kind = static_cast<LayerKind>(io::get_u32(is));
    s.act = static_cast<Activation>(io::get_u32(is));
    for (auto& d : s.dims) d = io::get_u32(is);
    net.add(make_layer<T>(s));
  }
  for (auto& l : net.layers())
    for (T& v : l->params()) v = static_cast<T>(io::get_f32(is));
  return net;
}

template <typename T>
inline Network<T> load_network(const std::filesystem::path& path) {
  auto is = io::open_in(path);
  char magic[4];
  is.read(magic, 4);
  require(bool(is) && std::string(magic, 4) == "DPUM", "bad model magic in ", path.string());
  std::uint32_t version = io::get_u32(is);
  require(version == 1, "unsupported model version ", version);
  Network<T> net = read_network_body<T>(is);
  require(bool(is), "truncated model file: ", path.string());
  return net;
}

/// Flattens an image set into one row per image, pixels in storage order.
template <typename T>
inline Mat<T> to_matrix(const ImageSet& images) {
  Mat<T> x(images.n, images.pixels_per_image());
  for (int i = 0; i < images.n; ++i) {
    auto img = images.image(i);
    for (std::size_t j = 0; j < img.size(); ++j) x(i, static_cast<long>(j)) = static_cast<T>(img[j]);
  }
  return x;
}

} // namespace denspu::nn
