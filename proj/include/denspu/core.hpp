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
#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace denspu {

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
inline void append_all(std::ostringstream&) {}
template <typename T, typename... Rest>
void append_all(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  append_all(os, rest...);
}
} // namespace detail

template <typename... Args>
[[noreturn]] void fail(const Args&... args) {
  std::ostringstream os;
  detail::append_all(os, args...);
  throw Error(os.str());
}

template <typename... Args>
void require(bool cond, const Args&... args) {
  if (!cond) fail(args...);
}

/// Deterministic pseudo-random engine used across the library. All seed
/// derivation goes through mix_seed so that independent streams (per pair,
/// per tree, per stage) can be replayed regardless of evaluation order.
using Rng = std::mt19937_64;

/// splitmix64 finalizer; decorrelates seed/index combinations.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

/// FNV-1a, used for config/artifact content hashing.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

/// Dense batch of images, channel-last row-major: index
/// ((i*height + y)*width + x)*channels + c. Pixel values live in [0,1].
struct ImageSet {
  int n = 0;
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;          // n * height * width * channels
  std::vector<int> labels;          // empty, or one small non-negative id per image

  int pixels_per_image() const { return height * width * channels; }
  bool has_labels() const { return !labels.empty(); }

  std::span<const float> image(int i) const {
    return {data.data() + static_cast<std::size_t>(i) * pixels_per_image(),
            static_cast<std::size_t>(pixels_per_image())};
  }
  std::span<float> image(int i) {
    return {data.data() + static_cast<std::size_t>(i) * pixels_per_image(),
            static_cast<std::size_t>(pixels_per_image())};
  }

  void validate() const {
    require(n >= 0 && height >= 0 && width >= 0 && channels >= 0, "ImageSet: negative dimension");
    require(data.size() == static_cast<std::size_t>(n) * pixels_per_image(),
            "ImageSet: data size ", data.size(), " does not match n=", n, " of ",
            pixels_per_image(), " values each");
    require(labels.empty() || labels.size() == static_cast<std::size_t>(n),
            "ImageSet: ", labels.size(), " labels for ", n, " images");
    for (float v : data)
      require(v >= 0.0f && v <= 1.0f, "ImageSet: pixel value ", v, " outside [0,1]");
    for (int l : labels)
      require(l >= 0, "ImageSet: negative label ", l);
  }

  ImageSet select(std::span<const int> ids) const {
    ImageSet out;
    out.height = height;
    out.width = width;
    out.channels = channels;
    out.n = static_cast<int>(ids.size());
    out.data.reserve(out.data.size() + ids.size() * pixels_per_image());
    for (int i : ids) {
      require(i >= 0 && i < n, "ImageSet::select: index ", i, " out of range [0,", n, ")");
      auto row = image(i);
      out.data.insert(out.data.end(), row.begin(), row.end());
      if (has_labels()) out.labels.push_back(labels[i]);
    }
    return out;
  }
};

/// Row-major matrix of latent vectors; one sample per row.
struct EncodingMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;        // rows * cols

  EncodingMatrix() = default;
  EncodingMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0f) {}

  std::span<const float> row(std::size_t i) const {
    return {values.data() + i * cols, cols};
  }
  std::span<float> row(std::size_t i) {
    return {values.data() + i * cols, cols};
  }

  EncodingMatrix select(std::span<const std::size_t> ids) const {
    EncodingMatrix out(ids.size(), cols);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      require(ids[k] < rows, "EncodingMatrix::select: row ", ids[k], " out of range");
      auto src = row(ids[k]);
      std::copy(src.begin(), src.end(), out.row(k).begin());
    }
    return out;
  }

  EncodingMatrix concat(const EncodingMatrix& other) const {
    require(cols == other.cols || rows == 0 || other.rows == 0,
            "EncodingMatrix::concat: column mismatch ", cols, " vs ", other.cols);
    EncodingMatrix out;
    out.cols = rows == 0 ? other.cols : cols;
    out.rows = rows + other.rows;
    out.values.reserve(out.rows * out.cols);
    out.values.insert(out.values.end(), values.begin(), values.end());
    out.values.insert(out.values.end(), other.values.begin(), other.values.end());
    return out;
  }
};

inline double euclidean_distance(std::span<const float> a, std::span<const float> b) {
  require(a.size() == b.size(), "euclidean_distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

} // namespace denspu
