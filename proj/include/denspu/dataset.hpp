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

// Benchmark ingestion (IDX, CIFAR-10 binary), synthetic toy generators, and
// the positive/unlabeled split. The unlabeled ground truth is retained for
// post-hoc evaluation but gated behind an explicit access tag so pipeline
// code cannot consume it by accident.

#pragma once

#include <numeric>
#include <set>
#include <string>

#include "denspu/core.hpp"
#include "denspu/io.hpp"

namespace denspu::dataset {

/// Call-site marker for evaluation-only access to hidden labels.
struct EvalAccess {
  explicit EvalAccess() = default;
};

class PUSplit {
public:
  ImageSet positive_labeled;        // binary labels, all 1
  ImageSet unlabeled;               // no labels attached
  ImageSet test;                    // binary labels 0/1
  std::vector<int> positive_class_ids;

  /// Ground-truth binary labels of the unlabeled pool, index-aligned with
  /// unlabeled. Evaluation code only.
  std::span<const int> unlabeled_truth(EvalAccess) const { return hidden_truth_; }

  friend PUSplit make_pu_split(const ImageSet&, const std::set<int>&, int, const ImageSet&,
                               std::uint64_t);
  friend void subsample_unlabeled(PUSplit&, int, std::uint64_t);

private:
  std::vector<int> hidden_truth_;
};

// ---------------------------------------------------------------------------
// IDX (big-endian magic and dims, then raw bytes, pixel = byte / 255).
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint32_t get_be_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

} // namespace detail

inline ImageSet load_idx(const std::filesystem::path& images_path,
                         const std::filesystem::path& labels_path) {
  auto is = io::open_in(images_path);
  const std::uint32_t magic = detail::get_be_u32(is);
  require(bool(is), "truncated IDX header: ", images_path.string());
  require(magic == 0x00000803u, "bad IDX image magic ", hex64(magic), " in ",
          images_path.string());
  const std::uint32_t n = detail::get_be_u32(is);
  const std::uint32_t rows = detail::get_be_u32(is);
  const std::uint32_t cols = detail::get_be_u32(is);
  require(bool(is), "truncated IDX header: ", images_path.string());

  ImageSet out;
  out.n = static_cast<int>(n);
  out.height = static_cast<int>(rows);
  out.width = static_cast<int>(cols);
  out.channels = 1;
  std::vector<unsigned char> bytes(static_cast<std::size_t>(n) * rows * cols);
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(bool(is), "truncated IDX image data: ", images_path.string());
  out.data.resize(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) out.data[i] = static_cast<float>(bytes[i]) / 255.0f;

  auto ls = io::open_in(labels_path);
  const std::uint32_t lmagic = detail::get_be_u32(ls);
  require(bool(ls), "truncated IDX header: ", labels_path.string());
  require(lmagic == 0x00000801u, "bad IDX label magic ", hex64(lmagic), " in ",
          labels_path.string());
  const std::uint32_t ln = detail::get_be_u32(ls);
  require(ln == n, "IDX count mismatch: ", n, " images vs ", ln, " labels");
  std::vector<unsigned char> lbytes(ln);
  ls.read(reinterpret_cast<char*>(lbytes.data()), static_cast<std::streamsize>(lbytes.size()));
  require(bool(ls), "truncated IDX label data: ", labels_path.string());
  out.labels.assign(lbytes.begin(), lbytes.end());
  return out;
}

// ---------------------------------------------------------------------------
// CIFAR-10 binary: 3073-byte records, 1 label byte then three 1024-byte
// row-major channel planes (R, G, B). Output is channel-last.
// ---------------------------------------------------------------------------

inline ImageSet load_cifar10(const std::vector<std::filesystem::path>& batch_paths) {
  constexpr std::size_t record = 3073, plane = 1024;
  ImageSet out;
  out.height = 32;
  out.width = 32;
  out.channels = 3;
  for (const auto& path : batch_paths) {
    std::string bytes = io::slurp(path);
    require(bytes.size() % record == 0, "CIFAR-10 file length ", bytes.size(),
            " is not a multiple of ", record, ": ", path.string());
    const std::size_t n_rec = bytes.size() / record;
    for (std::size_t r = 0; r < n_rec; ++r) {
      const unsigned char* rec = reinterpret_cast<const unsigned char*>(bytes.data()) + r * record;
      out.labels.push_back(rec[0]);
      const std::size_t base = out.data.size();
      out.data.resize(base + plane * 3);
      for (std::size_t p = 0; p < plane; ++p)
        for (int c = 0; c < 3; ++c)
          out.data[base + p * 3 + c] = static_cast<float>(rec[1 + c * plane + p]) / 255.0f;
      ++out.n;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// PU split construction.
// ---------------------------------------------------------------------------

/// P_L is n_labeled positives drawn uniformly without replacement from the
/// merged positive class (selected completely at random). Everything else
/// becomes the unlabeled pool, in original order, with its binary truth
/// hidden. Test labels are binarized in place.
inline PUSplit make_pu_split(const ImageSet& images, const std::set<int>& positive_class_ids,
                             int n_labeled, const ImageSet& test, std::uint64_t seed) {
  require(images.has_labels(), "make_pu_split: training images carry no labels");
  require(n_labeled >= 0, "make_pu_split: negative n_labeled");

  std::vector<int> positives;
  for (int i = 0; i < images.n; ++i)
    if (positive_class_ids.count(images.labels[i])) positives.push_back(i);
  require(!positives.empty(), "make_pu_split: no sample has a positive class id");
  require(static_cast<std::size_t>(n_labeled) <= positives.size(), "make_pu_split: n_labeled ",
          n_labeled, " exceeds ", positives.size(), " positive samples");

  Rng rng(mix_seed(seed, fnv1a("pu_split")));
  std::shuffle(positives.begin(), positives.end(), rng);
  std::vector<int> chosen(positives.begin(), positives.begin() + n_labeled);
  std::sort(chosen.begin(), chosen.end());

  std::vector<char> is_labeled(images.n, 0);
  for (int i : chosen) is_labeled[i] = 1;

  PUSplit split;
  split.positive_class_ids.assign(positive_class_ids.begin(), positive_class_ids.end());
  split.positive_labeled = images.select(chosen);
  split.positive_labeled.labels.assign(chosen.size(), 1);

  std::vector<int> rest;
  rest.reserve(images.n - n_labeled);
  for (int i = 0; i < images.n; ++i)
    if (!is_labeled[i]) rest.push_back(i);
  split.unlabeled = images.select(rest);
  split.unlabeled.labels.clear();
  split.hidden_truth_.reserve(rest.size());
  for (int i : rest)
    split.hidden_truth_.push_back(positive_class_ids.count(images.labels[i]) ? 1 : 0);

  split.test = test;
  if (test.has_labels())
    for (int& l : split.test.labels) l = positive_class_ids.count(l) ? 1 : 0;
  return split;
}

/// Caps the unlabeled pool at max_u samples, drawn uniformly, keeping the
/// hidden truth aligned. Original relative order is preserved.
inline void subsample_unlabeled(PUSplit& split, int max_u, std::uint64_t seed) {
  require(max_u > 0, "subsample_unlabeled: non-positive cap");
  if (split.unlabeled.n <= max_u) return;
  std::vector<int> ids(split.unlabeled.n);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(mix_seed(seed, fnv1a("subsample_u")));
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(max_u);
  std::sort(ids.begin(), ids.end());
  split.unlabeled = split.unlabeled.select(ids);
  std::vector<int> truth;
  truth.reserve(ids.size());
  for (int i : ids) truth.push_back(split.hidden_truth_[i]);
  split.hidden_truth_ = std::move(truth);
}

// ---------------------------------------------------------------------------
// Preprocessing: nearest-neighbor upscale plus grayscale channel replication.
// ---------------------------------------------------------------------------

inline ImageSet preprocess(const ImageSet& images, int target_h, int target_w, int target_c) {
  require(target_h >= images.height && target_w >= images.width,
          "preprocess: downscale from ", images.height, "x", images.width, " to ", target_h, "x",
          target_w, " not supported");
  require(target_c == images.channels || (images.channels == 1 && target_c == 3),
          "preprocess: cannot map ", images.channels, " channels to ", target_c);
  ImageSet out;
  out.n = images.n;
  out.height = target_h;
  out.width = target_w;
  out.channels = target_c;
  out.labels = images.labels;
  out.data.resize(static_cast<std::size_t>(out.n) * out.pixels_per_image());
  const int replicate = target_c / images.channels;
  for (int i = 0; i < images.n; ++i) {
    auto src = images.image(i);
    auto dst = out.image(i);
    for (int y = 0; y < target_h; ++y) {
      const int sy = y * images.height / target_h;
      for (int x = 0; x < target_w; ++x) {
        const int sx = x * images.width / target_w;
        const float* sp = src.data() + (static_cast<std::size_t>(sy) * images.width + sx) *
                                           images.channels;
        float* dp = dst.data() + (static_cast<std::size_t>(y) * target_w + x) * target_c;
        for (int c = 0; c < images.channels; ++c)
          for (int r = 0; r < replicate; ++r) dp[c * replicate + r] = sp[c];
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generators. 2-D toys are wrapped as 1x1x2 images; "shapes" is a
// 10-class 28x28 glyph benchmark standing in for image data when the real
// files are not on disk.
// ---------------------------------------------------------------------------

struct SyntheticSpec {
  std::string generator = "blobs";  // blobs | rings | shapes
  int n_labeled = 100;
  int n_unlabeled = 1000;
  int n_test = 400;
  double positive_fraction = 0.5;   // hidden positive share of U and test
  double noise = 0.5;
};

namespace detail {

// Raw 2-D toy coordinates live in roughly [-6, 6]; this affine map puts
// them in the unit interval required of ImageSet pixels.
inline float normalize_coord(double v) {
  return std::clamp(static_cast<float>((v + 6.0) / 12.0), 0.0f, 1.0f);
}

inline double denormalize_coord(float v) { return static_cast<double>(v) * 12.0 - 6.0; }

inline void push_point(ImageSet& s, double x, double y, int label) {
  s.data.push_back(normalize_coord(x));
  s.data.push_back(normalize_coord(y));
  s.labels.push_back(label);
  ++s.n;
}

// label 1: Gaussian cluster at (4,4); label 0: cluster at (0,0)
inline void gen_blob_point(ImageSet& s, int label, double noise, Rng& rng) {
  std::normal_distribution<double> g(0.0, noise);
  const double c = label == 1 ? 4.0 : 0.0;
  push_point(s, c + g(rng), c + g(rng), label);
}

// label 1: annulus of radius 1; label 0: radius 3
inline void gen_ring_point(ImageSet& s, int label, double noise, Rng& rng) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * 3.14159265358979323846);
  std::normal_distribution<double> g(0.0, noise);
  const double r = (label == 1 ? 1.0 : 3.0) + g(rng);
  const double a = angle(rng);
  push_point(s, r * std::cos(a), r * std::sin(a), label);
}

inline ImageSet gen_toy(const std::string& generator, int n_pos, int n_neg, double noise,
                        Rng& rng) {
  ImageSet s;
  s.height = 1;
  s.width = 1;
  s.channels = 2;
  std::vector<int> order(n_pos + n_neg);
  for (int i = 0; i < n_pos + n_neg; ++i) order[i] = i < n_pos ? 1 : 0;
  std::shuffle(order.begin(), order.end(), rng);
  for (int label : order) {
    if (generator == "blobs")
      gen_blob_point(s, label, noise, rng);
    else
      gen_ring_point(s, label, noise, rng);
  }
  return s;
}

// Four base stroke styles shared by every class, evaluated on glyph
// coordinates that the caller may scale anisotropically. The +600 offset
// keeps the stripe arithmetic positive without moving the phase, which
// anchors at the glyph centre (600 % 12 == 0).
inline bool glyph_pattern(int style, int dx, int dy, int sz) {
  const int ax = std::abs(dx), ay = std::abs(dy);
  if (std::max(ax, ay) > sz) return false;
  switch (style) {
    case 0: return dx * dx + dy * dy <= sz * sz;       // solid disc
    case 2: return std::max(ax, ay) >= sz - 2;         // square outline
    case 4: return ax <= 2 || ay <= 2;                 // plus cross
    default: return ((dy + 600) / 3) % 2 == 0;         // horizontal stripes
  }
}

// Anisotropic wrapper. Stretch factors kx and ky turn discs into ellipses,
// squares into rectangles and vary the stripe period, which gives every
// class enough shape variety that an autoencoder cannot simply memorise a
// handful of templates.
inline bool glyph_at(int style, double kx, double ky, int px, int py, int gx, int gy, int sz) {
  const int dx = static_cast<int>(std::lround((px - gx) * kx));
  const int dy = static_cast<int>(std::lround((py - gy) * ky));
  return glyph_pattern(style, dx, dy, sz);
}

// One 28x28 image, jittered in position, size and intensity, plus pixel
// noise. All ten classes share the same four stroke styles, so local
// texture statistics do not give a class away. Classes 0, 2, 4 and 6 draw
// one centred glyph; the rest draw two-object scenes, a pair of smaller
// glyphs placed at opposite offsets along a class-specific axis. The
// split mirrors how natural-image benchmarks group visually coherent
// classes: what changes between the groups is composition, not texture.
inline void draw_shape(ImageSet& s, int cls, double noise, Rng& rng) {
  constexpr int side = 28;
  // single-glyph classes use their own style; scene classes pair two
  static constexpr int style_a[10] = {0, 0, 2, 2, 4, 4, 6, 6, 0, 2};
  static constexpr int style_b[10] = {0, 2, 2, 0, 4, 6, 6, 4, 6, 4};
  // pair axes, one direction of the compass rose per scene class; unit
  // length keeps every class the same distance from the image centre
  static constexpr double axis_x[10] = {0, 0, 0, 1, 0, 0, 0, 1, 0.707, -0.707};
  static constexpr double axis_y[10] = {0, 1, 0, 0, 0, 1, 0, 0, 0.707, 0.707};
  const bool single = cls == 0 || cls == 2 || cls == 4 || cls == 6;

  // single glyphs wander a little further than scene centres do, so the
  // decoder sees strokes beyond the exact image centre during training
  std::uniform_int_distribution<int> jitter(single ? -3 : -2, single ? 3 : 2);
  std::uniform_int_distribution<int> size_d(single ? 4 : 6, single ? 7 : 6);
  std::uniform_int_distribution<int> off_d(7, 7);
  std::uniform_real_distribution<double> stretch_d(0.85, 1.2);
  std::uniform_real_distribution<double> val_d(0.35, 0.95);
  // the noise floor varies per image the way sensor noise varies with
  // exposure, so reconstruction quality spreads within every class
  std::uniform_real_distribution<double> noise_mul_d(0.5, 3.0);
  std::normal_distribution<double> pix(0.0, 0.1 * noise * noise_mul_d(rng));
  const int cx = side / 2 + jitter(rng), cy = side / 2 + jitter(rng);
  const int sz_a = size_d(rng);
  const double kxa = single ? stretch_d(rng) : 1.0;
  const double kya = single ? stretch_d(rng) : 1.0;
  int ax = cx, ay = cy, bx = 0, by = 0, sz_b = 0;
  double kxb = 1.0, kyb = 1.0;
  if (!single) {
    sz_b = size_d(rng);
    const int off = off_d(rng);
    const int ox = static_cast<int>(std::lround(axis_x[cls] * off));
    const int oy = static_cast<int>(std::lround(axis_y[cls] * off));
    ax = std::clamp(cx + ox, 6, side - 7);
    ay = std::clamp(cy + oy, 6, side - 7);
    bx = std::clamp(cx - ox, 6, side - 7);
    by = std::clamp(cy - oy, 6, side - 7);
  }
  const float fg = static_cast<float>(val_d(rng));
  // per-image focus varies like camera focus does; blur moves an image
  // towards the low frequencies an autoencoder reproduces most easily, so
  // reconstruction quality spreads widely within every class
  std::uniform_real_distribution<double> blur_d(0.0, 1.2);
  const double blur = blur_d(rng);

  std::array<float, side * side> tile;
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      bool on = glyph_at(style_a[cls], kxa, kya, x, y, ax, ay, sz_a);
      if (!single && !on) on = glyph_at(style_b[cls], kxb, kyb, x, y, bx, by, sz_b);
      tile[static_cast<std::size_t>(y) * side + x] = on ? fg : 0.05f;
    }
  if (blur > 0.15) {
    double w[5];
    double norm = 0.0;
    for (int i = -2; i <= 2; ++i) norm += w[i + 2] = std::exp(-i * i / (2.0 * blur * blur));
    for (double& x : w) x /= norm;
    std::array<float, side * side> pass;
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        double acc = 0.0;
        for (int i = -2; i <= 2; ++i)
          acc += w[i + 2] * tile[static_cast<std::size_t>(y) * side + std::clamp(x + i, 0, side - 1)];
        pass[static_cast<std::size_t>(y) * side + x] = static_cast<float>(acc);
      }
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        double acc = 0.0;
        for (int i = -2; i <= 2; ++i)
          acc += w[i + 2] * pass[static_cast<std::size_t>(std::clamp(y + i, 0, side - 1)) * side + x];
        tile[static_cast<std::size_t>(y) * side + x] = static_cast<float>(acc);
      }
  }

  const std::size_t base = s.data.size();
  s.data.resize(base + side * side, 0.0f);
  for (int i = 0; i < side * side; ++i) {
    const float v = tile[i] + static_cast<float>(pix(rng));
    s.data[base + i] = std::clamp(v, 0.0f, 1.0f);
  }
  s.labels.push_back(cls);
  ++s.n;
}

// Round-robin class assignment keeps per-class counts deterministic; the
// shuffle only reorders samples.
inline ImageSet gen_shapes(int n, double noise, Rng& rng) {
  ImageSet s;
  s.height = 28;
  s.width = 28;
  s.channels = 1;
  std::vector<int> classes(n);
  for (int i = 0; i < n; ++i) classes[i] = i % 10;
  std::shuffle(classes.begin(), classes.end(), rng);
  for (int cls : classes) draw_shape(s, cls, noise, rng);
  return s;
}

} // namespace detail

inline PUSplit gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  require(spec.n_labeled > 0 && spec.n_unlabeled > 0 && spec.n_test > 0,
          "gen_synthetic: non-positive sizes");
  require(spec.positive_fraction >= 0.0 && spec.positive_fraction <= 1.0,
          "gen_synthetic: positive_fraction outside [0,1]");
  Rng rng(mix_seed(seed, fnv1a("synthetic")));

  if (spec.generator == "blobs" || spec.generator == "rings") {
    const int hidden_pos = static_cast<int>(std::lround(spec.n_unlabeled * spec.positive_fraction));
    const int train_pos = spec.n_labeled + hidden_pos;
    const int train_neg = spec.n_unlabeled - hidden_pos;
    const int test_pos = static_cast<int>(std::lround(spec.n_test * spec.positive_fraction));
    ImageSet train = detail::gen_toy(spec.generator, train_pos, train_neg, spec.noise, rng);
    ImageSet test = detail::gen_toy(spec.generator, test_pos, spec.n_test - test_pos, spec.noise,
                                    rng);
    return make_pu_split(train, {1}, spec.n_labeled, test, seed);
  }
  if (spec.generator == "shapes") {
    // even class ids 0/2/4/6 are the merged positive class, giving the
    // usual 4-in-10 positive prior; round-robin guarantees enough positives
    const std::set<int> pos_ids = {0, 2, 4, 6};
    const int n_train = spec.n_labeled + spec.n_unlabeled;
    require(n_train / 10 * 4 >= spec.n_labeled, "gen_synthetic: shapes pool of ", n_train,
            " cannot supply ", spec.n_labeled, " labeled positives");
    ImageSet train = detail::gen_shapes(n_train, spec.noise, rng);
    ImageSet test = detail::gen_shapes(spec.n_test, spec.noise, rng);
    return make_pu_split(train, pos_ids, spec.n_labeled, test, seed);
  }
  fail("gen_synthetic: unknown generator \"", spec.generator, "\"");
}

} // namespace denspu::dataset
