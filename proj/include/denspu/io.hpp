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

#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "denspu/core.hpp"

namespace denspu::io {

// ---------------------------------------------------------------------------
// Little-endian primitives. Encoded byte-by-byte so files are identical on
// any host byte order.
// ---------------------------------------------------------------------------

inline void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  put_u32(os, static_cast<std::uint32_t>(v & 0xffffffffULL));
  put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  require(bool(is), "unexpected end of file while reading u32");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t get_u64(std::istream& is) {
  std::uint64_t lo = get_u32(is);
  std::uint64_t hi = get_u32(is);
  return lo | (hi << 32);
}

inline float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  require(os.is_open(), "cannot open for writing: ", path.string());
  return os;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.is_open(), "cannot open for reading: ", path.string());
  return is;
}

// ---------------------------------------------------------------------------
// EncodingMatrix file: magic "DPU1", u32 rows, u32 cols (little-endian),
// then row-major IEEE-754 binary32 values.
// ---------------------------------------------------------------------------

inline void write_matrix(const std::filesystem::path& path, const EncodingMatrix& m) {
  auto os = open_out(path);
  os.write("DPU1", 4);
  put_u32(os, static_cast<std::uint32_t>(m.rows));
  put_u32(os, static_cast<std::uint32_t>(m.cols));
  for (float v : m.values) put_f32(os, v);
  require(bool(os), "write failed: ", path.string());
}

inline EncodingMatrix read_matrix(const std::filesystem::path& path) {
  auto is = open_in(path);
  char magic[4];
  is.read(magic, 4);
  require(bool(is) && std::string(magic, 4) == "DPU1", "bad matrix magic in ", path.string());
  EncodingMatrix m;
  m.rows = get_u32(is);
  m.cols = get_u32(is);
  m.values.resize(m.rows * m.cols);
  for (auto& v : m.values) v = get_f32(is);
  return m;
}

// ImageSet rides on the matrix format (one image per row) plus explicit
// shape and an optional label vector; lossless because pixels are binary32.
inline void write_images(const std::filesystem::path& path, const ImageSet& im) {
  auto os = open_out(path);
  os.write("DPUI", 4);
  put_u32(os, 1); // version
  put_u32(os, static_cast<std::uint32_t>(im.n));
  put_u32(os, static_cast<std::uint32_t>(im.height));
  put_u32(os, static_cast<std::uint32_t>(im.width));
  put_u32(os, static_cast<std::uint32_t>(im.channels));
  put_u32(os, im.has_labels() ? 1 : 0);
  for (float v : im.data) put_f32(os, v);
  for (int l : im.labels) put_u32(os, static_cast<std::uint32_t>(l));
  require(bool(os), "write failed: ", path.string());
}

inline ImageSet read_images(const std::filesystem::path& path) {
  auto is = open_in(path);
  char magic[4];
  is.read(magic, 4);
  require(bool(is) && std::string(magic, 4) == "DPUI", "bad image-set magic in ", path.string());
  std::uint32_t version = get_u32(is);
  require(version == 1, "unsupported image-set version ", version);
  ImageSet im;
  im.n = static_cast<int>(get_u32(is));
  im.height = static_cast<int>(get_u32(is));
  im.width = static_cast<int>(get_u32(is));
  im.channels = static_cast<int>(get_u32(is));
  bool labeled = get_u32(is) != 0;
  im.data.resize(static_cast<std::size_t>(im.n) * im.pixels_per_image());
  for (auto& v : im.data) v = get_f32(is);
  if (labeled) {
    im.labels.resize(im.n);
    for (auto& l : im.labels) l = static_cast<int>(get_u32(is));
  }
  return im;
}

// ---------------------------------------------------------------------------
// CSV. Numbers are printed with fixed formats so identical runs produce
// byte-identical files.
// ---------------------------------------------------------------------------

inline std::string csv_double(double v, int precision = 9) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
  return buf;
}

class CsvWriter {
public:
  explicit CsvWriter(const std::filesystem::path& path) : os_(open_out(path)) {}

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os_ << ',';
      os_ << cells[i];
    }
    os_ << '\n';
  }

private:
  std::ofstream os_;
};

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  auto is = open_in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline std::string slurp(const std::filesystem::path& path) {
  auto is = open_in(path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

} // namespace denspu::io
