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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "denspu/core.hpp"
#include "denspu/io.hpp"

using namespace denspu;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir() {
  static fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "denspu_io_tests";
    fs::create_directories(p);
    return p;
  }();
  return dir;
}
} // namespace

TEST_CASE("integer primitives are little-endian on disk", "[io]") {
  std::ostringstream os(std::ios::binary);
  io::put_u32(os, 0x01020304u);
  io::put_u64(os, 0x0b0a090807060504ULL);
  std::string bytes = os.str();
  REQUIRE(bytes.size() == 12);
  const unsigned char expect[12] = {0x04, 0x03, 0x02, 0x01, 0x04, 0x05,
                                    0x06, 0x07, 0x08, 0x09, 0x0a, 0x0b};
  for (int i = 0; i < 12; ++i) CHECK(static_cast<unsigned char>(bytes[i]) == expect[i]);

  std::istringstream is(bytes, std::ios::binary);
  CHECK(io::get_u32(is) == 0x01020304u);
  CHECK(io::get_u64(is) == 0x0b0a090807060504ULL);
}

TEST_CASE("float primitives round-trip bit-exactly", "[io]") {
  std::ostringstream os(std::ios::binary);
  io::put_f32(os, 1.0f);
  io::put_f32(os, -0.0f);
  io::put_f64(os, 0.1);
  std::string bytes = os.str();
  // IEEE-754 1.0f = 0x3f800000 little-endian
  CHECK(static_cast<unsigned char>(bytes[0]) == 0x00);
  CHECK(static_cast<unsigned char>(bytes[3]) == 0x3f);

  std::istringstream is(bytes, std::ios::binary);
  CHECK(io::get_f32(is) == 1.0f);
  float neg_zero = io::get_f32(is);
  CHECK(std::signbit(neg_zero));
  CHECK(io::get_f64(is) == 0.1);
}

TEST_CASE("encoding matrix file format round-trips with the documented header", "[io]") {
  EncodingMatrix m(2, 3);
  float v = 0.5f;
  for (auto& x : m.values) x = (v *= 1.25f);

  fs::path path = temp_dir() / "matrix.dpu";
  io::write_matrix(path, m);

  // header: magic "DPU1", u32 rows, u32 cols, then row-major f32
  std::ifstream raw(path, std::ios::binary);
  char magic[4];
  raw.read(magic, 4);
  CHECK(std::string(magic, 4) == "DPU1");
  CHECK(io::get_u32(raw) == 2);
  CHECK(io::get_u32(raw) == 3);
  CHECK(io::get_f32(raw) == m.values[0]);

  EncodingMatrix back = io::read_matrix(path);
  REQUIRE(back.rows == m.rows);
  REQUIRE(back.cols == m.cols);
  CHECK(back.values == m.values);
}

TEST_CASE("truncated matrix file is rejected", "[io]") {
  fs::path path = temp_dir() / "short.dpu";
  {
    std::ofstream os(path, std::ios::binary);
    os.write("DPU1", 4);
    io::put_u32(os, 10);
    io::put_u32(os, 10);
    io::put_f32(os, 1.0f); // 99 values missing
  }
  REQUIRE_THROWS_AS(io::read_matrix(path), Error);
}

TEST_CASE("image set file format round-trips including labels", "[io]") {
  ImageSet im;
  im.n = 2;
  im.height = 2;
  im.width = 2;
  im.channels = 1;
  im.data = {0.0f, 0.25f, 0.5f, 1.0f, 0.1f, 0.2f, 0.3f, 0.4f};
  im.labels = {4, 9};

  fs::path path = temp_dir() / "images.dpui";
  io::write_images(path, im);
  ImageSet back = io::read_images(path);
  CHECK(back.n == im.n);
  CHECK(back.height == im.height);
  CHECK(back.width == im.width);
  CHECK(back.channels == im.channels);
  CHECK(back.data == im.data);
  CHECK(back.labels == im.labels);

  SECTION("unlabeled variant") {
    im.labels.clear();
    io::write_images(path, im);
    ImageSet unlabeled = io::read_images(path);
    CHECK_FALSE(unlabeled.has_labels());
    CHECK(unlabeled.data == im.data);
  }
}

TEST_CASE("csv_double formatting is stable", "[io]") {
  CHECK(io::csv_double(0.5) == "0.5");
  CHECK(io::csv_double(1.0) == "1");
  CHECK(io::csv_double(0.0056818181818181) == "0.00568181818");
  CHECK(io::csv_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(io::csv_double(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(io::csv_double(std::nan("")) == "nan");
}

TEST_CASE("CsvWriter and read_csv round-trip rows", "[io]") {
  fs::path path = temp_dir() / "table.csv";
  {
    io::CsvWriter csv(path);
    csv.row({"sample_id", "score", "flagged"});
    csv.row({"0", "0.25", "1"});
    csv.row({"1", "0.75", "0"});
  }
  auto rows = io::read_csv(path);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"sample_id", "score", "flagged"});
  CHECK(rows[2] == std::vector<std::string>{"1", "0.75", "0"});
}

TEST_CASE("open_in reports missing files", "[io]") {
  REQUIRE_THROWS_AS(io::open_in(temp_dir() / "does_not_exist.bin"), Error);
}

TEST_CASE("open_out creates parent directories", "[io]") {
  fs::path nested = temp_dir() / "a" / "b" / "c.bin";
  fs::remove_all(temp_dir() / "a");
  {
    auto os = io::open_out(nested);
    io::put_u32(os, 7);
  }
  REQUIRE(fs::exists(nested));
}
