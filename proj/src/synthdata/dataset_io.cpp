// Copyright 2026 The synctrack Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "synctrack/errors.hpp"
#include "synctrack/synthdata.hpp"

namespace synctrack::synth {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw DataError(path.string() + ": write failed");
}

void append_reals(std::string& out, std::initializer_list<double> values) {
  char buf[40];
  bool first = true;
  for (double v : values) {
    if (!first) out.push_back(' ');
    first = false;
    const int n = std::snprintf(buf, sizeof(buf), "%.17g", v);
    out.append(buf, static_cast<std::size_t>(n));
  }
  out.push_back('\n');
}

// Rows of exactly `width` space-separated reals, each line newline-terminated.
std::vector<std::vector<double>> parse_rows(const fs::path& path, std::size_t width) {
  const std::string text = read_file(path);
  std::vector<std::vector<double>> rows;
  std::size_t pos = 0, line = 0;
  while (pos < text.size()) {
    ++line;
    const std::size_t nl = text.find('\n', pos);
    auto fail = [&](const std::string& why) -> void {
      throw DataError(path.string() + ":" + std::to_string(line) + ": " + why);
    };
    if (nl == std::string::npos) fail("truncated line (no terminating newline)");
    std::vector<double> row;
    const char* p = text.data() + pos;
    const char* end = text.data() + nl;
    while (p < end) {
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc() || !std::isfinite(v)) fail("expected a real number");
      row.push_back(v);
      p = next;
      if (p < end) {
        if (*p != ' ') fail("expected a single space between numbers");
        ++p;
        if (p == end) fail("trailing space");
      }
    }
    if (row.size() != width) {
      fail("expected " + std::to_string(width) + " numbers, found " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
    pos = nl + 1;
  }
  return rows;
}

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

}  // namespace

void write_boxes(const fs::path& path, const std::vector<Box3D>& boxes) {
  std::string text;
  for (const Box3D& b : boxes) {
    append_reals(text, {b.center.x, b.center.y, b.center.z, b.size.x, b.size.y, b.size.z, b.yaw});
  }
  write_file(path, text);
}

std::vector<Box3D> read_boxes(const fs::path& path) {
  std::vector<Box3D> out;
  std::size_t line = 0;
  for (const auto& r : parse_rows(path, 7)) {
    ++line;
    try {
      out.push_back(Box3D::make({r[0], r[1], r[2]}, {r[3], r[4], r[5]}, r[6]));
    } catch (const std::invalid_argument& e) {
      throw DataError(path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

void write_dataset(const fs::path& root, const std::vector<Sequence>& sequences) {
  for (const Sequence& seq : sequences) {
    if (seq.frames.size() != seq.gt.size()) {
      throw std::invalid_argument("write_dataset: " + seq.name + " has " +
                                  std::to_string(seq.frames.size()) + " frames but " +
                                  std::to_string(seq.gt.size()) + " boxes");
    }
    const fs::path dir = root / seq.name;
    fs::create_directories(dir);
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
      std::string text;
      text.reserve(seq.frames[i].size() * 60);
      for (const Vec3& p : seq.frames[i].points) append_reals(text, {p.x, p.y, p.z});
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%06zu.xyz", i);
      write_file(dir / name, text);
    }
    write_boxes(dir / "gt.boxes", seq.gt);
  }
}

std::vector<Sequence> read_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError(root.string() + ": not a directory");
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && starts_with(e.path().filename().string(), "seq_")) {
      dirs.push_back(e.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());

  std::vector<Sequence> out;
  for (const fs::path& dir : dirs) {
    Sequence seq;
    seq.name = dir.filename().string();
    std::vector<fs::path> frames;
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string f = e.path().filename().string();
      if (e.is_regular_file() && starts_with(f, "frame_") && e.path().extension() == ".xyz") {
        frames.push_back(e.path());
      }
    }
    std::sort(frames.begin(), frames.end());
    for (std::size_t i = 0; i < frames.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%06zu.xyz", i);
      if (frames[i].filename() != name) {
        throw DataError(frames[i].string() + ": expected " + name + " (frames must be numbered "
                        "from 0 without gaps)");
      }
      PointCloud cloud;
      for (const auto& r : parse_rows(frames[i], 3)) cloud.points.push_back({r[0], r[1], r[2]});
      seq.frames.push_back(std::move(cloud));
    }
    const fs::path gt = dir / "gt.boxes";
    if (!fs::exists(gt)) throw DataError(gt.string() + ": missing");
    seq.gt = read_boxes(gt);
    if (seq.gt.size() != seq.frames.size()) {
      throw DataError(gt.string() + ": " + std::to_string(seq.gt.size()) + " boxes for " +
                      std::to_string(seq.frames.size()) + " frames");
    }
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace synctrack::synth
