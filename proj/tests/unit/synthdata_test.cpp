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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "synctrack/errors.hpp"
#include "synctrack/geometry.hpp"
#include "synctrack/synthdata.hpp"

namespace synctrack::synth {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            ("synctrack_" + std::string(info->test_suite_name()) + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

double surface_area(const Vec3& e) { return 2.0 * (e.x * e.y + e.x * e.z + e.y * e.z); }

// Distance from a box-frame point to the nearest face of the cuboid.
double distance_to_surface(const Vec3& p, const Vec3& e) {
  const double dx = std::abs(p.x) - 0.5 * e.x;
  const double dy = std::abs(p.y) - 0.5 * e.y;
  const double dz = std::abs(p.z) - 0.5 * e.z;
  if (dx <= 0 && dy <= 0 && dz <= 0) return -std::max({dx, dy, dz});
  return std::hypot(std::max(dx, 0.0), std::max(dy, 0.0), std::max(dz, 0.0));
}

SceneSpec clean_spec() {
  SceneSpec s;
  s.frames = 1;
  s.noise_sigma = 0.0;
  s.clutter_density = 0.0;
  s.initial_center = {3.0, -2.0, 0.75};
  s.initial_yaw = 0.7;
  s.seed = 5;
  return s;
}

TEST(GenerateSequence, NoiselessPointsLieOnTheSurface) {
  const Sequence seq = generate_sequence(clean_spec());
  ASSERT_EQ(seq.frames.size(), 1u);
  const Box3D& box = seq.gt[0];
  const PointCloud& frame = seq.frames[0];
  ASSERT_FALSE(frame.empty());
  EXPECT_EQ(geometry::crop_points_in_box(frame, box, 0.0).size(), frame.size());
  for (const Vec3& p : frame.points) {
    EXPECT_LT(distance_to_surface(geometry::to_box_frame(p, box), box.size), 1e-9);
  }
}

TEST(GenerateSequence, ConstantVelocityAdvancesOneMetrePerFrame) {
  SceneSpec s = clean_spec();
  s.frames = 6;
  s.velocity = {1.0, 0.0, 0.0};
  const Sequence seq = generate_sequence(s);
  ASSERT_EQ(seq.gt.size(), 6u);
  for (std::size_t k = 1; k < seq.gt.size(); ++k) {
    EXPECT_EQ(seq.gt[k].center.x - seq.gt[k - 1].center.x, 1.0);
    EXPECT_EQ(seq.gt[k].center.y, seq.gt[0].center.y);
    EXPECT_EQ(seq.gt[k].center.z, seq.gt[0].center.z);
  }
}

TEST(GenerateSequence, SameSeedIsBitIdentical) {
  SceneSpec s;
  s.seed = 99;
  EXPECT_EQ(generate_sequence(s).frames, generate_sequence(s).frames);
  SceneSpec t = s;
  t.seed = 100;
  EXPECT_NE(generate_sequence(s).frames, generate_sequence(t).frames);
}

TEST(GenerateSequence, RejectsZeroObjectDensity) {
  SceneSpec s;
  s.surface_density = 0.0;
  EXPECT_THROW(generate_sequence(s), std::invalid_argument);
  s = SceneSpec{};
  s.frames = 0;
  EXPECT_THROW(generate_sequence(s), std::invalid_argument);
}

TEST(GenerateSequence, ClutterStaysInTheGrownHull) {
  SceneSpec s;
  s.frames = 3;
  s.clutter_density = 2.0;
  const Sequence seq = generate_sequence(s);
  const std::size_t surface = seq.frames[0].size();
  SceneSpec bare = s;
  bare.clutter_density = 0.0;
  EXPECT_GT(surface, generate_sequence(bare).frames[0].size());
  const double reach = s.extents.norm() + s.clutter_margin + 3.0 * s.velocity.norm();
  for (const Vec3& p : seq.frames[0].points) {
    EXPECT_LT((p - s.initial_center).norm(), reach);
  }
}

// Each box holds at least 0.9 density * area of its own samples (before
// clutter), counted with a 4 sigma margin for the sensor noise.
TEST(GenerateSequence, BoxesHoldTheirSurfaceSamplesAcrossSeeds) {
  DatasetSpec spec;
  spec.sequences = 10;
  spec.frames = 5;
  spec.clutter_density = {0.0, 0.0};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (const Sequence& seq : generate_dataset(spec, seed)) {
      for (std::size_t k = 0; k < seq.frames.size(); ++k) {
        const Box3D& box = seq.gt[k];
        const double need = 0.9 * spec.surface_density.lo * surface_area(box.size);
        const double margin = 4.0 * spec.noise_sigma.lo;
        const auto kept = geometry::crop_points_in_box(seq.frames[k], box, margin).size();
        EXPECT_GE(static_cast<double>(kept), need) << seq.name << " frame " << k;
      }
    }
  }
}

TEST(GenerateDataset, DrawsWithinRangesAndNamesSequences) {
  DatasetSpec spec;
  spec.sequences = 12;
  spec.frames = 4;
  const auto data = generate_dataset(spec, 3);
  ASSERT_EQ(data.size(), 12u);
  EXPECT_EQ(data[0].name, "seq_0000");
  EXPECT_EQ(data[11].name, "seq_0011");
  for (const Sequence& seq : data) {
    ASSERT_EQ(seq.frames.size(), 4u);
    ASSERT_EQ(seq.gt.size(), 4u);
    const Box3D& b = seq.gt[0];
    EXPECT_GE(b.size.x, spec.width.lo);
    EXPECT_LE(b.size.x, spec.width.hi);
    EXPECT_GE(b.size.y, spec.length.lo);
    EXPECT_LE(b.size.y, spec.length.hi);
    EXPECT_DOUBLE_EQ(b.center.z, 0.5 * b.size.z);
    const double step = (seq.gt[1].center - seq.gt[0].center).norm();
    EXPECT_GE(step, spec.speed.lo - 1e-12);
    EXPECT_LE(step, spec.speed.hi + 1e-12);
    // Motion follows the initial heading (local +y).
    const Vec3 local = geometry::to_box_frame(seq.gt[1].center, b);
    EXPECT_NEAR(local.x, 0.0, 1e-9);
    EXPECT_GT(local.y, 0.0);
  }
  EXPECT_EQ(generate_dataset(spec, 3)[5].frames, data[5].frames);
}

TEST(DatasetSpec, ParsesSinglesAndRanges) {
  const DatasetSpec s = parse_dataset_spec(
      "# comment\nsequences = 7\nframes = 9\nwidth = 1.5\nspeed = 0.1:0.2\n"
      "position = -3:3\nclutter_margin = 1.5\n");
  EXPECT_EQ(s.sequences, 7u);
  EXPECT_EQ(s.frames, 9u);
  EXPECT_EQ(s.width, (Range{1.5, 1.5}));
  EXPECT_EQ(s.speed, (Range{0.1, 0.2}));
  EXPECT_EQ(s.position, (Range{-3.0, 3.0}));
  EXPECT_EQ(s.clutter_margin, 1.5);
  EXPECT_EQ(s.length, DatasetSpec{}.length);
  EXPECT_EQ(parse_dataset_spec(""), DatasetSpec{});
}

TEST(DatasetSpec, RejectsUnknownKeysAndBadValues) {
  try {
    parse_dataset_spec("frames = 3\nwidht = 2\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "unknown key 'widht' (line 2)");
  }
  EXPECT_THROW(parse_dataset_spec("frames = 0\n"), ConfigError);
  EXPECT_THROW(parse_dataset_spec("speed = fast\n"), ConfigError);
  EXPECT_THROW(load_dataset_spec("/nonexistent/spec.txt"), ConfigError);
}

TEST(DatasetIo, WriteThenReadIsExact) {
  TempDir dir;
  DatasetSpec spec;
  spec.sequences = 3;
  spec.frames = 4;
  const auto data = generate_dataset(spec, 17);
  write_dataset(dir.path(), data);
  const auto back = read_dataset(dir.path());
  ASSERT_EQ(back.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(back[i].name, data[i].name);
    EXPECT_EQ(back[i].frames, data[i].frames);
    EXPECT_EQ(back[i].gt, data[i].gt);
  }
}

TEST(DatasetIo, LayoutIsPlainText) {
  TempDir dir;
  Sequence seq;
  seq.name = "seq_0042";
  PointCloud cloud;
  cloud.points.push_back({0.5, -1.0, 2.0});
  seq.frames.push_back(cloud);
  seq.gt.push_back(Box3D::make({1, 2, 3}, {1.5, 4, 1.25}, 0.25));
  write_dataset(dir.path(), {seq});
  std::ifstream f(dir.path() / "seq_0042" / "frame_000000.xyz");
  std::string line;
  std::getline(f, line);
  EXPECT_EQ(line, "0.5 -1 2");
  std::ifstream g(dir.path() / "seq_0042" / "gt.boxes");
  std::getline(g, line);
  EXPECT_EQ(line, "1 2 3 1.5 4 1.25 0.25");
}

TEST(DatasetIo, TruncatedFrameNamesTheLine) {
  TempDir dir;
  const fs::path seq = dir.path() / "seq_0000";
  fs::create_directories(seq);
  std::ofstream(seq / "frame_000000.xyz") << "1 2 3\n4 5 6\n7 8";
  std::ofstream(seq / "gt.boxes") << "0 0 0 1 1 1 0\n";
  try {
    read_dataset(dir.path());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("frame_000000.xyz:3:"), std::string::npos) << msg;
  }
}

TEST(DatasetIo, MalformedInputsAreRejected) {
  TempDir dir;
  const fs::path seq = dir.path() / "seq_0000";
  fs::create_directories(seq);
  std::ofstream(seq / "frame_000000.xyz") << "1 2 3\n";
  std::ofstream(seq / "gt.boxes") << "0 0 0 1 1 1 0\n0 0 0 1 1 1 0\n";
  EXPECT_THROW(read_dataset(dir.path()), DataError);  // count mismatch
  std::ofstream(seq / "gt.boxes") << "0 0 0 1 -1 1 0\n";
  EXPECT_THROW(read_dataset(dir.path()), DataError);  // negative extent
  std::ofstream(seq / "gt.boxes") << "0 0 0 1 1 1 0\n";
  std::ofstream(seq / "frame_000000.xyz") << "1 2 x\n";
  EXPECT_THROW(read_dataset(dir.path()), DataError);
  std::ofstream(seq / "frame_000000.xyz") << "1 2 3\n";
  EXPECT_EQ(read_dataset(dir.path()).size(), 1u);
  std::ofstream(seq / "frame_000002.xyz") << "1 2 3\n";
  EXPECT_THROW(read_dataset(dir.path()), DataError);  // gap in numbering
  EXPECT_THROW(read_dataset(dir.path() / "missing"), DataError);
}

TEST(DatasetIo, EmptyDirectoryIsAnEmptyDataset) {
  TempDir dir;
  EXPECT_TRUE(read_dataset(dir.path()).empty());
}

}  // namespace
}  // namespace synctrack::synth
