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

#ifndef SYNCTRACK_SYNTHDATA_HPP_
#define SYNCTRACK_SYNTHDATA_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "synctrack/geometry.hpp"

namespace synctrack {

struct Sequence {
  std::string name;
  std::vector<PointCloud> frames;
  std::vector<Box3D> gt;
};

namespace synth {

// One moving cuboid seen as surface samples plus uniform clutter.
struct SceneSpec {
  Vec3 extents{1.6, 3.9, 1.5};
  Vec3 initial_center;
  double initial_yaw = 0.0;
  // World-frame displacement per frame; centre k is initial_center + k v.
  Vec3 velocity{0.5, 0.0, 0.0};
  double yaw_rate = 0.0;
  std::size_t frames = 10;
  // Points per square metre of box surface; each face gets round(density *
  // face area) points.
  double surface_density = 40.0;
  // Points per cubic metre, spread over the trajectory's bounding box grown
  // by clutter_margin on every side.
  double clutter_density = 0.5;
  double clutter_margin = 3.0;
  double noise_sigma = 0.02;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument.
  void validate() const;
};

// Surface points come first in each frame, then clutter.
Sequence generate_sequence(const SceneSpec& spec, const std::string& name = "seq_0000");

// Closed interval a parameter is drawn from; lo == hi pins it.
struct Range {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Range&, const Range&) = default;
};

// Distribution over scenes for whole datasets.
struct DatasetSpec {
  std::size_t sequences = 20;
  std::size_t frames = 20;
  Range width{1.4, 2.0};
  Range length{3.5, 4.5};
  Range height{1.3, 1.8};
  // Speed along the initial heading (local +y), metres per frame.
  Range speed{0.3, 0.8};
  Range yaw_rate{-0.04, 0.04};
  // Initial centre offset in x and y.
  Range position{-10.0, 10.0};
  Range surface_density{30.0, 30.0};
  Range clutter_density{0.3, 0.3};
  Range noise_sigma{0.02, 0.02};
  double clutter_margin = 3.0;

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

// `key = value` or `key = lo:hi` lines, '#' comments. Throws ConfigError
// naming the key and line.
DatasetSpec parse_dataset_spec(const std::string& text);
DatasetSpec load_dataset_spec(const std::filesystem::path& path);

// Sequence i is named seq_<i, 4 digits> and seeded from (seed, i).
std::vector<Sequence> generate_dataset(const DatasetSpec& spec, std::uint64_t seed);

// <root>/<name>/frame_<6 digits>.xyz and <root>/<name>/gt.boxes, numbers
// printed with 17 significant digits.
void write_dataset(const std::filesystem::path& root, const std::vector<Sequence>& sequences);

// Reads every seq_* directory in name order. A missing root or any malformed
// file throws DataError naming the file and line; no sequence directories
// gives an empty dataset.
std::vector<Sequence> read_dataset(const std::filesystem::path& root);

// One `x y z w l h theta` line per box.
void write_boxes(const std::filesystem::path& path, const std::vector<Box3D>& boxes);
std::vector<Box3D> read_boxes(const std::filesystem::path& path);

}  // namespace synth
}  // namespace synctrack

#endif  // SYNCTRACK_SYNTHDATA_HPP_
