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
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "synctrack/errors.hpp"
#include "synctrack/keyvalue.hpp"
#include "synctrack/synthdata.hpp"

namespace synctrack::synth {

void SceneSpec::validate() const {
  if (!(extents.x > 0 && extents.y > 0 && extents.z > 0)) {
    throw std::invalid_argument("scene: extents must be positive");
  }
  if (frames == 0) throw std::invalid_argument("scene: at least one frame");
  if (!(surface_density > 0)) {
    throw std::invalid_argument("scene: surface density must be positive (untrackable target)");
  }
  if (!(clutter_density >= 0) || !(clutter_margin >= 0) || !(noise_sigma >= 0)) {
    throw std::invalid_argument("scene: clutter density, margin and noise must be >= 0");
  }
}

Sequence generate_sequence(const SceneSpec& spec, const std::string& name) {
  spec.validate();
  Sequence seq;
  seq.name = name;
  for (std::size_t k = 0; k < spec.frames; ++k) {
    const double kk = static_cast<double>(k);
    seq.gt.push_back(Box3D::make(spec.initial_center + kk * spec.velocity, spec.extents,
                                 spec.initial_yaw + kk * spec.yaw_rate));
  }

  // Axis-aligned hull of every pose, grown by the clutter margin.
  Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  for (const Box3D& b : seq.gt) {
    for (const Vec3& c : geometry::bev_corners(b)) {
      lo = {std::min(lo.x, c.x), std::min(lo.y, c.y), lo.z};
      hi = {std::max(hi.x, c.x), std::max(hi.y, c.y), hi.z};
    }
    lo.z = std::min(lo.z, b.center.z - 0.5 * b.size.z);
    hi.z = std::max(hi.z, b.center.z + 0.5 * b.size.z);
  }
  const Vec3 margin{spec.clutter_margin, spec.clutter_margin, spec.clutter_margin};
  lo = lo - margin;
  hi = hi + margin;
  const double region_volume = (hi.x - lo.x) * (hi.y - lo.y) * (hi.z - lo.z);

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0 ? spec.noise_sigma : 1.0);
  const double w = spec.extents.x, l = spec.extents.y, h = spec.extents.z;
  // Faces as (fixed axis, area).
  const std::pair<int, double> faces[3] = {{0, l * h}, {1, w * h}, {2, w * l}};

  for (const Box3D& box : seq.gt) {
    PointCloud frame;
    for (const auto& [axis, area] : faces) {
      for (const double side : {-0.5, 0.5}) {
        const auto n = std::lround(spec.surface_density * area);
        for (long i = 0; i < n; ++i) {
          double local[3] = {unit(rng) * w, unit(rng) * l, unit(rng) * h};
          local[axis] = side * (axis == 0 ? w : axis == 1 ? l : h);
          Vec3 p{local[0], local[1], local[2]};
          if (spec.noise_sigma > 0) p = p + Vec3{noise(rng), noise(rng), noise(rng)};
          frame.points.push_back(geometry::from_box_frame(p, box));
        }
      }
    }
    if (spec.clutter_density > 0) {
      std::poisson_distribution<long> count(spec.clutter_density * region_volume);
      const long n = count(rng);
      std::uniform_real_distribution<double> ux(lo.x, hi.x), uy(lo.y, hi.y), uz(lo.z, hi.z);
      for (long i = 0; i < n; ++i) frame.points.push_back({ux(rng), uy(rng), uz(rng)});
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

DatasetSpec parse_dataset_spec(const std::string& text) {
  DatasetSpec spec;
  for (const KeyValue& kv : parse_key_values(text)) {
    auto range = [&](Range& r) {
      if (kv.value.find(':', 1) != std::string::npos) {
        const auto [a, b] = parse_real_pair(kv);
        r = {a, b};
      } else {
        const double v = parse_real(kv);
        r = {v, v};
      }
    };
    if (kv.key == "sequences") {
      spec.sequences = parse_count(kv);
    } else if (kv.key == "frames") {
      spec.frames = parse_count(kv);
      if (spec.frames == 0) {
        throw ConfigError("frames must be >= 1 (line " + std::to_string(kv.line) + ")");
      }
    } else if (kv.key == "width") {
      range(spec.width);
    } else if (kv.key == "length") {
      range(spec.length);
    } else if (kv.key == "height") {
      range(spec.height);
    } else if (kv.key == "speed") {
      range(spec.speed);
    } else if (kv.key == "yaw_rate") {
      range(spec.yaw_rate);
    } else if (kv.key == "position") {
      range(spec.position);
    } else if (kv.key == "surface_density") {
      range(spec.surface_density);
    } else if (kv.key == "clutter_density") {
      range(spec.clutter_density);
    } else if (kv.key == "noise_sigma") {
      range(spec.noise_sigma);
    } else if (kv.key == "clutter_margin") {
      spec.clutter_margin = parse_real(kv);
    } else {
      throw_unknown_key(kv);
    }
  }
  return spec;
}

DatasetSpec load_dataset_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read spec file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_dataset_spec(ss.str());
}

std::vector<Sequence> generate_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  std::vector<Sequence> out;
  for (std::size_t i = 0; i < spec.sequences; ++i) {
    std::mt19937_64 rng(derive_seed(seed, i));
    auto draw = [&](const Range& r) {
      return r.lo == r.hi ? r.lo : std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
    };
    SceneSpec s;
    s.extents = {draw(spec.width), draw(spec.length), draw(spec.height)};
    const double px = draw(spec.position), py = draw(spec.position);
    s.initial_center = {px, py, 0.5 * s.extents.z};
    const double pi = std::numbers::pi;
    s.initial_yaw = std::uniform_real_distribution<double>(-pi, pi)(rng);
    const double speed = draw(spec.speed);
    s.velocity = {-std::sin(s.initial_yaw) * speed, std::cos(s.initial_yaw) * speed, 0.0};
    s.yaw_rate = draw(spec.yaw_rate);
    s.frames = spec.frames;
    s.surface_density = draw(spec.surface_density);
    s.clutter_density = draw(spec.clutter_density);
    s.clutter_margin = spec.clutter_margin;
    s.noise_sigma = draw(spec.noise_sigma);
    s.seed = rng();
    char name[32];
    std::snprintf(name, sizeof(name), "seq_%04zu", i);
    out.push_back(generate_sequence(s, name));
  }
  return out;
}

}  // namespace synctrack::synth
