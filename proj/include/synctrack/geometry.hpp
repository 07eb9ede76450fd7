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

#ifndef SYNCTRACK_GEOMETRY_HPP_
#define SYNCTRACK_GEOMETRY_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace synctrack {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(const Vec3& a, const Vec3& b) {
    return {a.x + b.x, a.y + b.y, a.z + b.z};
  }
  friend Vec3 operator-(const Vec3& a, const Vec3& b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend Vec3 operator*(double s, const Vec3& a) {
    return {s * a.x, s * a.y, s * a.z};
  }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

// Wraps an angle into (-pi, pi].
double normalize_angle(double radians);

// Oriented box with yaw about the up (z) axis. In the box frame, size.x (w)
// spans the local x axis, size.y (l) the local y axis and size.z (h) the up
// axis.
struct Box3D {
  Vec3 center;
  Vec3 size{1.0, 1.0, 1.0};
  double yaw = 0.0;

  // Validates extents and normalizes yaw; throws std::invalid_argument.
  static Box3D make(const Vec3& center, const Vec3& size, double yaw);

  bool valid() const;
  double volume() const { return size.x * size.y * size.z; }

  friend bool operator==(const Box3D&, const Box3D&) = default;
};

// Points with an optional row-major feature matrix (channels columns).
struct PointCloud {
  std::vector<Vec3> points;
  std::size_t channels = 0;
  std::vector<double> features;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_features() const { return channels > 0; }

  std::span<const double> feature_row(std::size_t i) const {
    return {features.data() + i * channels, channels};
  }

  // Throws std::invalid_argument when feature rows and points disagree.
  void check() const;

  // Copies the selected rows (points and features) in the given order.
  PointCloud select(std::span<const std::size_t> indices) const;

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

struct TrackMetrics {
  double success = 0.0;
  double precision = 0.0;
  std::vector<double> ious;
  std::vector<double> center_distances;
};

namespace geometry {

// p' = R(-yaw) (p - center).
Vec3 to_box_frame(const Vec3& p, const Box3D& box);
// Inverse of to_box_frame: p = R(yaw) p' + center.
Vec3 from_box_frame(const Vec3& p, const Box3D& box);

PointCloud transform_to_box_frame(const PointCloud& points, const Box3D& box);
PointCloud transform_from_box_frame(const PointCloud& points, const Box3D& box);

// Expresses `box` (world frame) in the canonical frame of `frame`.
Box3D box_to_frame(const Box3D& box, const Box3D& frame);
// Inverse of box_to_frame.
Box3D box_from_frame(const Box3D& box, const Box3D& frame);

bool contains(const Box3D& box, const Vec3& p, double margin = 0.0);

PointCloud crop_points_in_box(const PointCloud& points, const Box3D& box,
                              double margin);

// Crops with `prev_box` grown by (enlarge_xy, enlarge_xy, enlarge_z) on every
// side, then maps the kept points into prev_box's frame.
PointCloud generate_search_region(const PointCloud& frame,
                                  const Box3D& prev_box, double enlarge_xy,
                                  double enlarge_z);

// Corners of the bird's-eye-view footprint, counter-clockwise.
std::vector<Vec3> bev_corners(const Box3D& box);

double iou3d(const Box3D& a, const Box3D& b);

// Success is the mean overlap, Precision the mean of 1 - min(d, 2)/2 with d
// the 3D center distance, both as percentages. Throws std::invalid_argument
// on empty or mismatched input.
TrackMetrics tracking_metrics(std::span<const Box3D> pred,
                              std::span<const Box3D> gt);

}  // namespace geometry
}  // namespace synctrack

#endif  // SYNCTRACK_GEOMETRY_HPP_
