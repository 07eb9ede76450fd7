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

#include "synctrack/geometry.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>
#include <string>

namespace synctrack {

double normalize_angle(double radians) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double a = std::remainder(radians, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  return a;
}

Box3D Box3D::make(const Vec3& center, const Vec3& size, double yaw) {
  Box3D box{center, size, normalize_angle(yaw)};
  if (!box.valid()) {
    throw std::invalid_argument("Box3D: extents must be positive and finite");
  }
  return box;
}

bool Box3D::valid() const {
  auto finite = [](const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
  };
  return finite(center) && finite(size) && std::isfinite(yaw) &&
         size.x > 0.0 && size.y > 0.0 && size.z > 0.0;
}

void PointCloud::check() const {
  if (channels == 0 && !features.empty()) {
    throw std::invalid_argument("PointCloud: features without channel count");
  }
  if (features.size() != points.size() * channels) {
    throw std::invalid_argument("PointCloud: feature rows (" +
                                std::to_string(features.size() /
                                               std::max<std::size_t>(channels, 1)) +
                                ") != points (" +
                                std::to_string(points.size()) + ")");
  }
}

PointCloud PointCloud::select(std::span<const std::size_t> indices) const {
  PointCloud out;
  out.channels = channels;
  out.points.reserve(indices.size());
  out.features.reserve(indices.size() * channels);
  for (std::size_t i : indices) {
    out.points.push_back(points.at(i));
    auto row = feature_row(i);
    out.features.insert(out.features.end(), row.begin(), row.end());
  }
  return out;
}

namespace geometry {

Vec3 to_box_frame(const Vec3& p, const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const Vec3 d = p - box.center;
  return {c * d.x + s * d.y, -s * d.x + c * d.y, d.z};
}

Vec3 from_box_frame(const Vec3& p, const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  return {c * p.x - s * p.y + box.center.x, s * p.x + c * p.y + box.center.y,
          p.z + box.center.z};
}

PointCloud transform_to_box_frame(const PointCloud& points, const Box3D& box) {
  PointCloud out = points;
  for (Vec3& p : out.points) p = to_box_frame(p, box);
  return out;
}

PointCloud transform_from_box_frame(const PointCloud& points,
                                    const Box3D& box) {
  PointCloud out = points;
  for (Vec3& p : out.points) p = from_box_frame(p, box);
  return out;
}

Box3D box_to_frame(const Box3D& box, const Box3D& frame) {
  return Box3D{to_box_frame(box.center, frame), box.size,
               normalize_angle(box.yaw - frame.yaw)};
}

Box3D box_from_frame(const Box3D& box, const Box3D& frame) {
  return Box3D{from_box_frame(box.center, frame), box.size,
               normalize_angle(box.yaw + frame.yaw)};
}

bool contains(const Box3D& box, const Vec3& p, double margin) {
  // 1 nm slack so points on a face survive the rotation round trip.
  constexpr double kSlack = 1e-9;
  const Vec3 q = to_box_frame(p, box);
  return std::abs(q.x) <= 0.5 * box.size.x + margin + kSlack &&
         std::abs(q.y) <= 0.5 * box.size.y + margin + kSlack &&
         std::abs(q.z) <= 0.5 * box.size.z + margin + kSlack;
}

PointCloud crop_points_in_box(const PointCloud& points, const Box3D& box,
                              double margin) {
  if (margin < 0.0) throw std::invalid_argument("crop: negative margin");
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (contains(box, points.points[i], margin)) keep.push_back(i);
  }
  return points.select(keep);
}

PointCloud generate_search_region(const PointCloud& frame,
                                  const Box3D& prev_box, double enlarge_xy,
                                  double enlarge_z) {
  if (enlarge_xy < 0.0 || enlarge_z < 0.0) {
    throw std::invalid_argument("search region: negative enlargement");
  }
  Box3D region = prev_box;
  region.size =
      prev_box.size + 2.0 * Vec3{enlarge_xy, enlarge_xy, enlarge_z};
  return transform_to_box_frame(crop_points_in_box(frame, region, 0.0),
                                prev_box);
}

std::vector<Vec3> bev_corners(const Box3D& box) {
  const double hx = 0.5 * box.size.x;
  const double hy = 0.5 * box.size.y;
  const Vec3 local[4] = {{hx, hy, 0}, {-hx, hy, 0}, {-hx, -hy, 0}, {hx, -hy, 0}};
  std::vector<Vec3> out;
  out.reserve(4);
  for (const Vec3& p : local) {
    Vec3 w = from_box_frame(p, box);
    w.z = 0.0;
    out.push_back(w);
  }
  return out;
}

namespace {

constexpr double kMinArea = 1e-12;

double cross2(const Vec3& o, const Vec3& a, const Vec3& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double polygon_area(const std::vector<Vec3>& poly) {
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec3& a = poly[i];
    const Vec3& b = poly[(i + 1) % poly.size()];
    twice += a.x * b.y - a.y * b.x;
  }
  return 0.5 * std::abs(twice);
}

// Sutherland-Hodgman: clips `subject` against the convex CCW `clip`.
std::vector<Vec3> clip_convex(std::vector<Vec3> subject,
                              const std::vector<Vec3>& clip) {
  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const Vec3& a = clip[e];
    const Vec3& b = clip[(e + 1) % clip.size()];
    std::vector<Vec3> input;
    input.swap(subject);
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Vec3& p = input[i];
      const Vec3& q = input[(i + 1) % input.size()];
      const double sp = cross2(a, b, p);
      const double sq = cross2(a, b, q);
      if (sp >= 0.0) subject.push_back(p);
      if ((sp >= 0.0) != (sq >= 0.0)) {
        const double t = sp / (sp - sq);
        subject.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y), 0.0});
      }
    }
  }
  return subject;
}

}  // namespace

double iou3d(const Box3D& a, const Box3D& b) {
  // Clipping round-off would leave 1 - 4e-16 for a box against itself.
  if (a == b) return 1.0;
  const double z_lo = std::max(a.center.z - 0.5 * a.size.z,
                               b.center.z - 0.5 * b.size.z);
  const double z_hi = std::min(a.center.z + 0.5 * a.size.z,
                               b.center.z + 0.5 * b.size.z);
  const double z_overlap = std::max(0.0, z_hi - z_lo);
  if (z_overlap <= 0.0) return 0.0;

  double area = polygon_area(clip_convex(bev_corners(a), bev_corners(b)));
  if (area < kMinArea) return 0.0;

  const double inter = area * z_overlap;
  const double uni = a.volume() + b.volume() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

TrackMetrics tracking_metrics(std::span<const Box3D> pred,
                              std::span<const Box3D> gt) {
  if (pred.empty() || pred.size() != gt.size()) {
    throw std::invalid_argument("tracking_metrics: need equal-length, nonempty "
                                "prediction and ground-truth lists");
  }
  TrackMetrics m;
  m.ious.reserve(pred.size());
  m.center_distances.reserve(pred.size());
  double iou_sum = 0.0;
  double prec_sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double iou = iou3d(pred[i], gt[i]);
    const double d = (pred[i].center - gt[i].center).norm();
    m.ious.push_back(iou);
    m.center_distances.push_back(d);
    iou_sum += iou;
    prec_sum += 1.0 - std::min(d, 2.0) / 2.0;
  }
  const double n = static_cast<double>(pred.size());
  m.success = 100.0 * iou_sum / n;
  m.precision = 100.0 * prec_sum / n;
  return m;
}

}  // namespace geometry
}  // namespace synctrack
