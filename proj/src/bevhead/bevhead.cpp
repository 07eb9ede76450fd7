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

#include "synctrack/bevhead.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "synctrack/nn/ops.hpp"
#include "synctrack/sampling.hpp"

namespace synctrack::bev {

using nn::Tensor;

namespace {

constexpr double kSnap = 1e-9;

std::size_t cells(double lo, double hi, double v) {
  return static_cast<std::size_t>(std::ceil((hi - lo) / v - kSnap));
}

// floor() that treats values a hair below an integer as that integer, so
// grid arithmetic on decimal constants lands where it does by hand.
std::int64_t cell_floor(double c) { return static_cast<std::int64_t>(std::floor(c + kSnap)); }

// Index along one axis, -1 when outside [lo, hi]; hi clamps into the last cell.
std::int64_t axis_cell(double c, double lo, double hi, double v, std::size_t n) {
  if (!(c >= lo && c <= hi)) return -1;
  return std::min<std::int64_t>(cell_floor((c - lo) / v), static_cast<std::int64_t>(n) - 1);
}

template <typename T>
void add_conv(nn::ParameterSet<T>& ps, const std::string& name, nn::Shape shape,
              std::size_t fan_in, std::mt19937_64& rng) {
  const std::size_t n = nn::shape_numel(shape);
  ps.add(name + ".w", std::move(shape), nn::he_uniform<T>(n, fan_in, rng));
}

template <typename T>
void add_bn(nn::ParameterSet<T>& ps, const std::string& name, std::size_t c) {
  ps.add(name + ".gamma", {c}, std::vector<T>(c, T(1)));
  ps.add(name + ".beta", {c}, std::vector<T>(c, T(0)));
  ps.add(name + ".mean", {c}, std::vector<T>(c, T(0)), false);
  ps.add(name + ".var", {c}, std::vector<T>(c, T(1)), false);
}

template <typename T>
Tensor<T> bn_relu(const Tensor<T>& x, nn::ParameterSet<T>& ps, const std::string& name,
                  bool training) {
  nn::BatchNormStats<T> stats{ps.at(name + ".mean").tensor.mutable_values(),
                              ps.at(name + ".var").tensor.mutable_values()};
  return nn::relu(nn::batch_norm(x, ps.at(name + ".gamma").tensor,
                                 ps.at(name + ".beta").tensor, stats, training));
}

constexpr std::size_t kZStrides[4] = {2, 1, 2, 1};
constexpr std::size_t kBevStrides[4] = {2, 1, 1, 2};
constexpr const char* kHeads[4] = {"heatmap", "offset", "z", "theta"};
constexpr std::size_t kHeadWidth[4] = {1, 2, 1, 1};

}  // namespace

std::size_t VoxelGridConfig::nx() const { return cells(min.x, max.x, voxel.x); }
std::size_t VoxelGridConfig::ny() const { return cells(min.y, max.y, voxel.y); }
std::size_t VoxelGridConfig::nz() const { return cells(min.z, max.z, voxel.z); }

void VoxelGridConfig::validate() const {
  if (!(voxel.x > 0 && voxel.y > 0 && voxel.z > 0)) {
    throw std::invalid_argument("voxel grid: voxel sizes must be positive");
  }
  if (!(max.x > min.x && max.y > min.y && max.z > min.z)) {
    throw std::invalid_argument("voxel grid: each range needs min < max");
  }
}

std::size_t TargetMaps::mask_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

template <typename T>
Tensor<T> interpolate_features(std::span<const Vec3> coarse, const Tensor<T>& coarse_feats,
                               std::span<const Vec3> fine) {
  const std::size_t k = std::min<std::size_t>(3, coarse.size());
  const std::vector<std::size_t> idx = sampling::knn_indices(fine, coarse, k);
  std::vector<T> weights(idx.size());
  for (std::size_t i = 0; i < fine.size(); ++i) {
    double total = 0.0;
    double w[3];
    for (std::size_t j = 0; j < k; ++j) {
      const double d = std::sqrt(squared_distance(fine[i], coarse[idx[i * k + j]]));
      w[j] = 1.0 / (d + 1e-8);
      total += w[j];
    }
    for (std::size_t j = 0; j < k; ++j) weights[i * k + j] = static_cast<T>(w[j] / total);
  }
  return nn::weighted_rows<T>(coarse_feats, idx, weights, k);
}

template <typename T>
Tensor<T> fuse_multiscale(const backbone::BackboneOutput<T>& stages,
                          const nn::ParameterSet<T>& ps) {
  std::vector<const TokenSet<T>*> sets{&stages.search0};
  for (const auto& s : stages.stages) sets.push_back(&s.search_tokens);
  Tensor<T> f = sets.back()->feats;
  for (std::size_t l = sets.size() - 1; l-- > 0;) {
    const TokenSet<T>& finer = *sets[l];
    const Tensor<T> carried = interpolate_features<T>(sets[l + 1]->coords, f, finer.coords);
    const std::string name = "bev.fuse" + std::to_string(l);
    f = nn::relu(nn::linear(nn::concat<T>(std::vector<Tensor<T>>{carried, finer.feats}, 1),
                            ps.at(name + ".w").tensor, ps.at(name + ".b").tensor));
  }
  return f;
}

std::vector<std::int64_t> voxel_cells(std::span<const Vec3> coords,
                                      const VoxelGridConfig& grid) {
  const std::size_t nx = grid.nx(), ny = grid.ny(), nz = grid.nz();
  std::vector<std::int64_t> out(coords.size(), -1);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const Vec3& p = coords[i];
    const std::int64_t ix = axis_cell(p.x, grid.min.x, grid.max.x, grid.voxel.x, nx);
    const std::int64_t iy = axis_cell(p.y, grid.min.y, grid.max.y, grid.voxel.y, ny);
    const std::int64_t iz = axis_cell(p.z, grid.min.z, grid.max.z, grid.voxel.z, nz);
    if (ix < 0 || iy < 0 || iz < 0) continue;
    out[i] = (iz * static_cast<std::int64_t>(ny) + iy) * static_cast<std::int64_t>(nx) + ix;
  }
  return out;
}

template <typename T>
Tensor<T> voxelize(std::span<const Vec3> coords, const Tensor<T>& feats,
                   const VoxelGridConfig& grid) {
  if (feats.rank() != 2 || feats.dim(0) != coords.size()) {
    throw std::invalid_argument("voxelize: features " + nn::shape_string(feats.shape()) +
                                " for " + std::to_string(coords.size()) + " points");
  }
  const std::size_t nx = grid.nx(), ny = grid.ny(), nz = grid.nz();
  const Tensor<T> flat = nn::scatter_mean<T>(feats, voxel_cells(coords, grid), nz * ny * nx);
  return nn::reshape(flat, {1, feats.dim(1), nz, ny, nx});
}

template <typename T>
void add_head_params(nn::ParameterSet<T>& ps, const backbone::BackboneConfig& backbone,
                     const HeadConfig& head, std::mt19937_64& rng) {
  if (head.fuse_channels == 0 || head.head_channels == 0) {
    throw std::invalid_argument("head: channel widths must be positive");
  }
  const auto& st = backbone.stages;
  const std::size_t f = head.fuse_channels;
  const std::size_t h = head.head_channels;
  for (std::size_t l = st.size(); l-- > 0;) {
    const std::size_t carried = l + 1 == st.size() ? st.back().channels : f;
    const std::size_t own = l == 0 ? backbone.group_channels() : st[l - 1].channels;
    const std::string name = "bev.fuse" + std::to_string(l);
    add_conv(ps, name, {carried + own, f}, carried + own, rng);
    ps.add(name + ".b", {f}, std::vector<T>(f, T(0)));
  }
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t in = i == 0 ? f : h;
    const std::string name = "bev.conv3d" + std::to_string(i);
    add_conv(ps, name, {h, in, 3, 3, 3}, in * 27, rng);
    add_bn(ps, name + ".bn", h);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string name = "bev.conv2d" + std::to_string(i);
    add_conv(ps, name, {h, h, 3, 3}, h * 9, rng);
    add_bn(ps, name + ".bn", h);
  }
  for (std::size_t i = 0; i < 2; ++i) {
    const std::string name = "bev.up" + std::to_string(i);
    add_conv(ps, name, {h, h, 3, 3}, h * 9, rng);
    add_bn(ps, name + ".bn", h);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string name = std::string("bev.head.") + kHeads[i];
    add_conv(ps, name, {kHeadWidth[i], h, 3, 3}, h * 9, rng);
    // A low initial heatmap prior (sigmoid(-2.19) ~ 0.1) keeps the focal
    // term from exploding on the mostly empty map.
    const T b0 = i == 0 ? T(-2.19) : T(0);
    ps.add(name + ".b", {kHeadWidth[i]}, std::vector<T>(kHeadWidth[i], b0));
  }
}

template <typename T>
HeadOutput<T> decoder_forward(const Tensor<T>& volume, nn::ParameterSet<T>& ps,
                              const VoxelGridConfig& grid, bool training) {
  const std::size_t nx = grid.nx(), ny = grid.ny(), nz = grid.nz();
  if (volume.rank() != 5 || volume.dim(2) != nz || volume.dim(3) != ny || volume.dim(4) != nx) {
    throw std::invalid_argument("decoder: volume " + nn::shape_string(volume.shape()) +
                                " does not match the voxel grid");
  }
  Tensor<T> x = volume;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string name = "bev.conv3d" + std::to_string(i);
    x = nn::conv3d(x, ps.at(name + ".w").tensor, Tensor<T>(), {kZStrides[i], 1, 1});
    x = bn_relu(x, ps, name + ".bn", training);
  }
  x = nn::max_reduce(x, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string name = "bev.conv2d" + std::to_string(i);
    x = nn::conv2d(x, ps.at(name + ".w").tensor, Tensor<T>(), {kBevStrides[i], kBevStrides[i]});
    x = bn_relu(x, ps, name + ".bn", training);
  }
  for (std::size_t i = 0; i < 2; ++i) {
    const std::string name = "bev.up" + std::to_string(i);
    x = nn::conv_transpose2d(x, ps.at(name + ".w").tensor, Tensor<T>());
    x = bn_relu(x, ps, name + ".bn", training);
  }
  if (x.dim(2) < ny || x.dim(3) < nx) {
    throw std::logic_error("decoder: upsampled map " + nn::shape_string(x.shape()) +
                           " is smaller than the grid");
  }
  x = nn::slice(nn::slice(x, 2, 0, ny), 3, 0, nx);

  auto head = [&](std::size_t i) {
    const std::string name = std::string("bev.head.") + kHeads[i];
    return nn::conv2d(x, ps.at(name + ".w").tensor, ps.at(name + ".b").tensor, {1, 1});
  };
  HeadOutput<T> out;
  out.heatmap = nn::sigmoid(head(0));
  out.offsets = head(1);
  out.z = head(2);
  out.theta = head(3);
  return out;
}

TargetMaps build_targets(const Box3D& gt_box, const VoxelGridConfig& grid, double radius) {
  TargetMaps t;
  t.nx = grid.nx();
  t.ny = grid.ny();
  const std::size_t plane = t.nx * t.ny;
  t.cls.assign(plane, 0.0);
  t.reg.assign(3 * plane, 0.0);
  t.z.assign(plane, 0.0);
  t.mask.assign(plane, 0);

  const double cx = (gt_box.center.x - grid.min.x) / grid.voxel.x;
  const double cy = (gt_box.center.y - grid.min.y) / grid.voxel.y;
  const std::int64_t jx = cell_floor(cx);
  const std::int64_t iy = cell_floor(cy);
  if (jx < 0 || iy < 0 || jx >= static_cast<std::int64_t>(t.nx) ||
      iy >= static_cast<std::int64_t>(t.ny)) {
    return t;
  }
  t.on_grid = true;
  t.center_row = static_cast<std::size_t>(iy);
  t.center_col = static_cast<std::size_t>(jx);

  const double c = std::cos(gt_box.yaw), s = std::sin(gt_box.yaw);
  for (std::size_t i = 0; i < t.ny; ++i) {
    for (std::size_t j = 0; j < t.nx; ++j) {
      const std::size_t at = i * t.nx + j;
      const double di = static_cast<double>(i) - static_cast<double>(iy);
      const double dj = static_cast<double>(j) - static_cast<double>(jx);
      const double gamma = std::sqrt(di * di + dj * dj);

      const double px = grid.min.x + (static_cast<double>(j) + 0.5) * grid.voxel.x -
                        gt_box.center.x;
      const double py = grid.min.y + (static_cast<double>(i) + 0.5) * grid.voxel.y -
                        gt_box.center.y;
      const double u = c * px + s * py;
      const double v = -s * px + c * py;
      const bool inside = std::abs(u) <= 0.5 * gt_box.size.x && std::abs(v) <= 0.5 * gt_box.size.y;
      if (gamma == 0.0) {
        t.cls[at] = 1.0;
      } else if (inside) {
        t.cls[at] = 1.0 / (gamma + 1.0);
      }
      if (gamma <= radius) {
        t.mask[at] = 1;
        t.reg[at] = cx - static_cast<double>(j);
        t.reg[plane + at] = cy - static_cast<double>(i);
        t.reg[2 * plane + at] = gt_box.yaw;
        t.z[at] = gt_box.center.z;
      }
    }
  }
  return t;
}

template <typename T>
LossTerms<T> detection_loss(const HeadOutput<T>& preds, std::span<const TargetMaps> targets,
                            const LossWeights& weights) {
  const std::size_t batch = preds.batch();
  if (targets.size() != batch) {
    throw std::invalid_argument("detection_loss: " + std::to_string(targets.size()) +
                                " targets for a batch of " + std::to_string(batch));
  }
  const std::size_t ny = preds.heatmap.dim(2), nx = preds.heatmap.dim(3);
  const std::size_t plane = ny * nx;
  for (const TargetMaps& t : targets) {
    if (t.ny != ny || t.nx != nx) {
      throw std::invalid_argument("detection_loss: target maps do not match predictions");
    }
  }

  std::vector<T> w_pos(batch * plane, T(0)), w_neg(batch * plane, T(0));
  std::vector<T> reg_target(batch * 3 * plane, T(0)), w_reg(batch * 3 * plane, T(0));
  std::vector<T> z_target(batch * plane, T(0)), w_z(batch * plane, T(0));
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const TargetMaps& t = targets[b];
    const auto positives = static_cast<double>(std::count(t.cls.begin(), t.cls.end(), 1.0));
    const double focal_norm = inv_b / std::max(1.0, positives);
    const auto masked = static_cast<double>(t.mask_count());
    for (std::size_t p = 0; p < plane; ++p) {
      const std::size_t at = b * plane + p;
      if (t.cls[p] == 1.0) {
        w_pos[at] = static_cast<T>(focal_norm);
      } else {
        w_neg[at] = static_cast<T>(std::pow(1.0 - t.cls[p], 4) * focal_norm);
      }
      if (t.mask[p] == 0) continue;
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t r = (b * 3 + c) * plane + p;
        reg_target[r] = static_cast<T>(t.reg[c * plane + p]);
        w_reg[r] = static_cast<T>(inv_b / (3.0 * masked));
      }
      z_target[at] = static_cast<T>(t.z[p]);
      w_z[at] = static_cast<T>(inv_b / masked);
    }
  }
  const nn::Shape map_shape{batch, 1, ny, nx};
  const nn::Shape reg_shape{batch, 3, ny, nx};

  const Tensor<T> p = nn::clamp(preds.heatmap, T(1e-6), T(1) - T(1e-6));
  const Tensor<T> one_minus_p = nn::add_scalar(nn::scale(p, T(-1)), T(1));
  const Tensor<T> pos = nn::mul(nn::mul(one_minus_p, one_minus_p), nn::log(p));
  const Tensor<T> neg = nn::mul(nn::mul(p, p), nn::log(one_minus_p));
  const Tensor<T> focal = nn::scale(
      nn::add(nn::sum(nn::mul(pos, Tensor<T>(map_shape, std::move(w_pos)))),
              nn::sum(nn::mul(neg, Tensor<T>(map_shape, std::move(w_neg))))),
      T(-1));

  const Tensor<T> reg_pred =
      nn::concat<T>(std::vector<Tensor<T>>{preds.offsets, preds.theta}, 1);
  const Tensor<T> reg = nn::sum(
      nn::mul(nn::abs(nn::sub(reg_pred, Tensor<T>(reg_shape, std::move(reg_target)))),
              Tensor<T>(reg_shape, std::move(w_reg))));
  const Tensor<T> z = nn::sum(
      nn::mul(nn::abs(nn::sub(preds.z, Tensor<T>(map_shape, std::move(z_target)))),
              Tensor<T>(map_shape, std::move(w_z))));

  LossTerms<T> out;
  out.total = nn::add(nn::add(nn::scale(focal, static_cast<T>(weights.cls)),
                              nn::scale(reg, static_cast<T>(weights.reg))),
                      nn::scale(z, static_cast<T>(weights.z)));
  out.focal = static_cast<double>(focal.item());
  out.reg = static_cast<double>(reg.item());
  out.z = static_cast<double>(z.item());
  return out;
}

template <typename T>
Detection decode_box(const HeadOutput<T>& preds, std::size_t b, const VoxelGridConfig& grid,
                     const Box3D& prev_box) {
  const std::size_t ny = preds.heatmap.dim(2), nx = preds.heatmap.dim(3);
  const std::size_t plane = ny * nx;
  if (b >= preds.batch()) throw std::out_of_range("decode_box: batch index out of range");
  const auto heat = preds.heatmap.values().subspan(b * plane, plane);
  const std::size_t peak =
      static_cast<std::size_t>(std::max_element(heat.begin(), heat.end()) - heat.begin());
  const std::size_t i = peak / nx, j = peak % nx;
  const auto off = preds.offsets.values();
  const double dx = static_cast<double>(off[(b * 2) * plane + peak]);
  const double dy = static_cast<double>(off[(b * 2 + 1) * plane + peak]);

  Detection d;
  d.row = i;
  d.col = j;
  d.score = static_cast<double>(heat[peak]);
  d.canonical.center = {grid.min.x + (static_cast<double>(j) + dx) * grid.voxel.x,
                        grid.min.y + (static_cast<double>(i) + dy) * grid.voxel.y,
                        static_cast<double>(preds.z.values()[b * plane + peak])};
  d.canonical.size = prev_box.size;
  d.canonical.yaw = normalize_angle(static_cast<double>(preds.theta.values()[b * plane + peak]));
  d.world = geometry::box_from_frame(d.canonical, prev_box);
  return d;
}

HeadOutput<double> predictions_from_targets(const TargetMaps& t) {
  const std::size_t plane = t.ny * t.nx;
  HeadOutput<double> out;
  out.heatmap = Tensor<double>({1, 1, t.ny, t.nx}, t.cls);
  out.offsets = Tensor<double>({1, 2, t.ny, t.nx},
                               std::vector<double>(t.reg.begin(), t.reg.begin() + 2 * plane));
  out.theta = Tensor<double>({1, 1, t.ny, t.nx},
                             std::vector<double>(t.reg.begin() + 2 * plane, t.reg.end()));
  out.z = Tensor<double>({1, 1, t.ny, t.nx}, t.z);
  return out;
}

#define SYNCTRACK_INSTANTIATE_BEV(T)                                                         \
  template Tensor<T> interpolate_features<T>(std::span<const Vec3>, const Tensor<T>&,        \
                                             std::span<const Vec3>);                         \
  template Tensor<T> fuse_multiscale<T>(const backbone::BackboneOutput<T>&,                  \
                                        const nn::ParameterSet<T>&);                         \
  template Tensor<T> voxelize<T>(std::span<const Vec3>, const Tensor<T>&,                    \
                                 const VoxelGridConfig&);                                    \
  template void add_head_params<T>(nn::ParameterSet<T>&, const backbone::BackboneConfig&,   \
                                   const HeadConfig&, std::mt19937_64&);                     \
  template HeadOutput<T> decoder_forward<T>(const Tensor<T>&, nn::ParameterSet<T>&,          \
                                            const VoxelGridConfig&, bool);                   \
  template LossTerms<T> detection_loss<T>(const HeadOutput<T>&, std::span<const TargetMaps>, \
                                          const LossWeights&);                               \
  template Detection decode_box<T>(const HeadOutput<T>&, std::size_t, const VoxelGridConfig&, \
                                   const Box3D&);

SYNCTRACK_INSTANTIATE_BEV(float)
SYNCTRACK_INSTANTIATE_BEV(double)

}  // namespace synctrack::bev
