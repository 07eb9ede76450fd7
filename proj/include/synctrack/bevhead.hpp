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

#ifndef SYNCTRACK_BEVHEAD_HPP_
#define SYNCTRACK_BEVHEAD_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "synctrack/backbone.hpp"
#include "synctrack/geometry.hpp"
#include "synctrack/nn/parameter.hpp"
#include "synctrack/nn/tensor.hpp"

namespace synctrack::bev {

struct VoxelGridConfig {
  Vec3 min{-5.6, -3.6, -2.4};
  Vec3 max{5.6, 3.6, 2.4};
  Vec3 voxel{0.3, 0.3, 0.3};

  // Cells per axis, ceil(extent / voxel); an extent within 1e-9 cells of a
  // whole number is not rounded up.
  std::size_t nx() const;
  std::size_t ny() const;
  std::size_t nz() const;

  void validate() const;
};

struct HeadConfig {
  std::size_t fuse_channels = 32;
  std::size_t head_channels = 32;
};

struct LossWeights {
  double cls = 1.0;
  double reg = 1.0;
  double z = 2.0;
};

// Channel-first maps for a batch: heatmap [B,1,ny,nx] (after the sigmoid),
// offsets [B,2,ny,nx], z and theta [B,1,ny,nx].
template <typename T>
struct HeadOutput {
  nn::Tensor<T> heatmap;
  nn::Tensor<T> offsets;
  nn::Tensor<T> z;
  nn::Tensor<T> theta;

  std::size_t batch() const { return heatmap.dim(0); }
};

struct TargetMaps {
  std::size_t ny = 0;
  std::size_t nx = 0;
  // Row-major [ny, nx]; reg holds three such planes (dx, dy, theta).
  std::vector<double> cls;
  std::vector<double> reg;
  std::vector<double> z;
  std::vector<std::uint8_t> mask;
  bool on_grid = false;
  std::size_t center_row = 0;
  std::size_t center_col = 0;

  std::size_t mask_count() const;
};

struct Detection {
  Box3D canonical;
  Box3D world;
  double score = 0.0;
  std::size_t row = 0;
  std::size_t col = 0;
};

template <typename T>
struct LossTerms {
  nn::Tensor<T> total;
  double focal = 0.0;
  double reg = 0.0;
  double z = 0.0;
};

// Features of `coarse` carried to `fine` points by inverse-distance weights
// over the (up to) three nearest coarse points: w = 1/(d + 1e-8), normalized.
template <typename T>
nn::Tensor<T> interpolate_features(std::span<const Vec3> coarse,
                                   const nn::Tensor<T>& coarse_feats,
                                   std::span<const Vec3> fine);

// Coarse-to-fine propagation through every backbone stage down to the full
// search set. Returns [n_search_points, fuse_channels].
template <typename T>
nn::Tensor<T> fuse_multiscale(const backbone::BackboneOutput<T>& stages,
                              const nn::ParameterSet<T>& ps);

// Flat cell id (z, y, x order) per point, or -1 outside the grid.
std::vector<std::int64_t> voxel_cells(std::span<const Vec3> coords,
                                      const VoxelGridConfig& grid);

// Mean feature per cell as a [1, C, nz, ny, nx] volume.
template <typename T>
nn::Tensor<T> voxelize(std::span<const Vec3> coords, const nn::Tensor<T>& feats,
                       const VoxelGridConfig& grid);

// Registers fusion and decoder parameters under "bev.". Batch-norm running
// statistics are added as non-trainable buffers.
template <typename T>
void add_head_params(nn::ParameterSet<T>& ps, const backbone::BackboneConfig& backbone,
                     const HeadConfig& head, std::mt19937_64& rng);

// volume [B, C, nz, ny, nx]. Training mode uses batch statistics and updates
// the running buffers.
template <typename T>
HeadOutput<T> decoder_forward(const nn::Tensor<T>& volume, nn::ParameterSet<T>& ps,
                              const VoxelGridConfig& grid, bool training);

// gt_box is expressed in the search-region frame.
TargetMaps build_targets(const Box3D& gt_box, const VoxelGridConfig& grid,
                         double radius = 2.0);

// Mean over the batch of focal + weighted L1 terms.
template <typename T>
LossTerms<T> detection_loss(const HeadOutput<T>& preds, std::span<const TargetMaps> targets,
                            const LossWeights& weights = {});

// Reads the box at the heatmap peak of batch element `b` and maps it back
// to the world through prev_box.
template <typename T>
Detection decode_box(const HeadOutput<T>& preds, std::size_t b, const VoxelGridConfig& grid,
                     const Box3D& prev_box);

// Targets viewed as a single-element prediction batch.
HeadOutput<double> predictions_from_targets(const TargetMaps& targets);

}  // namespace synctrack::bev

#endif  // SYNCTRACK_BEVHEAD_HPP_
