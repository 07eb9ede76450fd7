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

#ifndef SYNCTRACK_SAMPLING_HPP_
#define SYNCTRACK_SAMPLING_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "synctrack/geometry.hpp"
#include "synctrack/nn/tensor.hpp"
#include "synctrack/token_set.hpp"

namespace synctrack::sampling {

struct SampleSelection {
  std::vector<std::size_t> indices;
  // Per selected index; empty when the sampler has no notion of score.
  std::vector<double> scores;
};

// Exactly n points. Larger clouds are subsampled uniformly without
// replacement (original order kept); smaller ones keep every point and
// append uniform with-replacement duplicates. Throws on an empty cloud or
// n == 0.
PointCloud resize_to_count(const PointCloud& cloud, std::size_t n,
                           std::uint64_t seed);

// Greedy max-min selection starting at `start`; ties go to the lowest index.
SampleSelection farthest_point_sampling(std::span<const Vec3> coords,
                                        std::size_t k, std::size_t start = 0);

// Row-major [queries.size(), k] neighbour indices into refs, nearest first,
// ties by lowest index.
std::vector<std::size_t> knn_indices(std::span<const Vec3> queries,
                                     std::span<const Vec3> refs, std::size_t k);

// For each query: gather its k nearest refs, map [ref - query ; ref feats]
// through relu(x W + b), and take the elementwise max over the k rows.
// weight is [3 + C_in, C_out]; ref_feats is [N, C_in] or undefined when
// C_in == 0. The output carries the query coordinates.
template <typename T>
TokenSet<T> query_and_group(std::span<const Vec3> queries,
                            std::span<const Vec3> refs,
                            const nn::Tensor<T>& ref_feats, std::size_t k,
                            const nn::Tensor<T>& weight,
                            const nn::Tensor<T>& bias);

// Every point groups its own neighbourhood.
template <typename T>
TokenSet<T> query_and_group(std::span<const Vec3> coords,
                            const nn::Tensor<T>& feats, std::size_t k,
                            const nn::Tensor<T>& weight,
                            const nn::Tensor<T>& bias) {
  return query_and_group(coords, coords, feats, k, weight, bias);
}

}  // namespace synctrack::sampling

#endif  // SYNCTRACK_SAMPLING_HPP_
