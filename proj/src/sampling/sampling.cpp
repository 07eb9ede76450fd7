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

#include "synctrack/sampling.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "synctrack/nn/ops.hpp"

namespace synctrack::sampling {

PointCloud resize_to_count(const PointCloud& cloud, std::size_t n,
                           std::uint64_t seed) {
  if (cloud.empty()) throw std::invalid_argument("resize_to_count: empty cloud");
  if (n == 0) throw std::invalid_argument("resize_to_count: n must be positive");
  const std::size_t size = cloud.size();
  std::vector<std::size_t> all(size);
  std::iota(all.begin(), all.end(), 0);
  if (size == n) return cloud.select(all);

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> picked;
  picked.reserve(n);
  if (size > n) {
    std::sample(all.begin(), all.end(), std::back_inserter(picked), n, rng);
  } else {
    picked = all;
    std::uniform_int_distribution<std::size_t> pick(0, size - 1);
    while (picked.size() < n) picked.push_back(pick(rng));
  }
  return cloud.select(picked);
}

SampleSelection farthest_point_sampling(std::span<const Vec3> coords,
                                        std::size_t k, std::size_t start) {
  const std::size_t n = coords.size();
  if (k == 0 || k > n) {
    throw std::invalid_argument("farthest_point_sampling: k=" + std::to_string(k) +
                                " with " + std::to_string(n) + " points");
  }
  if (start >= n) throw std::invalid_argument("farthest_point_sampling: start out of range");

  SampleSelection sel;
  sel.indices.reserve(k);
  // Squared distance to the nearest selected point; -1 marks selected.
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t current = start;
  for (std::size_t step = 0; step < k; ++step) {
    sel.indices.push_back(current);
    nearest[current] = -1.0;
    if (step + 1 == k) break;
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (nearest[i] < 0.0) continue;
      nearest[i] = std::min(nearest[i], squared_distance(coords[i], coords[current]));
      if (nearest[i] > best_d) {
        best_d = nearest[i];
        best = i;
      }
    }
    current = best;
  }
  return sel;
}

std::vector<std::size_t> knn_indices(std::span<const Vec3> queries,
                                     std::span<const Vec3> refs, std::size_t k) {
  const std::size_t n = refs.size();
  if (k == 0 || k > n) {
    throw std::invalid_argument("knn_indices: k=" + std::to_string(k) + " with " +
                                std::to_string(n) + " references");
  }
  std::vector<std::size_t> out;
  out.reserve(queries.size() * k);
  std::vector<std::pair<double, std::size_t>> d(n);
  for (const Vec3& q : queries) {
    for (std::size_t i = 0; i < n; ++i) d[i] = {squared_distance(q, refs[i]), i};
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    for (std::size_t j = 0; j < k; ++j) out.push_back(d[j].second);
  }
  return out;
}

template <typename T>
TokenSet<T> query_and_group(std::span<const Vec3> queries,
                            std::span<const Vec3> refs,
                            const nn::Tensor<T>& ref_feats, std::size_t k,
                            const nn::Tensor<T>& weight,
                            const nn::Tensor<T>& bias) {
  const std::size_t c_in = ref_feats.defined() ? ref_feats.dim(1) : 0;
  if (ref_feats.defined() && (ref_feats.rank() != 2 || ref_feats.dim(0) != refs.size())) {
    throw std::invalid_argument("query_and_group: features do not match references");
  }
  if (weight.rank() != 2 || weight.dim(0) != 3 + c_in) {
    throw std::invalid_argument("query_and_group: weight must have 3 + C_in rows, got " +
                                nn::shape_string(weight.shape()));
  }
  const std::size_t q = queries.size();
  const std::size_t c_out = weight.dim(1);
  const std::vector<std::size_t> idx = knn_indices(queries, refs, k);

  std::vector<Vec3> rel(q * k);
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < k; ++j) rel[i * k + j] = refs[idx[i * k + j]] - queries[i];

  // Split the affine map so the feature part is applied once per reference
  // point rather than once per (query, neighbour) row.
  nn::Tensor<T> pre = nn::linear(coords_tensor<T>(rel), nn::slice(weight, 0, 0, 3), bias);
  if (c_in > 0) {
    const nn::Tensor<T> proj = nn::matmul(ref_feats, nn::slice(weight, 0, 3, 3 + c_in));
    pre = nn::add(pre, nn::gather_rows<T>(proj, idx));
  }
  const nn::Tensor<T> grouped = nn::reshape(nn::relu(pre), {q, k, c_out});
  return {std::vector<Vec3>(queries.begin(), queries.end()), nn::max_reduce(grouped, 1)};
}

template TokenSet<float> query_and_group(std::span<const Vec3>, std::span<const Vec3>,
                                         const nn::Tensor<float>&, std::size_t,
                                         const nn::Tensor<float>&, const nn::Tensor<float>&);
template TokenSet<double> query_and_group(std::span<const Vec3>, std::span<const Vec3>,
                                          const nn::Tensor<double>&, std::size_t,
                                          const nn::Tensor<double>&, const nn::Tensor<double>&);

}  // namespace synctrack::sampling
