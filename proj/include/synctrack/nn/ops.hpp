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

// Differentiable primitives. Every function records its vector-Jacobian
// product on the returned tensor. Shape errors throw std::invalid_argument.
// Grid tensors are channel-first: [B, C, D, H, W] (3D) or [B, C, H, W] (2D).

#ifndef SYNCTRACK_NN_OPS_HPP_
#define SYNCTRACK_NN_OPS_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "synctrack/nn/tensor.hpp"

namespace synctrack::nn {

// [n, k] x [k, m] -> [n, m].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> transpose(const Tensor<T>& a);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T value);

// Adds a [C] row to every row of x; C must equal x's last dimension.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);

template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> parts, std::size_t axis);

// Half-open range [begin, end) along `axis`.
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin,
                std::size_t end);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

// Rows along axis 0, in index order (repeats allowed).
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> index);

// out[n] = sum_j weight[n * per_row + j] * x[index[n * per_row + j]] for a
// [M, C] input; returns [index.size() / per_row, C].
template <typename T>
Tensor<T> weighted_rows(const Tensor<T>& x, std::span<const std::size_t> index,
                        std::span<const T> weight, std::size_t per_row);

// Averages rows of x [N, C] that share a cell id into a channel-first
// [C, cells] map; cell -1 drops the row, empty cells stay zero.
template <typename T>
Tensor<T> scatter_mean(const Tensor<T>& x, std::span<const std::int64_t> cell,
                       std::size_t cells);

// Row-wise softmax of a 2D tensor, shifted by the row maximum.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> abs(const Tensor<T>& x);
template <typename T>
Tensor<T> log(const Tensor<T>& x);
template <typename T>
Tensor<T> pow(const Tensor<T>& x, T exponent);
// Gradient passes where lo <= x <= hi.
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);

// x [N, C_in] * weight [C_in, C_out] + bias [C_out]; bias may be undefined.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias);

// Normalizes each row of x [N, C] over its C entries.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps = T(1e-5));

// Running statistics live outside the graph; training mode updates them.
template <typename T>
struct BatchNormStats {
  std::span<T> running_mean;
  std::span<T> running_var;
};

// Per-channel normalization of x [B, C, ...]. Training mode normalizes with
// the batch statistics over all non-channel axes; eval mode is the affine
// map given by the running statistics.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, BatchNormStats<T> stats,
                     bool training, T momentum = T(0.1), T eps = T(1e-5));

// Kernel 3 per axis, zero padding 1. Output length per axis is
// floor((L + 2 - 3) / stride) + 1.
template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias, std::array<std::size_t, 3> stride);
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                 const Tensor<T>& bias, std::array<std::size_t, 2> stride);

// Stride 2, kernel 3, padding 1, output padding 1: [B, C_in, H, W] with a
// [C_in, C_out, 3, 3] weight gives [B, C_out, 2H, 2W].
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& weight,
                           const Tensor<T>& bias);

// Maximum along `axis` (removed from the shape). The gradient goes to the
// lowest-index maximum.
template <typename T>
Tensor<T> max_reduce(const Tensor<T>& x, std::size_t axis);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

}  // namespace synctrack::nn

#endif  // SYNCTRACK_NN_OPS_HPP_
