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

#ifndef SYNCTRACK_TOKEN_SET_HPP_
#define SYNCTRACK_TOKEN_SET_HPP_

#include <span>
#include <stdexcept>
#include <vector>

#include "synctrack/geometry.hpp"
#include "synctrack/nn/tensor.hpp"

namespace synctrack {

// Point tokens: coordinates travel beside a [N, C] feature tensor.
template <typename T>
struct TokenSet {
  std::vector<Vec3> coords;
  nn::Tensor<T> feats;

  std::size_t size() const { return coords.size(); }
  std::size_t channels() const { return feats.dim(1); }

  void check() const {
    if (!feats.defined() || feats.rank() != 2 || feats.dim(0) != coords.size()) {
      throw std::invalid_argument("TokenSet: feature rows do not match coordinates");
    }
  }
};

// [N, 3] constant tensor of coordinates.
template <typename T>
nn::Tensor<T> coords_tensor(std::span<const Vec3> coords) {
  std::vector<T> v;
  v.reserve(coords.size() * 3);
  for (const Vec3& p : coords) {
    v.push_back(static_cast<T>(p.x));
    v.push_back(static_cast<T>(p.y));
    v.push_back(static_cast<T>(p.z));
  }
  return nn::Tensor<T>({coords.size(), 3}, std::move(v));
}

}  // namespace synctrack

#endif  // SYNCTRACK_TOKEN_SET_HPP_
