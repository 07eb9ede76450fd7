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

#ifndef SYNCTRACK_NN_GRADCHECK_SUITE_HPP_
#define SYNCTRACK_NN_GRADCHECK_SUITE_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "synctrack/nn/gradcheck.hpp"
#include "synctrack/nn/tensor.hpp"

namespace synctrack::nn {

struct NamedCheck {
  std::string name;
  GradCheckResult result;
  bool passed = false;
};

inline constexpr double kGradCheckTolerance = 1e-4;

// One finite-difference check per differentiation primitive on randomized
// small shapes, each reduced to a scalar through a fixed random weighting.
std::vector<NamedCheck> primitive_gradchecks(std::uint64_t seed,
                                             double tolerance = kGradCheckTolerance);

// Helpers shared with composed checks elsewhere.
Tensor<double> random_tensor(const Shape& shape, std::mt19937_64& rng, double lo,
                             double hi, bool requires_grad = true);
// sum(x * w) for a random w of x's shape, fixed by `seed`.
Tensor<double> random_projection(const Tensor<double>& x, std::uint64_t seed);

}  // namespace synctrack::nn

#endif  // SYNCTRACK_NN_GRADCHECK_SUITE_HPP_
