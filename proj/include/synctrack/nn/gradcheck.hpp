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

#ifndef SYNCTRACK_NN_GRADCHECK_HPP_
#define SYNCTRACK_NN_GRADCHECK_HPP_

#include <cstddef>
#include <functional>
#include <vector>

#include "synctrack/nn/tensor.hpp"

namespace synctrack::nn {

using ScalarFunction =
    std::function<Tensor<double>(const std::vector<Tensor<double>>& inputs)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Compares the reverse-mode gradient of the scalar `f` against central
// differences on every element of every input that requires a gradient.
// Relative error per element is |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult finite_diff_gradcheck(const ScalarFunction& f,
                                      std::vector<Tensor<double>> inputs,
                                      double epsilon = 1e-5);

}  // namespace synctrack::nn

#endif  // SYNCTRACK_NN_GRADCHECK_HPP_
