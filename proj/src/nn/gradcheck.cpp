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

#include "synctrack/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace synctrack::nn {

GradCheckResult finite_diff_gradcheck(const ScalarFunction& f,
                                      std::vector<Tensor<double>> inputs,
                                      double epsilon) {
  for (auto& in : inputs)
    if (in.requires_grad()) in.zero_grad();
  f(inputs).backward();

  std::vector<std::vector<double>> analytic(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].requires_grad()) {
      analytic[i].assign(inputs[i].grad().begin(), inputs[i].grad().end());
    }
  }

  GradCheckResult result;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i].requires_grad()) continue;
    auto values = inputs[i].mutable_values();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      values[j] = saved + epsilon;
      const double plus = f(inputs).item();
      values[j] = saved - epsilon;
      const double minus = f(inputs).item();
      values[j] = saved;

      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = analytic[i][j];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      ++result.checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_input = i;
        result.worst_index = j;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace synctrack::nn
