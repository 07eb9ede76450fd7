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

#ifndef SYNCTRACK_NN_PARAMETER_HPP_
#define SYNCTRACK_NN_PARAMETER_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "synctrack/nn/tensor.hpp"

namespace synctrack::nn {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
  // Buffers (batch-norm running statistics) are saved but never optimized.
  bool trainable = true;
  std::vector<T> first_moment;
  std::vector<T> second_moment;
  std::int64_t step = 0;
};

// Owns parameters in registration order; pointers stay valid for the
// lifetime of the set.
template <typename T>
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  // Throws std::invalid_argument on a duplicate name.
  Parameter<T>& add(std::string name, Shape shape, std::vector<T> values,
                    bool trainable = true);

  Parameter<T>* find(const std::string& name);
  const Parameter<T>* find(const std::string& name) const;
  // Throws std::out_of_range naming the missing parameter.
  Parameter<T>& at(const std::string& name);
  const Parameter<T>& at(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }

  // Scalars in trainable parameters whose name starts with `prefix`.
  std::size_t count(const std::string& prefix = "") const;

  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
};

// Uniform(-bound, bound) with bound = sqrt(6 / fan_in) (He-uniform).
template <typename T>
std::vector<T> he_uniform(std::size_t count, std::size_t fan_in, std::mt19937_64& rng);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam update; increments each parameter's step counter.
// Throws std::invalid_argument when grads and params disagree in count or
// size.
template <typename T>
void adam_step(std::span<Parameter<T>* const> params,
               std::span<const std::vector<T>> grads, double lr,
               const AdamOptions& options = {});

// Uses the gradients accumulated on the trainable parameters' tensors.
template <typename T>
void adam_step(ParameterSet<T>& params, double lr, const AdamOptions& options = {});

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;

}  // namespace synctrack::nn

#endif  // SYNCTRACK_NN_PARAMETER_HPP_
