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

#include "synctrack/nn/parameter.hpp"

#include <cmath>
#include <stdexcept>

namespace synctrack::nn {

template <typename T>
Parameter<T>& ParameterSet<T>::add(std::string name, Shape shape,
                                   std::vector<T> values, bool trainable) {
  if (find(name) != nullptr) {
    throw std::invalid_argument("parameter '" + name + "' registered twice");
  }
  auto p = std::make_unique<Parameter<T>>();
  p->name = std::move(name);
  p->tensor = Tensor<T>(std::move(shape), std::move(values), trainable);
  p->trainable = trainable;
  p->first_moment.assign(p->tensor.numel(), T(0));
  p->second_moment.assign(p->tensor.numel(), T(0));
  params_.push_back(std::move(p));
  return *params_.back();
}

template <typename T>
Parameter<T>* ParameterSet<T>::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

template <typename T>
const Parameter<T>* ParameterSet<T>::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

template <typename T>
Parameter<T>& ParameterSet<T>::at(const std::string& name) {
  Parameter<T>* p = find(name);
  if (p == nullptr) throw std::out_of_range("no parameter named '" + name + "'");
  return *p;
}

template <typename T>
const Parameter<T>& ParameterSet<T>::at(const std::string& name) const {
  const Parameter<T>* p = find(name);
  if (p == nullptr) throw std::out_of_range("no parameter named '" + name + "'");
  return *p;
}

template <typename T>
std::size_t ParameterSet<T>::count(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p->trainable && p->name.compare(0, prefix.size(), prefix) == 0) {
      n += p->tensor.numel();
    }
  }
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& p : params_)
    if (p->trainable) p->tensor.zero_grad();
}

template <typename T>
std::vector<T> he_uniform(std::size_t count, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in == 0 ? 1 : fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<T> out(count);
  for (T& v : out) v = static_cast<T>(dist(rng));
  return out;
}

template <typename T>
void adam_step(std::span<Parameter<T>* const> params,
               std::span<const std::vector<T>> grads, double lr,
               const AdamOptions& options) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam_step: " + std::to_string(grads.size()) +
                                " gradients for " + std::to_string(params.size()) +
                                " parameters");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter<T>& p = *params[k];
    const std::vector<T>& g = grads[k];
    auto w = p.tensor.mutable_values();
    if (g.size() != w.size() || p.first_moment.size() != w.size() ||
        p.second_moment.size() != w.size()) {
      throw std::invalid_argument("adam_step: gradient size mismatch for '" +
                                  p.name + "'");
    }
    ++p.step;
    const double bc1 = 1.0 - std::pow(options.beta1, static_cast<double>(p.step));
    const double bc2 = 1.0 - std::pow(options.beta2, static_cast<double>(p.step));
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double m = options.beta1 * p.first_moment[i] + (1.0 - options.beta1) * gi;
      const double v = options.beta2 * p.second_moment[i] + (1.0 - options.beta2) * gi * gi;
      p.first_moment[i] = static_cast<T>(m);
      p.second_moment[i] = static_cast<T>(v);
      const double m_hat = m / bc1;
      const double v_hat = v / bc2;
      w[i] = static_cast<T>(static_cast<double>(w[i]) -
                            lr * m_hat / (std::sqrt(v_hat) + options.eps));
    }
  }
}

template <typename T>
void adam_step(ParameterSet<T>& params, double lr, const AdamOptions& options) {
  std::vector<Parameter<T>*> ptrs;
  std::vector<std::vector<T>> grads;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<T>& p = params[i];
    if (!p.trainable) continue;
    ptrs.push_back(&p);
    if (p.tensor.has_grad()) {
      grads.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
    } else {
      grads.emplace_back(p.tensor.numel(), T(0));
    }
  }
  adam_step<T>(ptrs, grads, lr, options);
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template std::vector<float> he_uniform<float>(std::size_t, std::size_t, std::mt19937_64&);
template std::vector<double> he_uniform<double>(std::size_t, std::size_t, std::mt19937_64&);
template void adam_step<float>(std::span<Parameter<float>* const>,
                               std::span<const std::vector<float>>, double,
                               const AdamOptions&);
template void adam_step<double>(std::span<Parameter<double>* const>,
                                std::span<const std::vector<double>>, double,
                                const AdamOptions&);
template void adam_step<float>(ParameterSet<float>&, double, const AdamOptions&);
template void adam_step<double>(ParameterSet<double>&, double, const AdamOptions&);

}  // namespace synctrack::nn
