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

#include "synctrack/nn/gradcheck_suite.hpp"

#include <cstdint>
#include <functional>

#include "synctrack/nn/ops.hpp"

namespace synctrack::nn {

using Td = Tensor<double>;
using Inputs = std::vector<Td>;

Td random_tensor(const Shape& shape, std::mt19937_64& rng, double lo, double hi,
                 bool requires_grad) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = u(rng);
  return Td(shape, std::move(v), requires_grad);
}

Td random_projection(const Td& x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Td w = random_tensor(x.shape(), rng, -1.0, 1.0, false);
  return sum(mul(x, w));
}

namespace {

// Values bounded away from zero, for kinked primitives.
Td away_from_zero(const Shape& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.1, 1.5);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = sign(rng) ? mag(rng) : -mag(rng);
  return Td(shape, std::move(v), true);
}

struct Case {
  std::string name;
  Inputs inputs;
  std::function<Td(const Inputs&)> fn;
};

std::vector<Case> build_cases(std::mt19937_64& rng) {
  std::vector<Case> cases;
  auto r = [&](const Shape& s, double lo = -1.0, double hi = 1.0) {
    return random_tensor(s, rng, lo, hi);
  };
  const std::uint64_t w = rng();

  cases.push_back({"matmul", {r({3, 4}), r({4, 2})},
                   [w](const Inputs& in) { return random_projection(matmul(in[0], in[1]), w); }});
  cases.push_back({"transpose", {r({3, 5})},
                   [w](const Inputs& in) { return random_projection(transpose(in[0]), w); }});
  cases.push_back({"add", {r({2, 3}), r({2, 3})},
                   [w](const Inputs& in) { return random_projection(add(in[0], in[1]), w); }});
  cases.push_back({"sub", {r({2, 3}), r({2, 3})},
                   [w](const Inputs& in) { return random_projection(sub(in[0], in[1]), w); }});
  cases.push_back({"mul", {r({2, 3}), r({2, 3})},
                   [w](const Inputs& in) { return random_projection(mul(in[0], in[1]), w); }});
  cases.push_back({"scale", {r({4})},
                   [w](const Inputs& in) { return random_projection(scale(in[0], -1.7), w); }});
  cases.push_back({"add_scalar", {r({4})},
                   [w](const Inputs& in) { return random_projection(add_scalar(in[0], 0.3), w); }});
  cases.push_back({"add_bias", {r({3, 4}), r({4})},
                   [w](const Inputs& in) { return random_projection(add_bias(in[0], in[1]), w); }});
  cases.push_back({"concat_axis0", {r({2, 3}), r({1, 3})}, [w](const Inputs& in) {
                     return random_projection(concat<double>(in, 0), w);
                   }});
  cases.push_back({"concat_axis1", {r({2, 2, 3}), r({2, 1, 3}), r({2, 4, 3})},
                   [w](const Inputs& in) { return random_projection(concat<double>(in, 1), w); }});
  cases.push_back({"slice", {r({3, 5, 2})},
                   [w](const Inputs& in) { return random_projection(slice(in[0], 1, 1, 4), w); }});
  cases.push_back({"reshape", {r({2, 6})}, [w](const Inputs& in) {
                     return random_projection(reshape(in[0], {3, 4}), w);
                   }});
  cases.push_back({"gather_rows", {r({4, 3})}, [w](const Inputs& in) {
                     const std::vector<std::size_t> idx{2, 0, 2, 3};
                     return random_projection(gather_rows(in[0], idx), w);
                   }});
  cases.push_back({"weighted_rows", {r({4, 3})}, [w](const Inputs& in) {
                     const std::vector<std::size_t> idx{0, 1, 3, 2, 2, 1};
                     const std::vector<double> wt{0.2, 0.5, 0.3, 0.6, 0.1, 0.3};
                     return random_projection(weighted_rows<double>(in[0], idx, wt, 3), w);
                   }});
  cases.push_back({"scatter_mean", {r({5, 2})}, [w](const Inputs& in) {
                     const std::vector<std::int64_t> cell{0, 2, -1, 2, 3};
                     return random_projection(scatter_mean<double>(in[0], cell, 4), w);
                   }});
  cases.push_back({"softmax_rows", {r({2, 5}, -2.0, 2.0)},
                   [w](const Inputs& in) { return random_projection(softmax_rows(in[0]), w); }});
  cases.push_back({"relu", {away_from_zero({3, 4}, rng)},
                   [w](const Inputs& in) { return random_projection(relu(in[0]), w); }});
  cases.push_back({"sigmoid", {r({3, 4}, -3.0, 3.0)},
                   [w](const Inputs& in) { return random_projection(sigmoid(in[0]), w); }});
  cases.push_back({"abs", {away_from_zero({3, 4}, rng)},
                   [w](const Inputs& in) { return random_projection(abs(in[0]), w); }});
  cases.push_back({"log", {r({3, 4}, 0.2, 2.0)},
                   [w](const Inputs& in) { return random_projection(log(in[0]), w); }});
  cases.push_back({"pow", {r({3, 4}, 0.2, 2.0)}, [w](const Inputs& in) {
                     return add(random_projection(pow(in[0], 2.0), w),
                                random_projection(pow(in[0], 4.0), w + 1));
                   }});
  cases.push_back({"clamp", {away_from_zero({3, 4}, rng)}, [w](const Inputs& in) {
                     // Negative entries clamp at -0.05; the upper bound cuts the positives.
                     return random_projection(clamp(in[0], -0.05, 0.8), w);
                   }});
  cases.push_back({"linear", {r({3, 4}), r({4, 5}), r({5})}, [w](const Inputs& in) {
                     return random_projection(linear(in[0], in[1], in[2]), w);
                   }});
  cases.push_back({"layer_norm", {r({3, 6}, -2.0, 2.0), r({6}, 0.5, 1.5), r({6})},
                   [w](const Inputs& in) {
                     return random_projection(layer_norm(in[0], in[1], in[2]), w);
                   }});
  cases.push_back({"batch_norm_train", {r({2, 3, 4}, -2.0, 2.0), r({3}, 0.5, 1.5), r({3})},
                   [w](const Inputs& in) {
                     std::vector<double> rm(3, 0.0), rv(3, 1.0);
                     return random_projection(
                         batch_norm<double>(in[0], in[1], in[2], {rm, rv}, true), w);
                   }});
  cases.push_back({"batch_norm_eval", {r({2, 3, 4}, -2.0, 2.0), r({3}, 0.5, 1.5), r({3})},
                   [w](const Inputs& in) {
                     std::vector<double> rm{0.1, -0.2, 0.3}, rv{0.5, 1.5, 2.0};
                     return random_projection(
                         batch_norm<double>(in[0], in[1], in[2], {rm, rv}, false), w);
                   }});
  cases.push_back({"conv3d", {r({2, 2, 4, 3, 5}), r({3, 2, 3, 3, 3}), r({3})},
                   [w](const Inputs& in) {
                     return random_projection(conv3d(in[0], in[1], in[2], {2, 1, 1}), w);
                   }});
  cases.push_back({"conv3d_stride_xy", {r({1, 2, 3, 5, 4}), r({2, 2, 3, 3, 3}), Td()},
                   [w](const Inputs& in) {
                     return random_projection(conv3d(in[0], in[1], in[2], {1, 2, 2}), w);
                   }});
  cases.push_back({"conv2d", {r({2, 2, 5, 6}), r({3, 2, 3, 3}), r({3})},
                   [w](const Inputs& in) {
                     return random_projection(conv2d(in[0], in[1], in[2], {2, 1}), w);
                   }});
  cases.push_back({"conv2d_stride_x", {r({1, 3, 4, 7}), r({2, 3, 3, 3}), r({2})},
                   [w](const Inputs& in) {
                     return random_projection(conv2d(in[0], in[1], in[2], {1, 2}), w);
                   }});
  cases.push_back({"conv_transpose2d", {r({2, 2, 3, 4}), r({2, 3, 3, 3}), r({3})},
                   [w](const Inputs& in) {
                     return random_projection(conv_transpose2d(in[0], in[1], in[2]), w);
                   }});
  cases.push_back({"max_reduce", {r({3, 4, 2})}, [w](const Inputs& in) {
                     return add(random_projection(max_reduce(in[0], 1), w),
                                random_projection(max_reduce(in[0], 0), w + 1));
                   }});
  cases.push_back({"sum", {r({3, 2})}, [](const Inputs& in) { return sum(in[0]); }});
  cases.push_back({"mean", {r({3, 2})},
                   [](const Inputs& in) { return scale(mean(in[0]), 3.0); }});
  return cases;
}

}  // namespace

std::vector<NamedCheck> primitive_gradchecks(std::uint64_t seed, double tolerance) {
  std::mt19937_64 rng(seed);
  std::vector<NamedCheck> out;
  for (Case& c : build_cases(rng)) {
    // An undefined input (omitted bias) is passed through unchecked.
    NamedCheck check;
    check.name = c.name;
    check.result = finite_diff_gradcheck(c.fn, c.inputs, 1e-5);
    check.passed = check.result.max_rel_error < tolerance;
    out.push_back(std::move(check));
  }
  return out;
}

}  // namespace synctrack::nn
