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

#include "synctrack/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "conv_kernels.hpp"

namespace synctrack::nn {
namespace {

[[noreturn]] void fail(const std::string& op, const std::string& what) {
  throw std::invalid_argument(op + ": " + what);
}

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    fail(op, "shape mismatch " + shape_string(a.shape()) + " vs " +
                 shape_string(b.shape()));
  }
}

template <typename T>
void require_rank(const char* op, const Tensor<T>& a, std::size_t rank) {
  if (a.rank() != rank) {
    fail(op, "expected rank " + std::to_string(rank) + ", got " +
                 shape_string(a.shape()));
  }
}

template <typename T>
Node<T>& parent(Node<T>& self, std::size_t i) {
  return *self.parents[i];
}

// Elementwise unary op with derivative expressed through (x, y).
template <typename T, typename F, typename D>
Tensor<T> unary(const Tensor<T>& x, F f, D dfdx) {
  std::vector<T> out(x.numel());
  auto in = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return Tensor<T>::from_op(x.shape(), std::move(out), {x},
                            [dfdx](Node<T>& self) {
                              Node<T>& p = parent(self, 0);
                              for (std::size_t i = 0; i < self.value.size(); ++i) {
                                p.grad[i] += self.grad[i] * dfdx(p.value[i], self.value[i]);
                              }
                            });
}

// Splits a shape around `axis` into (outer, length, inner).
struct AxisView {
  std::size_t outer = 1;
  std::size_t length = 1;
  std::size_t inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  if (b.dim(0) != k) {
    fail("matmul", "inner dimensions " + shape_string(a.shape()) + " x " +
                       shape_string(b.shape()));
  }
  std::vector<T> out(n * m, T(0));
  const T* av = a.values().data();
  const T* bv = b.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    T* row = out.data() + i * m;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T s = av[i * k + kk];
      const T* brow = bv + kk * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += s * brow[j];
    }
  }
  return Tensor<T>::from_op({n, m}, std::move(out), {a, b},
                            [n, k, m](Node<T>& self) {
    Node<T>& pa = parent(self, 0);
    Node<T>& pb = parent(self, 1);
    const T* g = self.grad.data();
    if (pa.requires_grad) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
          const T* brow = pb.value.data() + kk * m;
          const T* grow = g + i * m;
          T acc = T(0);
          for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
          pa.grad[i * k + kk] += acc;
        }
      }
    }
    if (pb.requires_grad) {
      for (std::size_t i = 0; i < n; ++i) {
        const T* grow = g + i * m;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const T s = pa.value[i * k + kk];
          T* dst = pb.grad.data() + kk * m;
          for (std::size_t j = 0; j < m; ++j) dst[j] += s * grow[j];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_rank("transpose", a, 2);
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<T> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  return Tensor<T>::from_op({c, r}, std::move(out), {a}, [r, c](Node<T>& self) {
    Node<T>& p = parent(self, 0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) p.grad[i * c + j] += self.grad[j * r + i];
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor<T>::from_op(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a, b);
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor<T>::from_op(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    Node<T>& pa = parent(self, 0);
    Node<T>& pb = parent(self, 1);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (pa.requires_grad) pa.grad[i] += self.grad[i];
      if (pb.requires_grad) pb.grad[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor<T>::from_op(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    Node<T>& pa = parent(self, 0);
    Node<T>& pb = parent(self, 1);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (pa.requires_grad) pa.grad[i] += self.grad[i] * pb.value[i];
      if (pb.requires_grad) pb.grad[i] += self.grad[i] * pa.value[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary(a, [factor](T x) { return factor * x; },
               [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T value) {
  return unary(a, [value](T x) { return x + value; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  require_rank("add_bias", bias, 1);
  const std::size_t c = bias.dim(0);
  if (x.shape().back() != c) {
    fail("add_bias", "bias " + shape_string(bias.shape()) + " vs input " +
                         shape_string(x.shape()));
  }
  std::vector<T> out(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bias[i % c];
  return Tensor<T>::from_op(x.shape(), std::move(out), {x, bias}, [c](Node<T>& self) {
    Node<T>& px = parent(self, 0);
    Node<T>& pb = parent(self, 1);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (px.requires_grad) px.grad[i] += self.grad[i];
      if (pb.requires_grad) pb.grad[i % c] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> parts, std::size_t axis) {
  if (parts.empty()) fail("concat", "no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) fail("concat", "axis out of range");
  Shape shape = first;
  shape[axis] = 0;
  for (const Tensor<T>& p : parts) {
    if (p.rank() != first.size()) fail("concat", "rank mismatch");
    for (std::size_t d = 0; d < first.size(); ++d) {
      if (d != axis && p.dim(d) != first[d]) {
        fail("concat", "shape mismatch " + shape_string(p.shape()) + " vs " +
                           shape_string(first));
      }
    }
    shape[axis] += p.dim(axis);
  }
  const AxisView out_view = axis_view(shape, axis);
  std::vector<std::size_t> widths;  // contiguous block per outer index
  for (const Tensor<T>& p : parts) widths.push_back(p.dim(axis) * out_view.inner);
  const std::size_t out_block = out_view.length * out_view.inner;

  std::vector<T> out(shape_numel(shape));
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto v = parts[k].values();
    for (std::size_t o = 0; o < out_view.outer; ++o) {
      std::copy_n(v.data() + o * widths[k], widths[k],
                  out.data() + o * out_block + offset);
    }
    offset += widths[k];
  }
  std::vector<Tensor<T>> parents(parts.begin(), parts.end());
  return Tensor<T>::from_op(
      shape, std::move(out), std::move(parents),
      [widths, out_block, outer = out_view.outer](Node<T>& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
          Node<T>& p = parent(self, k);
          if (p.requires_grad) {
            for (std::size_t o = 0; o < outer; ++o) {
              const T* src = self.grad.data() + o * out_block + off;
              T* dst = p.grad.data() + o * widths[k];
              for (std::size_t i = 0; i < widths[k]; ++i) dst[i] += src[i];
            }
          }
          off += widths[k];
        }
      });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin,
                std::size_t end) {
  if (axis >= x.rank() || begin >= end || end > x.dim(axis)) {
    fail("slice", "range [" + std::to_string(begin) + "," + std::to_string(end) +
                      ") on axis " + std::to_string(axis) + " of " +
                      shape_string(x.shape()));
  }
  const AxisView v = axis_view(x.shape(), axis);
  Shape shape = x.shape();
  shape[axis] = end - begin;
  const std::size_t width = (end - begin) * v.inner;
  const std::size_t in_block = v.length * v.inner;
  const std::size_t start = begin * v.inner;
  std::vector<T> out(v.outer * width);
  for (std::size_t o = 0; o < v.outer; ++o) {
    std::copy_n(x.values().data() + o * in_block + start, width,
                out.data() + o * width);
  }
  return Tensor<T>::from_op(shape, std::move(out), {x},
                            [outer = v.outer, width, in_block, start](Node<T>& self) {
    Node<T>& p = parent(self, 0);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < width; ++i) {
        p.grad[o * in_block + start + i] += self.grad[o * width + i];
      }
    }
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    fail("reshape", shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  std::vector<T> out(x.values().begin(), x.values().end());
  return Tensor<T>::from_op(std::move(shape), std::move(out), {x}, [](Node<T>& self) {
    Node<T>& p = parent(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> index) {
  if (index.empty()) fail("gather_rows", "empty index");
  const std::size_t rows = x.dim(0);
  const std::size_t width = x.numel() / rows;
  Shape shape = x.shape();
  shape[0] = index.size();
  std::vector<T> out(index.size() * width);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= rows) {
      fail("gather_rows", "index " + std::to_string(index[r]) +
                              " out of range for " + std::to_string(rows) + " rows");
    }
    std::copy_n(x.values().data() + index[r] * width, width, out.data() + r * width);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return Tensor<T>::from_op(shape, std::move(out), {x},
                            [idx = std::move(idx), width](Node<T>& self) {
    Node<T>& p = parent(self, 0);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const T* src = self.grad.data() + r * width;
      T* dst = p.grad.data() + idx[r] * width;
      for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
    }
  });
}

template <typename T>
Tensor<T> weighted_rows(const Tensor<T>& x, std::span<const std::size_t> index,
                        std::span<const T> weight, std::size_t per_row) {
  require_rank("weighted_rows", x, 2);
  if (per_row == 0 || index.empty() || index.size() % per_row != 0 ||
      weight.size() != index.size()) {
    fail("weighted_rows", "index/weight layout mismatch");
  }
  const std::size_t m = x.dim(0), c = x.dim(1), n = index.size() / per_row;
  std::vector<T> out(n * c, T(0));
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= m) fail("weighted_rows", "index out of range");
    const T* src = x.values().data() + index[r] * c;
    T* dst = out.data() + (r / per_row) * c;
    for (std::size_t i = 0; i < c; ++i) dst[i] += weight[r] * src[i];
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  std::vector<T> w(weight.begin(), weight.end());
  return Tensor<T>::from_op({n, c}, std::move(out), {x},
                            [idx = std::move(idx), w = std::move(w), c,
                             per_row](Node<T>& self) {
    Node<T>& p = parent(self, 0);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const T* src = self.grad.data() + (r / per_row) * c;
      T* dst = p.grad.data() + idx[r] * c;
      for (std::size_t i = 0; i < c; ++i) dst[i] += w[r] * src[i];
    }
  });
}

template <typename T>
Tensor<T> scatter_mean(const Tensor<T>& x, std::span<const std::int64_t> cell,
                       std::size_t cells) {
  require_rank("scatter_mean", x, 2);
  const std::size_t n = x.dim(0), c = x.dim(1);
  if (cell.size() != n) fail("scatter_mean", "one cell id per row required");
  std::vector<std::size_t> count(cells, 0);
  for (std::int64_t id : cell) {
    if (id < -1 || id >= static_cast<std::int64_t>(cells)) {
      fail("scatter_mean", "cell id out of range");
    }
    if (id >= 0) ++count[static_cast<std::size_t>(id)];
  }
  std::vector<T> out(c * cells, T(0));
  for (std::size_t r = 0; r < n; ++r) {
    if (cell[r] < 0) continue;
    const std::size_t id = static_cast<std::size_t>(cell[r]);
    const T inv = T(1) / static_cast<T>(count[id]);
    for (std::size_t ch = 0; ch < c; ++ch) {
      out[ch * cells + id] += inv * x[r * c + ch];
    }
  }
  std::vector<std::int64_t> ids(cell.begin(), cell.end());
  return Tensor<T>::from_op({c, cells}, std::move(out), {x},
                            [ids = std::move(ids), count = std::move(count), c,
                             cells](Node<T>& self) {
    Node<T>& p = parent(self, 0);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (ids[r] < 0) continue;
      const std::size_t id = static_cast<std::size_t>(ids[r]);
      const T inv = T(1) / static_cast<T>(count[id]);
      for (std::size_t ch = 0; ch < c; ++ch) {
        p.grad[r * c + ch] += inv * self.grad[ch * cells + id];
      }
    }
  });
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  require_rank("softmax_rows", x, 2);
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<T> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    const T* in = x.values().data() + i * c;
    T* o = out.data() + i * c;
    const T mx = *std::max_element(in, in + c);
    T total = T(0);
    for (std::size_t j = 0; j < c; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < c; ++j) o[j] /= total;
  }
  return Tensor<T>::from_op(x.shape(), std::move(out), {x}, [r, c](Node<T>& self) {
    Node<T>& p = parent(self, 0);
    for (std::size_t i = 0; i < r; ++i) {
      const T* y = self.value.data() + i * c;
      const T* g = self.grad.data() + i * c;
      T dot = T(0);
      for (std::size_t j = 0; j < c; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < c; ++j) p.grad[i * c + j] += y[j] * (g[j] - dot);
    }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(x, [](T v) { return v > T(0) ? v : T(0); },
               [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
               [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  return unary(x, [](T v) { return std::abs(v); },
               [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  return unary(x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> pow(const Tensor<T>& x, T exponent) {
  return unary(x, [exponent](T v) { return std::pow(v, exponent); },
               [exponent](T v, T) { return exponent * std::pow(v, exponent - T(1)); });
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  return unary(x, [lo, hi](T v) { return std::clamp(v, lo, hi); },
               [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank("linear", x, 2);
  require_rank("linear", weight, 2);
  const std::size_t n = x.dim(0), cin = x.dim(1), cout = weight.dim(1);
  if (weight.dim(0) != cin) {
    fail("linear", "input " + shape_string(x.shape()) + " vs weight " +
                       shape_string(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.shape() != Shape{cout}) {
    fail("linear", "bias " + shape_string(bias.shape()) + " vs weight " +
                       shape_string(weight.shape()));
  }
  std::vector<T> out(n * cout, T(0));
  const T* xv = x.values().data();
  const T* wv = weight.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    T* row = out.data() + i * cout;
    if (has_bias) std::copy_n(bias.values().data(), cout, row);
    for (std::size_t k = 0; k < cin; ++k) {
      const T s = xv[i * cin + k];
      const T* wrow = wv + k * cout;
      for (std::size_t j = 0; j < cout; ++j) row[j] += s * wrow[j];
    }
  }
  std::vector<Tensor<T>> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return Tensor<T>::from_op({n, cout}, std::move(out), std::move(parents),
                            [n, cin, cout, has_bias](Node<T>& self) {
    Node<T>& px = parent(self, 0);
    Node<T>& pw = parent(self, 1);
    const T* g = self.grad.data();
    if (px.requires_grad) {
      for (std::size_t i = 0; i < n; ++i) {
        const T* grow = g + i * cout;
        for (std::size_t k = 0; k < cin; ++k) {
          const T* wrow = pw.value.data() + k * cout;
          T acc = T(0);
          for (std::size_t j = 0; j < cout; ++j) acc += grow[j] * wrow[j];
          px.grad[i * cin + k] += acc;
        }
      }
    }
    if (pw.requires_grad) {
      for (std::size_t i = 0; i < n; ++i) {
        const T* grow = g + i * cout;
        for (std::size_t k = 0; k < cin; ++k) {
          const T s = px.value[i * cin + k];
          T* dst = pw.grad.data() + k * cout;
          for (std::size_t j = 0; j < cout; ++j) dst[j] += s * grow[j];
        }
      }
    }
    if (has_bias) {
      Node<T>& pb = parent(self, 2);
      if (pb.requires_grad) {
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < cout; ++j) pb.grad[j] += g[i * cout + j];
      }
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps) {
  require_rank("layer_norm", x, 2);
  const std::size_t n = x.dim(0), c = x.dim(1);
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
    fail("layer_norm", "affine parameters must have shape [" + std::to_string(c) + "]");
  }
  std::vector<T> out(n * c);
  std::vector<T> xhat(n * c);
  std::vector<T> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = x.values().data() + i * c;
    T mu = T(0);
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<T>(c);
    T var = T(0);
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(c);
    inv_std[i] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (row[j] - mu) * inv_std[i];
      out[i * c + j] = gamma[j] * xhat[i * c + j] + beta[j];
    }
  }
  return Tensor<T>::from_op(x.shape(), std::move(out), {x, gamma, beta},
                            [n, c, xhat = std::move(xhat),
                             inv_std = std::move(inv_std)](Node<T>& self) {
    Node<T>& px = parent(self, 0);
    Node<T>& pg = parent(self, 1);
    Node<T>& pb = parent(self, 2);
    const T inv_c = T(1) / static_cast<T>(c);
    for (std::size_t i = 0; i < n; ++i) {
      const T* g = self.grad.data() + i * c;
      const T* xh = xhat.data() + i * c;
      if (pg.requires_grad)
        for (std::size_t j = 0; j < c; ++j) pg.grad[j] += g[j] * xh[j];
      if (pb.requires_grad)
        for (std::size_t j = 0; j < c; ++j) pb.grad[j] += g[j];
      if (px.requires_grad) {
        T sum_d = T(0), sum_dx = T(0);
        for (std::size_t j = 0; j < c; ++j) {
          const T d = g[j] * pg.value[j];
          sum_d += d;
          sum_dx += d * xh[j];
        }
        for (std::size_t j = 0; j < c; ++j) {
          const T d = g[j] * pg.value[j];
          px.grad[i * c + j] += inv_std[i] * (d - inv_c * sum_d - xh[j] * inv_c * sum_dx);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, BatchNormStats<T> stats,
                     bool training, T momentum, T eps) {
  if (x.rank() < 2) fail("batch_norm", "expected [B, C, ...]");
  const std::size_t b = x.dim(0), c = x.dim(1);
  const std::size_t spatial = x.numel() / (b * c);
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c} ||
      stats.running_mean.size() != c || stats.running_var.size() != c) {
    fail("batch_norm", "per-channel parameters must have " + std::to_string(c) +
                           " entries");
  }
  const std::size_t count = b * spatial;
  std::vector<T> mu(c), inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    if (training) {
      T m = T(0);
      for (std::size_t bi = 0; bi < b; ++bi) {
        const T* p = x.values().data() + (bi * c + ch) * spatial;
        for (std::size_t s = 0; s < spatial; ++s) m += p[s];
      }
      m /= static_cast<T>(count);
      T v = T(0);
      for (std::size_t bi = 0; bi < b; ++bi) {
        const T* p = x.values().data() + (bi * c + ch) * spatial;
        for (std::size_t s = 0; s < spatial; ++s) v += (p[s] - m) * (p[s] - m);
      }
      v /= static_cast<T>(count);
      mu[ch] = m;
      inv_std[ch] = T(1) / std::sqrt(v + eps);
      const T unbiased = count > 1 ? v * static_cast<T>(count) / static_cast<T>(count - 1) : v;
      stats.running_mean[ch] = (T(1) - momentum) * stats.running_mean[ch] + momentum * m;
      stats.running_var[ch] = (T(1) - momentum) * stats.running_var[ch] + momentum * unbiased;
    } else {
      mu[ch] = stats.running_mean[ch];
      inv_std[ch] = T(1) / std::sqrt(stats.running_var[ch] + eps);
    }
  }
  std::vector<T> out(x.numel());
  std::vector<T> xhat(x.numel());
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (bi * c + ch) * spatial;
      for (std::size_t s = 0; s < spatial; ++s) {
        xhat[base + s] = (x[base + s] - mu[ch]) * inv_std[ch];
        out[base + s] = gamma[ch] * xhat[base + s] + beta[ch];
      }
    }
  }
  return Tensor<T>::from_op(
      x.shape(), std::move(out), {x, gamma, beta},
      [b, c, spatial, count, training, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Node<T>& self) {
        Node<T>& px = parent(self, 0);
        Node<T>& pg = parent(self, 1);
        Node<T>& pb = parent(self, 2);
        for (std::size_t ch = 0; ch < c; ++ch) {
          T sum_g = T(0), sum_gx = T(0);
          for (std::size_t bi = 0; bi < b; ++bi) {
            const std::size_t base = (bi * c + ch) * spatial;
            for (std::size_t s = 0; s < spatial; ++s) {
              sum_g += self.grad[base + s];
              sum_gx += self.grad[base + s] * xhat[base + s];
            }
          }
          if (pg.requires_grad) pg.grad[ch] += sum_gx;
          if (pb.requires_grad) pb.grad[ch] += sum_g;
          if (!px.requires_grad) continue;
          const T gam = pg.value[ch];
          const T inv_n = T(1) / static_cast<T>(count);
          for (std::size_t bi = 0; bi < b; ++bi) {
            const std::size_t base = (bi * c + ch) * spatial;
            for (std::size_t s = 0; s < spatial; ++s) {
              T d = self.grad[base + s];
              if (training) d -= inv_n * (sum_g + xhat[base + s] * sum_gx);
              px.grad[base + s] += gam * inv_std[ch] * d;
            }
          }
        }
      });
}

namespace {

template <typename T>
Tensor<T> conv_impl(const char* op, const Tensor<T>& x, const Tensor<T>& weight,
                    const Tensor<T>& bias, detail::ConvGeometry geo,
                    std::size_t batch, std::size_t cin, std::size_t cout,
                    Shape out_shape) {
  const bool has_bias = bias.defined();
  if (has_bias && bias.shape() != Shape{cout}) {
    fail(op, "bias must have shape [" + std::to_string(cout) + "]");
  }
  const std::size_t in_plane = geo.in_size();
  const std::size_t out_plane = geo.out_size();
  std::vector<T> out(batch * cout * out_plane, T(0));
  for (std::size_t bi = 0; bi < batch; ++bi) {
    T* o = out.data() + bi * cout * out_plane;
    if (has_bias) {
      for (std::size_t co = 0; co < cout; ++co)
        std::fill_n(o + co * out_plane, out_plane, bias[co]);
    }
    detail::conv_forward(geo, cin, cout, x.values().data() + bi * cin * in_plane,
                         weight.values().data(), o);
  }
  std::vector<Tensor<T>> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return Tensor<T>::from_op(std::move(out_shape), std::move(out), std::move(parents),
                            [geo, batch, cin, cout, has_bias](Node<T>& self) {
    Node<T>& px = parent(self, 0);
    Node<T>& pw = parent(self, 1);
    const std::size_t in_plane = geo.in_size();
    const std::size_t out_plane = geo.out_size();
    for (std::size_t bi = 0; bi < batch; ++bi) {
      const T* g = self.grad.data() + bi * cout * out_plane;
      if (px.requires_grad) {
        detail::conv_backward_input(geo, cin, cout, g, pw.value.data(),
                                    px.grad.data() + bi * cin * in_plane);
      }
      if (pw.requires_grad) {
        detail::conv_backward_weight(geo, cin, cout, g,
                                     px.value.data() + bi * cin * in_plane,
                                     pw.grad.data());
      }
    }
    if (has_bias) {
      Node<T>& pb = parent(self, 2);
      if (pb.requires_grad) {
        for (std::size_t bi = 0; bi < batch; ++bi)
          for (std::size_t co = 0; co < cout; ++co) {
            const T* g = self.grad.data() + (bi * cout + co) * out_plane;
            T acc = T(0);
            for (std::size_t s = 0; s < out_plane; ++s) acc += g[s];
            pb.grad[co] += acc;
          }
      }
    }
  });
}

std::size_t conv_out(std::size_t len, std::size_t stride) {
  return (len + 2 - 3) / stride + 1;
}

}  // namespace

template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::array<std::size_t, 3> stride) {
  require_rank("conv3d", x, 5);
  require_rank("conv3d", weight, 5);
  const std::size_t batch = x.dim(0), cin = x.dim(1), cout = weight.dim(0);
  if (weight.dim(1) != cin || weight.dim(2) != 3 || weight.dim(3) != 3 ||
      weight.dim(4) != 3) {
    fail("conv3d", "weight " + shape_string(weight.shape()) + " vs input " +
                       shape_string(x.shape()));
  }
  for (std::size_t s : stride)
    if (s == 0) fail("conv3d", "stride must be >= 1");
  detail::ConvGeometry geo;
  geo.in = {x.dim(2), x.dim(3), x.dim(4)};
  geo.kernel = {3, 3, 3};
  geo.pad = {1, 1, 1};
  geo.stride = stride;
  for (int a = 0; a < 3; ++a) geo.out[a] = conv_out(geo.in[a], stride[a]);
  return conv_impl("conv3d", x, weight, bias, geo, batch, cin, cout,
                   {batch, cout, geo.out[0], geo.out[1], geo.out[2]});
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::array<std::size_t, 2> stride) {
  require_rank("conv2d", x, 4);
  require_rank("conv2d", weight, 4);
  const std::size_t batch = x.dim(0), cin = x.dim(1), cout = weight.dim(0);
  if (weight.dim(1) != cin || weight.dim(2) != 3 || weight.dim(3) != 3) {
    fail("conv2d", "weight " + shape_string(weight.shape()) + " vs input " +
                       shape_string(x.shape()));
  }
  if (stride[0] == 0 || stride[1] == 0) fail("conv2d", "stride must be >= 1");
  detail::ConvGeometry geo;
  geo.in = {1, x.dim(2), x.dim(3)};
  geo.kernel = {1, 3, 3};
  geo.pad = {0, 1, 1};
  geo.stride = {1, stride[0], stride[1]};
  geo.out = {1, conv_out(geo.in[1], stride[0]), conv_out(geo.in[2], stride[1])};
  return conv_impl("conv2d", x, weight, bias, geo, batch, cin, cout,
                   {batch, cout, geo.out[1], geo.out[2]});
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& weight,
                           const Tensor<T>& bias) {
  require_rank("conv_transpose2d", x, 4);
  require_rank("conv_transpose2d", weight, 4);
  const std::size_t batch = x.dim(0), cin = x.dim(1), cout = weight.dim(1);
  if (weight.dim(0) != cin || weight.dim(2) != 3 || weight.dim(3) != 3) {
    fail("conv_transpose2d", "weight " + shape_string(weight.shape()) +
                                 " vs input " + shape_string(x.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.shape() != Shape{cout}) {
    fail("conv_transpose2d", "bias must have shape [" + std::to_string(cout) + "]");
  }
  // A stride-2 convolution over the [2H, 2W] output maps back onto [H, W];
  // the transposed convolution is its input-gradient.
  detail::ConvGeometry geo;
  geo.in = {1, 2 * x.dim(2), 2 * x.dim(3)};
  geo.kernel = {1, 3, 3};
  geo.pad = {0, 1, 1};
  geo.stride = {1, 2, 2};
  geo.out = {1, x.dim(2), x.dim(3)};
  const std::size_t small = geo.out_size();
  const std::size_t big = geo.in_size();
  std::vector<T> out(batch * cout * big, T(0));
  for (std::size_t bi = 0; bi < batch; ++bi) {
    T* o = out.data() + bi * cout * big;
    if (has_bias) {
      for (std::size_t co = 0; co < cout; ++co) std::fill_n(o + co * big, big, bias[co]);
    }
    // Conv view: "output channels" = cin, "input channels" = cout.
    detail::conv_backward_input(geo, cout, cin, x.values().data() + bi * cin * small,
                                weight.values().data(), o);
  }
  std::vector<Tensor<T>> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return Tensor<T>::from_op({batch, cout, geo.in[1], geo.in[2]}, std::move(out),
                            std::move(parents),
                            [geo, batch, cin, cout, has_bias](Node<T>& self) {
    Node<T>& px = parent(self, 0);
    Node<T>& pw = parent(self, 1);
    const std::size_t small = geo.out_size();
    const std::size_t big = geo.in_size();
    for (std::size_t bi = 0; bi < batch; ++bi) {
      const T* g = self.grad.data() + bi * cout * big;
      if (px.requires_grad) {
        detail::conv_forward(geo, cout, cin, g, pw.value.data(),
                             px.grad.data() + bi * cin * small);
      }
      if (pw.requires_grad) {
        detail::conv_backward_weight(geo, cout, cin,
                                     px.value.data() + bi * cin * small, g,
                                     pw.grad.data());
      }
    }
    if (has_bias) {
      Node<T>& pb = parent(self, 2);
      if (pb.requires_grad) {
        for (std::size_t bi = 0; bi < batch; ++bi)
          for (std::size_t co = 0; co < cout; ++co) {
            const T* g = self.grad.data() + (bi * cout + co) * big;
            T acc = T(0);
            for (std::size_t s = 0; s < big; ++s) acc += g[s];
            pb.grad[co] += acc;
          }
      }
    }
  });
}

template <typename T>
Tensor<T> max_reduce(const Tensor<T>& x, std::size_t axis) {
  if (axis >= x.rank()) fail("max_reduce", "axis out of range");
  const AxisView v = axis_view(x.shape(), axis);
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (shape.empty()) shape = {1};
  std::vector<T> out(v.outer * v.inner);
  std::vector<std::size_t> arg(v.outer * v.inner);
  for (std::size_t o = 0; o < v.outer; ++o) {
    const T* base = x.values().data() + o * v.length * v.inner;
    for (std::size_t i = 0; i < v.inner; ++i) {
      std::size_t best = 0;
      T best_v = base[i];
      for (std::size_t l = 1; l < v.length; ++l) {
        const T val = base[l * v.inner + i];
        if (val > best_v) {
          best_v = val;
          best = l;
        }
      }
      out[o * v.inner + i] = best_v;
      arg[o * v.inner + i] = (o * v.length + best) * v.inner + i;
    }
  }
  return Tensor<T>::from_op(shape, std::move(out), {x},
                            [arg = std::move(arg)](Node<T>& self) {
    Node<T>& p = parent(self, 0);
    for (std::size_t i = 0; i < arg.size(); ++i) p.grad[arg[i]] += self.grad[i];
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = T(0);
  for (T v : x.values()) total += v;
  return Tensor<T>::from_op({1}, {total}, {x}, [](Node<T>& self) {
    Node<T>& p = parent(self, 0);
    const T g = self.grad[0];
    for (T& v : p.grad) v += g;
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

#define SYNCTRACK_INSTANTIATE_OPS(T)                                                \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> transpose(const Tensor<T>&);                                   \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> scale(const Tensor<T>&, T);                                    \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                               \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> concat(std::span<const Tensor<T>>, std::size_t);               \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t); \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                              \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::size_t>);   \
  template Tensor<T> weighted_rows(const Tensor<T>&, std::span<const std::size_t>,  \
                                   std::span<const T>, std::size_t);                \
  template Tensor<T> scatter_mean(const Tensor<T>&, std::span<const std::int64_t>,  \
                                  std::size_t);                                     \
  template Tensor<T> softmax_rows(const Tensor<T>&);                                \
  template Tensor<T> relu(const Tensor<T>&);                                        \
  template Tensor<T> sigmoid(const Tensor<T>&);                                     \
  template Tensor<T> abs(const Tensor<T>&);                                         \
  template Tensor<T> log(const Tensor<T>&);                                         \
  template Tensor<T> pow(const Tensor<T>&, T);                                      \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                                 \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);  \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&,                 \
                                const Tensor<T>&, T);                               \
  template Tensor<T> batch_norm(const Tensor<T>&, const Tensor<T>&,                 \
                                const Tensor<T>&, BatchNormStats<T>, bool, T, T);   \
  template Tensor<T> conv3d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                            std::array<std::size_t, 3>);                            \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                            std::array<std::size_t, 2>);                            \
  template Tensor<T> conv_transpose2d(const Tensor<T>&, const Tensor<T>&,           \
                                      const Tensor<T>&);                            \
  template Tensor<T> max_reduce(const Tensor<T>&, std::size_t);                     \
  template Tensor<T> sum(const Tensor<T>&);                                         \
  template Tensor<T> mean(const Tensor<T>&);

SYNCTRACK_INSTANTIATE_OPS(float)
SYNCTRACK_INSTANTIATE_OPS(double)

#undef SYNCTRACK_INSTANTIATE_OPS

}  // namespace synctrack::nn
