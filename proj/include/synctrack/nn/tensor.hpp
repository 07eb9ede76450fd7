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

// Reverse-mode differentiation over a recorded graph. A Tensor is a cheap
// handle to a node holding values, an optional gradient buffer, the parent
// nodes it was computed from, and the vector-Jacobian product that pushes its
// gradient into those parents.

#ifndef SYNCTRACK_NN_TENSOR_HPP_
#define SYNCTRACK_NN_TENSOR_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace synctrack::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents' grads.
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() = default;

  // Leaf tensor. Throws std::invalid_argument on size/shape mismatch or a
  // zero dimension.
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const T> values() const { return node_->value; }
  // Mutating values of an interior node invalidates its recorded VJP; only
  // leaves should be written (optimizer updates, finite differences).
  std::span<T> mutable_values() { return node_->value; }
  const T& operator[](std::size_t i) const { return node_->value[i]; }
  T item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  void zero_grad();

  // Runs the reverse pass from this scalar. Gradients accumulate into every
  // reachable node that requires them. The order of VJP calls is a fixed
  // function of graph construction order, so repeated runs are bit-identical.
  void backward() const;

  // Same values, no history.
  Tensor detach() const;

  const std::shared_ptr<Node<T>>& node() const { return node_; }

  // Builds an interior node. `vjp` is dropped when no parent needs a
  // gradient.
  static Tensor from_op(Shape shape, std::vector<T> values,
                        std::vector<Tensor> parents,
                        std::function<void(Node<T>&)> vjp);

 private:
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  std::shared_ptr<Node<T>> node_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace synctrack::nn

#endif  // SYNCTRACK_NN_TENSOR_HPP_
