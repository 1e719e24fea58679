// Copyright 2026 The HR-Align Lab Authors
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

// Dense float64 tensors with a dynamic reverse-mode autograd graph.
//
// A Tensor is a cheap handle to a shared node. Operations build a fresh node
// whose backward closure holds its inputs; the graph is rebuilt on every
// forward pass and discarded with the last handle. Leaves created with
// requires_grad=true accumulate gradients across backward() calls until
// zero_grad().

#ifndef HRALIGN_TENSOR_H_
#define HRALIGN_TENSOR_H_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hralign/rng.h"

namespace hralign {

using Shape = std::vector<size_t>;

size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient is written
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Propagates this node's grad into its parents' grads.
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad();
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor randn(Shape shape, RngState& rng, double stddev,
                      bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  size_t rank() const { return shape().size(); }
  size_t dim(size_t axis) const;
  size_t size() const;

  std::span<const double> data() const;
  // Direct write access; reserved for initialization and optimizer steps.
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // Seeds d(sum of this)/d(this) = 1 and propagates through the graph.
  void backward() const;

  // New leaf with copied values, no gradient tracking.
  Tensor detach() const;
  // New leaf with copied values and the same requires_grad flag.
  Tensor clone() const;

  const detail::Node* node() const { return node_.get(); }

 private:
  friend Tensor make_result(Shape, std::vector<double>,
                            std::vector<Tensor> inputs,
                            std::function<void(detail::Node&)> backward);
  friend const std::shared_ptr<detail::Node>& node_of(const Tensor&);
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node> node_;
};

// Elementwise; operands must have identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// Adds a rank-1 `bias` along `axis` of `x`.
Tensor add_bias(const Tensor& x, const Tensor& bias, size_t axis);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);

// Full reductions to a scalar of shape {1}.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Reduces one axis.
Tensor sum(const Tensor& x, size_t axis);
Tensor logsumexp(const Tensor& x, size_t axis);

Tensor softmax(const Tensor& x, size_t axis);
Tensor l2_normalize(const Tensor& x, size_t axis, double eps = 1e-12);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<size_t>& axes);
Tensor concat(const Tensor& a, const Tensor& b, size_t axis);
// Stacks equal-shaped tensors along a new leading axis.
Tensor stack(std::span<const Tensor> parts);
// Rows of x (along axis 0) at the given indices; repeats allowed.
Tensor index_select(const Tensor& x, std::span<const size_t> indices);
// Diagonal of a square matrix.
Tensor diagonal(const Tensor& x);
// out[i] = x[i, cols[i]] for a matrix x.
Tensor pick(const Tensor& x, std::span<const size_t> cols);

// Cross-correlation. `input` is C×H×W or N×C×H×W, `kernels` is O×C×k×k,
// optional `bias` has O entries. Output spatial size is
// floor((H + 2·padding − k) / stride) + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernels, int stride, int padding);
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              int stride, int padding);

// mean over rows of (logsumexp(logits_i) − logits_i[label_i]).
Tensor cross_entropy(const Tensor& logits, std::span<const size_t> labels);

}  // namespace hralign

#endif  // HRALIGN_TENSOR_H_
