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

#include "hralign/tensor.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "hralign/errors.h"

namespace hralign {

using detail::Node;

size_t numel(const Shape& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<double>& Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

const std::shared_ptr<Node>& node_of(const Tensor& t) {
  if (!t.node_) throw ArgumentError("operation on an undefined tensor");
  return t.node_;
}

Tensor make_result(Shape shape, std::vector<double> values,
                   std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  bool needs = false;
  for (const Tensor& in : inputs) needs = needs || node_of(in)->requires_grad;
  if (needs) {
    node->requires_grad = true;
    for (const Tensor& in : inputs) node->parents.push_back(node_of(in));
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  for (size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (numel(shape) != values.size()) {
    throw DimensionError("tensor of shape " + shape_str(shape) + " needs " +
                         std::to_string(numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  node_ = std::make_shared<Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const size_t n = numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value) {
  const size_t n = numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::randn(Shape shape, RngState& rng, double stddev, bool requires_grad) {
  std::vector<double> v(numel(shape));
  for (double& x : v) x = stddev * rng.normal();
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

const Shape& Tensor::shape() const { return node_of(*this)->shape; }

size_t Tensor::dim(size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

size_t Tensor::size() const { return node_of(*this)->value.size(); }

std::span<const double> Tensor::data() const { return node_of(*this)->value; }

std::span<double> Tensor::mutable_data() { return node_of(*this)->value; }

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return data()[0];
}

bool Tensor::requires_grad() const { return node_of(*this)->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  if (!is_leaf()) throw ArgumentError("requires_grad can only be changed on leaf tensors");
  node_->requires_grad = value;
  if (!value) node_->grad.clear();
}

bool Tensor::is_leaf() const { return node_of(*this)->parents.empty(); }

bool Tensor::has_grad() const { return !node_of(*this)->grad.empty(); }

std::span<const double> Tensor::grad() const { return node_of(*this)->grad; }

void Tensor::zero_grad() { node_of(*this)->grad.clear(); }

void Tensor::backward() const {
  Node* root = node_of(*this).get();
  if (!root->requires_grad) return;

  // Post-order DFS: every node appears after all of its inputs.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->parents.empty()) n->grad.assign(n->value.size(), 0.0);
  }
  for (double& g : root->ensure_grad()) g += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

Tensor Tensor::detach() const {
  const Node& n = *node_of(*this);
  return Tensor(n.shape, n.value, false);
}

Tensor Tensor::clone() const {
  const Node& n = *node_of(*this);
  return Tensor(n.shape, n.value, n.requires_grad);
}

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

// Views a tensor as outer × n × inner around `axis`.
struct AxisSplit {
  size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, size_t axis) {
  if (axis >= shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  }
  AxisSplit s;
  for (size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, size_t axis) {
  Shape out;
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

template <typename F>
Tensor unary(const Tensor& x, F&& f, std::function<void(Node&)> backward) {
  std::vector<double> out(x.size());
  auto in = x.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return make_result(x.shape(), std::move(out), {x}, std::move(backward));
}

void check_finite(const char* op, std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      auto& g = p->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const double sign[2] = {1.0, -1.0};
    for (size_t k = 0; k < 2; ++k) {
      auto& p = self.parents[k];
      if (!p->requires_grad) continue;
      auto& g = p->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += sign[k] * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double v) { return v * factor; }, [factor](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias, size_t axis) {
  const AxisSplit s = split_at(x.shape(), axis);
  if (bias.rank() != 1 || bias.dim(0) != s.n) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) +
                         " does not match axis " + std::to_string(axis) + " of " +
                         shape_str(x.shape()));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  auto b = bias.data();
  for (size_t o = 0; o < s.outer; ++o)
    for (size_t j = 0; j < s.n; ++j)
      for (size_t k = 0; k < s.inner; ++k) out[(o * s.n + j) * s.inner + k] += b[j];
  return make_result(x.shape(), std::move(out), {x, bias}, [s](Node& self) {
    Node& px = *self.parents[0];
    Node& pb = *self.parents[1];
    if (px.requires_grad) {
      auto& g = px.ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (size_t o = 0; o < s.outer; ++o)
        for (size_t j = 0; j < s.n; ++j)
          for (size_t k = 0; k < s.inner; ++k) g[j] += self.grad[(o * s.n + j) * s.inner + k];
    }
  });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; }, [](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) {
      if (p.value[i] > 0.0) g[i] += self.grad[i];
    }
  });
}

Tensor exp(const Tensor& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * self.value[i];
  });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) throw NumericError("log: input must be positive");
  }
  return unary(x, [](double v) { return std::log(v); }, [](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / p.value[i];
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result({1}, {total}, {x}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (double& gi : g) gi += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor sum(const Tensor& x, size_t axis) {
  const AxisSplit s = split_at(x.shape(), axis);
  std::vector<double> out(s.outer * s.inner, 0.0);
  auto in = x.data();
  for (size_t o = 0; o < s.outer; ++o)
    for (size_t j = 0; j < s.n; ++j)
      for (size_t k = 0; k < s.inner; ++k) out[o * s.inner + k] += in[(o * s.n + j) * s.inner + k];
  return make_result(drop_axis(x.shape(), axis), std::move(out), {x}, [s](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (size_t o = 0; o < s.outer; ++o)
      for (size_t j = 0; j < s.n; ++j)
        for (size_t k = 0; k < s.inner; ++k) g[(o * s.n + j) * s.inner + k] += self.grad[o * s.inner + k];
  });
}

Tensor logsumexp(const Tensor& x, size_t axis) {
  const AxisSplit s = split_at(x.shape(), axis);
  check_finite("logsumexp", x.data());
  auto in = x.data();
  std::vector<double> out(s.outer * s.inner);
  for (size_t o = 0; o < s.outer; ++o) {
    for (size_t k = 0; k < s.inner; ++k) {
      double m = -std::numeric_limits<double>::infinity();
      for (size_t j = 0; j < s.n; ++j) m = std::max(m, in[(o * s.n + j) * s.inner + k]);
      double acc = 0.0;
      for (size_t j = 0; j < s.n; ++j) acc += std::exp(in[(o * s.n + j) * s.inner + k] - m);
      out[o * s.inner + k] = m + std::log(acc);
    }
  }
  return make_result(drop_axis(x.shape(), axis), std::move(out), {x}, [s](Node& self) {
    Node& p = *self.parents[0];
    auto& g = p.ensure_grad();
    for (size_t o = 0; o < s.outer; ++o)
      for (size_t k = 0; k < s.inner; ++k) {
        const double lse = self.value[o * s.inner + k];
        const double up = self.grad[o * s.inner + k];
        for (size_t j = 0; j < s.n; ++j) {
          const size_t idx = (o * s.n + j) * s.inner + k;
          g[idx] += up * std::exp(p.value[idx] - lse);
        }
      }
  });
}

Tensor softmax(const Tensor& x, size_t axis) {
  const AxisSplit s = split_at(x.shape(), axis);
  for (double v : x.data()) {
    if (std::isnan(v)) throw NumericError("softmax: NaN input");
  }
  auto in = x.data();
  std::vector<double> out(x.size());
  for (size_t o = 0; o < s.outer; ++o) {
    for (size_t k = 0; k < s.inner; ++k) {
      double m = -std::numeric_limits<double>::infinity();
      for (size_t j = 0; j < s.n; ++j) m = std::max(m, in[(o * s.n + j) * s.inner + k]);
      double z = 0.0;
      for (size_t j = 0; j < s.n; ++j) {
        const size_t idx = (o * s.n + j) * s.inner + k;
        out[idx] = std::exp(in[idx] - m);
        z += out[idx];
      }
      for (size_t j = 0; j < s.n; ++j) out[(o * s.n + j) * s.inner + k] /= z;
    }
  }
  return make_result(x.shape(), std::move(out), {x}, [s](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (size_t o = 0; o < s.outer; ++o)
      for (size_t k = 0; k < s.inner; ++k) {
        double dot = 0.0;
        for (size_t j = 0; j < s.n; ++j) {
          const size_t idx = (o * s.n + j) * s.inner + k;
          dot += self.grad[idx] * self.value[idx];
        }
        for (size_t j = 0; j < s.n; ++j) {
          const size_t idx = (o * s.n + j) * s.inner + k;
          g[idx] += self.value[idx] * (self.grad[idx] - dot);
        }
      }
  });
}

Tensor l2_normalize(const Tensor& x, size_t axis, double eps) {
  const AxisSplit s = split_at(x.shape(), axis);
  auto in = x.data();
  std::vector<double> norms(s.outer * s.inner);
  std::vector<double> out(x.size());
  for (size_t o = 0; o < s.outer; ++o)
    for (size_t k = 0; k < s.inner; ++k) {
      double sq = 0.0;
      for (size_t j = 0; j < s.n; ++j) {
        const double v = in[(o * s.n + j) * s.inner + k];
        sq += v * v;
      }
      const double nrm = std::max(std::sqrt(sq), eps);
      norms[o * s.inner + k] = nrm;
      for (size_t j = 0; j < s.n; ++j) {
        const size_t idx = (o * s.n + j) * s.inner + k;
        out[idx] = in[idx] / nrm;
      }
    }
  return make_result(x.shape(), std::move(out), {x}, [s, norms](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (size_t o = 0; o < s.outer; ++o)
      for (size_t k = 0; k < s.inner; ++k) {
        const double nrm = norms[o * s.inner + k];
        double dot = 0.0;
        for (size_t j = 0; j < s.n; ++j) {
          const size_t idx = (o * s.n + j) * s.inner + k;
          dot += self.grad[idx] * self.value[idx];
        }
        for (size_t j = 0; j < s.n; ++j) {
          const size_t idx = (o * s.n + j) * s.inner + k;
          g[idx] += (self.grad[idx] - self.value[idx] * dot) / nrm;
        }
      }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                         shape_str(b.shape()));
  }
  const size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto av = a.data();
  auto bv = b.data();
  std::vector<double> out(m * n, 0.0);
  for (size_t i = 0; i < m; ++i)
    for (size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      for (size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (size_t i = 0; i < m; ++i)
        for (size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (size_t j = 0; j < n; ++j) acc += self.grad[i * n + j] * pb.value[p * n + j];
          g[i * k + p] += acc;
        }
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (size_t i = 0; i < m; ++i)
        for (size_t p = 0; p < k; ++p) {
          const double aip = pa.value[i * k + p];
          for (size_t j = 0; j < n; ++j) g[p * n + j] += aip * self.grad[i * n + j];
        }
    }
  });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("transpose: expected a matrix, got " + shape_str(x.shape()));
  return permute(x, {1, 0});
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor permute(const Tensor& x, const std::vector<size_t>& axes) {
  const Shape& in_shape = x.shape();
  const size_t r = in_shape.size();
  if (axes.size() != r) throw DimensionError("permute: axis list does not match rank of " + shape_str(in_shape));
  std::vector<bool> seen(r, false);
  for (size_t a : axes) {
    if (a >= r || seen[a]) throw DimensionError("permute: invalid axis permutation");
    seen[a] = true;
  }
  Shape out_shape(r);
  for (size_t i = 0; i < r; ++i) out_shape[i] = in_shape[axes[i]];
  std::vector<size_t> in_strides(r, 1);
  for (size_t i = r - 1; i-- > 0;) in_strides[i] = in_strides[i + 1] * in_shape[i + 1];
  // Source offset for every output element, in output order.
  std::vector<size_t> src(x.size());
  std::vector<size_t> idx(r, 0);
  for (size_t flat = 0; flat < src.size(); ++flat) {
    size_t off = 0;
    for (size_t i = 0; i < r; ++i) off += idx[i] * in_strides[axes[i]];
    src[flat] = off;
    for (size_t i = r; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  auto in = x.data();
  std::vector<double> out(src.size());
  for (size_t i = 0; i < src.size(); ++i) out[i] = in[src[i]];
  return make_result(std::move(out_shape), std::move(out), {x},
                     [src = std::move(src)](Node& self) {
                       auto& g = self.parents[0]->ensure_grad();
                       for (size_t i = 0; i < src.size(); ++i) g[src[i]] += self.grad[i];
                     });
}

Tensor concat(const Tensor& a, const Tensor& b, size_t axis) {
  if (a.rank() != b.rank()) {
    throw DimensionError("concat: rank mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  for (size_t i = 0; i < a.rank(); ++i) {
    if (i != axis && a.dim(i) != b.dim(i)) {
      throw DimensionError("concat: shape mismatch " + shape_str(a.shape()) + " vs " +
                           shape_str(b.shape()) + " off axis " + std::to_string(axis));
    }
  }
  const AxisSplit sa = split_at(a.shape(), axis);
  const AxisSplit sb = split_at(b.shape(), axis);
  const size_t na = sa.n * sa.inner, nb = sb.n * sb.inner;
  Shape shape = a.shape();
  shape[axis] += b.dim(axis);
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  for (size_t o = 0; o < sa.outer; ++o) {
    out.insert(out.end(), a.data().begin() + o * na, a.data().begin() + (o + 1) * na);
    out.insert(out.end(), b.data().begin() + o * nb, b.data().begin() + (o + 1) * nb);
  }
  return make_result(std::move(shape), std::move(out), {a, b}, [outer = sa.outer, na, nb](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (size_t o = 0; o < outer; ++o) {
      const double* row = self.grad.data() + o * (na + nb);
      if (pa.requires_grad) {
        auto& g = pa.ensure_grad();
        for (size_t i = 0; i < na; ++i) g[o * na + i] += row[i];
      }
      if (pb.requires_grad) {
        auto& g = pb.ensure_grad();
        for (size_t i = 0; i < nb; ++i) g[o * nb + i] += row[na + i];
      }
    }
  });
}

Tensor stack(std::span<const Tensor> parts) {
  if (parts.empty()) throw ArgumentError("stack: no tensors");
  const Shape& s0 = parts[0].shape();
  for (const Tensor& t : parts) require_same_shape("stack", parts[0], t);
  Shape shape{parts.size()};
  shape.insert(shape.end(), s0.begin(), s0.end());
  const size_t each = numel(s0);
  std::vector<double> out;
  out.reserve(each * parts.size());
  for (const Tensor& t : parts) out.insert(out.end(), t.data().begin(), t.data().end());
  return make_result(std::move(shape), std::move(out), {parts.begin(), parts.end()}, [each](Node& self) {
    for (size_t p = 0; p < self.parents.size(); ++p) {
      Node& pn = *self.parents[p];
      if (!pn.requires_grad) continue;
      auto& g = pn.ensure_grad();
      for (size_t i = 0; i < each; ++i) g[i] += self.grad[p * each + i];
    }
  });
}

Tensor index_select(const Tensor& x, std::span<const size_t> indices) {
  if (indices.empty()) throw ArgumentError("index_select: empty index list");
  const size_t rows = x.dim(0);
  const size_t width = x.size() / rows;
  std::vector<double> out;
  out.reserve(indices.size() * width);
  for (size_t r : indices) {
    if (r >= rows) {
      throw DimensionError("index_select: index " + std::to_string(r) + " out of range for " +
                           shape_str(x.shape()));
    }
    out.insert(out.end(), x.data().begin() + r * width, x.data().begin() + (r + 1) * width);
  }
  Shape shape = x.shape();
  shape[0] = indices.size();
  std::vector<size_t> idx(indices.begin(), indices.end());
  return make_result(std::move(shape), std::move(out), {x}, [idx, width](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (size_t i = 0; i < idx.size(); ++i)
      for (size_t k = 0; k < width; ++k) g[idx[i] * width + k] += self.grad[i * width + k];
  });
}

Tensor diagonal(const Tensor& x) {
  if (x.rank() != 2 || x.dim(0) != x.dim(1)) {
    throw DimensionError("diagonal: expected a square matrix, got " + shape_str(x.shape()));
  }
  const size_t n = x.dim(0);
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = x.data()[i * n + i];
  return make_result({n}, std::move(out), {x}, [n](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (size_t i = 0; i < n; ++i) g[i * n + i] += self.grad[i];
  });
}

Tensor pick(const Tensor& x, std::span<const size_t> cols) {
  if (x.rank() != 2 || cols.size() != x.dim(0)) {
    throw DimensionError("pick: need one column per row of " + shape_str(x.shape()));
  }
  const size_t n = x.dim(0), m = x.dim(1);
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) {
    if (cols[i] >= m) throw DimensionError("pick: column " + std::to_string(cols[i]) + " out of range");
    out[i] = x.data()[i * m + cols[i]];
  }
  std::vector<size_t> c(cols.begin(), cols.end());
  return make_result({n}, std::move(out), {x}, [c, m](Node& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (size_t i = 0; i < c.size(); ++i) g[i * m + c[i]] += self.grad[i];
  });
}

namespace {

struct ConvGeometry {
  size_t batch, in_ch, h, w, out_ch, k, out_h, out_w;
  int stride, pad;
};

// Output positions ox with 0 <= ox*stride - pad + kx < w, as [lo, hi).
std::pair<size_t, size_t> valid_range(size_t out_len, size_t in_len, int stride, int pad, size_t kk) {
  const long offset = static_cast<long>(kk) - pad;
  long lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  long hi = (static_cast<long>(in_len) - 1 - offset) / stride + 1;
  if (static_cast<long>(in_len) - 1 - offset < 0) hi = 0;
  hi = std::min<long>(hi, static_cast<long>(out_len));
  lo = std::min(lo, hi);
  return {static_cast<size_t>(lo), static_cast<size_t>(hi)};
}

Tensor conv2d_impl(const Tensor& input, const Tensor& kernels, const Tensor* bias, int stride, int padding) {
  if (stride <= 0) throw ArgumentError("conv2d: stride must be positive, got " + std::to_string(stride));
  if (padding < 0) throw ArgumentError("conv2d: padding must be non-negative");
  const bool batched = input.rank() == 4;
  if (!batched && input.rank() != 3) {
    throw DimensionError("conv2d: input must be CxHxW or NxCxHxW, got " + shape_str(input.shape()));
  }
  if (kernels.rank() != 4 || kernels.dim(2) != kernels.dim(3)) {
    throw DimensionError("conv2d: kernels must be OxCxkxk, got " + shape_str(kernels.shape()));
  }
  ConvGeometry g{};
  g.batch = batched ? input.dim(0) : 1;
  g.in_ch = input.dim(batched ? 1 : 0);
  g.h = input.dim(batched ? 2 : 1);
  g.w = input.dim(batched ? 3 : 2);
  g.out_ch = kernels.dim(0);
  g.k = kernels.dim(2);
  g.stride = stride;
  g.pad = padding;
  if (kernels.dim(1) != g.in_ch) {
    throw DimensionError("conv2d: input " + shape_str(input.shape()) + " has " + std::to_string(g.in_ch) +
                         " channels but kernels " + shape_str(kernels.shape()) + " expect " +
                         std::to_string(kernels.dim(1)));
  }
  if (g.k > g.h + 2 * padding || g.k > g.w + 2 * padding) {
    throw DimensionError("conv2d: kernel " + shape_str(kernels.shape()) + " larger than padded input " +
                         shape_str(input.shape()));
  }
  if (bias && (bias->rank() != 1 || bias->dim(0) != g.out_ch)) {
    throw DimensionError("conv2d: bias " + shape_str(bias->shape()) + " does not match " +
                         std::to_string(g.out_ch) + " output channels");
  }
  g.out_h = (g.h + 2 * padding - g.k) / stride + 1;
  g.out_w = (g.w + 2 * padding - g.k) / stride + 1;

  auto in = input.data();
  auto ker = kernels.data();
  const size_t in_plane = g.h * g.w, out_plane = g.out_h * g.out_w;
  std::vector<double> out(g.batch * g.out_ch * out_plane, 0.0);
  for (size_t n = 0; n < g.batch; ++n) {
    for (size_t o = 0; o < g.out_ch; ++o) {
      double* dst = out.data() + (n * g.out_ch + o) * out_plane;
      if (bias) std::fill(dst, dst + out_plane, bias->data()[o]);
      for (size_t c = 0; c < g.in_ch; ++c) {
        const double* src = in.data() + (n * g.in_ch + c) * in_plane;
        for (size_t ky = 0; ky < g.k; ++ky) {
          const auto [ylo, yhi] = valid_range(g.out_h, g.h, stride, padding, ky);
          for (size_t kx = 0; kx < g.k; ++kx) {
            const double wv = ker[((o * g.in_ch + c) * g.k + ky) * g.k + kx];
            const auto [xlo, xhi] = valid_range(g.out_w, g.w, stride, padding, kx);
            for (size_t oy = ylo; oy < yhi; ++oy) {
              const size_t iy = oy * stride - padding + ky;
              const double* srow = src + iy * g.w;
              double* drow = dst + oy * g.out_w;
              for (size_t ox = xlo; ox < xhi; ++ox) drow[ox] += wv * srow[ox * stride - padding + kx];
            }
          }
        }
      }
    }
  }

  Shape shape = batched ? Shape{g.batch, g.out_ch, g.out_h, g.out_w} : Shape{g.out_ch, g.out_h, g.out_w};
  std::vector<Tensor> inputs{input, kernels};
  if (bias) inputs.push_back(*bias);
  return make_result(std::move(shape), std::move(out), std::move(inputs), [g](Node& self) {
    Node& pin = *self.parents[0];
    Node& pk = *self.parents[1];
    const size_t in_plane = g.h * g.w, out_plane = g.out_h * g.out_w;
    double* gin = pin.requires_grad ? pin.ensure_grad().data() : nullptr;
    double* gk = pk.requires_grad ? pk.ensure_grad().data() : nullptr;
    for (size_t n = 0; n < g.batch; ++n) {
      for (size_t o = 0; o < g.out_ch; ++o) {
        const double* gout = self.grad.data() + (n * g.out_ch + o) * out_plane;
        for (size_t c = 0; c < g.in_ch; ++c) {
          const size_t in_off = (n * g.in_ch + c) * in_plane;
          for (size_t ky = 0; ky < g.k; ++ky) {
            const auto [ylo, yhi] = valid_range(g.out_h, g.h, g.stride, g.pad, ky);
            for (size_t kx = 0; kx < g.k; ++kx) {
              const size_t widx = ((o * g.in_ch + c) * g.k + ky) * g.k + kx;
              const double wv = pk.value[widx];
              const auto [xlo, xhi] = valid_range(g.out_w, g.w, g.stride, g.pad, kx);
              double wacc = 0.0;
              for (size_t oy = ylo; oy < yhi; ++oy) {
                const size_t iy = oy * g.stride - g.pad + ky;
                const double* grow = gout + oy * g.out_w;
                for (size_t ox = xlo; ox < xhi; ++ox) {
                  const size_t ii = in_off + iy * g.w + ox * g.stride - g.pad + kx;
                  if (gin) gin[ii] += wv * grow[ox];
                  wacc += pin.value[ii] * grow[ox];
                }
              }
              if (gk) gk[widx] += wacc;
            }
          }
        }
      }
    }
    if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
      auto& gb = self.parents[2]->ensure_grad();
      for (size_t n = 0; n < g.batch; ++n)
        for (size_t o = 0; o < g.out_ch; ++o) {
          const double* gout = self.grad.data() + (n * g.out_ch + o) * out_plane;
          double acc = 0.0;
          for (size_t i = 0; i < out_plane; ++i) acc += gout[i];
          gb[o] += acc;
        }
    }
  });
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, int stride, int padding) {
  return conv2d_impl(input, kernels, nullptr, stride, padding);
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias, int stride, int padding) {
  return conv2d_impl(input, kernels, &bias, stride, padding);
}

Tensor cross_entropy(const Tensor& logits, std::span<const size_t> labels) {
  if (logits.rank() != 2) throw DimensionError("cross_entropy: logits must be a matrix");
  return mean(sub(logsumexp(logits, 1), pick(logits, labels)));
}

}  // namespace hralign
