/* Copyright 2026 The glassseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "glassseg/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "glassseg/errors.hpp"

namespace glassseg::nn {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::string Shape::str() const {
  std::ostringstream os;
  os << n << "x" << c << "x" << h << "x" << w;
  return os.str();
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  node_->shape = shape;
  node_->value.assign(shape.numel(), fill);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  if (values.size() != shape.numel()) {
    throw ShapeError("tensor of shape " + shape.str() + " given " +
                     std::to_string(values.size()) + " values");
  }
  node_->shape = shape;
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::make_op(Shape shape, std::vector<double> value,
                       std::vector<Tensor> parents, BackwardFn backward) {
  auto node = std::make_shared<detail::Node>();
  node->shape = shape;
  node->value = std::move(value);
  if (g_grad_enabled) {
    const bool any = std::any_of(parents.begin(), parents.end(), [](const Tensor& p) {
      return p.defined() && p.node_->requires_grad;
    });
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(parents.size());
      for (auto& p : parents) node->parents.push_back(p.node_);
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

const Shape& Tensor::shape() const { return node_->shape; }

std::span<double> Tensor::data() { return node_->value; }
std::span<const double> Tensor::data() const { return node_->value; }

std::span<double> Tensor::grad() { return node_->ensure_grad(); }
std::span<const double> Tensor::grad() const { return node_->grad; }
bool Tensor::has_grad() const { return node_->grad.size() == node_->value.size(); }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
void Tensor::set_requires_grad(bool on) { node_->requires_grad = on; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape().str());
  return node_->value[0];
}

void Tensor::backward() {
  if (numel() != 1) throw ShapeError("backward() needs a scalar, got " + shape().str());
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order of the graph.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* p = node->parents[next++].get();
      if (p != nullptr && p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward && node->grad.size() == node->value.size()) node->backward(*node);
  }
}

void Tensor::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->value, false); }

Tensor Tensor::clone() const {
  Tensor t(shape(), node_->value, node_->requires_grad);
  return t;
}

Tensor Tensor::slice_batch(int begin, int end) const {
  const Shape& s = shape();
  if (begin < 0 || end > s.n || begin >= end) {
    throw ShapeError("batch slice [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of range for " + s.str());
  }
  Shape out = s;
  out.n = end - begin;
  const std::size_t item = static_cast<std::size_t>(s.c) * s.plane();
  std::vector<double> v(node_->value.begin() + static_cast<std::ptrdiff_t>(begin * item),
                        node_->value.begin() + static_cast<std::ptrdiff_t>(end * item));
  return Tensor(out, std::move(v));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

void accumulate_grad(detail::Node& parent, std::span<const double> delta) {
  if (!parent.requires_grad) return;
  auto& g = parent.ensure_grad();
  for (std::size_t i = 0; i < delta.size(); ++i) g[i] += delta[i];
}

void check_finite(const Tensor& t, const std::string& what) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in " + what);
  }
}

}  // namespace glassseg::nn
