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
#ifndef GLASSSEG_NN_TENSOR_HPP_
#define GLASSSEG_NN_TENSOR_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace glassseg::nn {

/// NCHW extent. Every tensor in the library is 4-D; scalars are 1x1x1x1.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Reference-counted handle to a value buffer plus its place in the autograd
/// graph. Copies share storage; use clone() for a deep copy.
class Tensor {
 public:
  using BackwardFn = std::function<void(detail::Node&)>;

  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  /// Builds the result of a differentiable op. The graph edge is recorded only
  /// when some parent requires grad and no NoGradGuard is active.
  static Tensor make_op(Shape shape, std::vector<double> value,
                        std::vector<Tensor> parents, BackwardFn backward);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t numel() const { return shape().numel(); }

  std::span<double> data();
  std::span<const double> data() const;
  std::span<double> grad();
  std::span<const double> grad() const;
  bool has_grad() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);

  std::size_t index(int n, int c, int h, int w) const {
    const Shape& s = shape();
    return ((static_cast<std::size_t>(n) * s.c + c) * s.h + h) * s.w + w;
  }
  double& at(int n, int c, int h, int w) { return data()[index(n, c, h, w)]; }
  double at(int n, int c, int h, int w) const { return data()[index(n, c, h, w)]; }
  double item() const;

  /// Reverse-mode sweep from this scalar; accumulates into every reachable
  /// tensor that requires grad.
  void backward();
  void zero_grad();

  Tensor detach() const;
  Tensor clone() const;

  /// Batch items [begin, end) as a new tensor sharing no storage.
  Tensor slice_batch(int begin, int end) const;

  detail::Node* node() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Accumulates `delta` into the parent's gradient if it participates in autograd.
void accumulate_grad(detail::Node& parent, std::span<const double> delta);

void check_finite(const Tensor& t, const std::string& what);

}  // namespace glassseg::nn

#endif  // GLASSSEG_NN_TENSOR_HPP_
