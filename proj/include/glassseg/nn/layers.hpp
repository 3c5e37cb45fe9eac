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
#ifndef GLASSSEG_NN_LAYERS_HPP_
#define GLASSSEG_NN_LAYERS_HPP_

#include <string>
#include <vector>

#include "glassseg/nn/ops.hpp"
#include "glassseg/nn/random.hpp"
#include "glassseg/nn/tensor.hpp"

namespace glassseg::nn {

struct NamedParameter {
  std::string name;
  Tensor tensor;
  bool decay = true;  // false for normalization affine parameters
};

struct NamedBuffer {
  std::string name;
  std::vector<double>* values = nullptr;
};

/// Flat view of a model's learnable state, in registration order.
struct StateList {
  std::vector<NamedParameter> parameters;
  std::vector<NamedBuffer> buffers;

  void add(std::string name, const Tensor& t, bool decay = true) {
    parameters.push_back({std::move(name), t, decay});
  }
  void add_buffer(std::string name, std::vector<double>& v) {
    buffers.push_back({std::move(name), &v});
  }
};

class Conv2d {
 public:
  Conv2d() = default;
  /// Kaiming-normal (fan-in, ReLU gain) weights; zero bias.
  Conv2d(int in_channels, int out_channels, int kernel, Rng& rng, ConvSpec spec = {},
         bool bias = false);

  Tensor forward(const Tensor& x) const;
  void collect(StateList& state, const std::string& prefix);

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  int in_channels() const { return weight_.shape().c * spec_.groups; }
  int out_channels() const { return weight_.shape().n; }

 private:
  Tensor weight_;
  Tensor bias_;
  ConvSpec spec_;
};

class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels);

  Tensor forward(const Tensor& x, bool training);
  void collect(StateList& state, const std::string& prefix);

  Tensor& gamma() { return gamma_; }
  Tensor& beta() { return beta_; }
  BatchNormState& stats() { return state_; }

 private:
  Tensor gamma_;
  Tensor beta_;
  BatchNormState state_;
};

/// 3x3 convolution, batch normalization and ReLU.
class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(int in_channels, int out_channels, Rng& rng, int stride = 1);

  Tensor forward(const Tensor& x, bool training);
  void collect(StateList& state, const std::string& prefix);

  Conv2d& conv() { return conv_; }
  BatchNorm2d& norm() { return norm_; }

 private:
  Conv2d conv_;
  BatchNorm2d norm_;
};

}  // namespace glassseg::nn

#endif  // GLASSSEG_NN_LAYERS_HPP_
