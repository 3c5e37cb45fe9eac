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
#include "glassseg/nn/layers.hpp"

#include <cmath>

namespace glassseg::nn {

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, Rng& rng, ConvSpec spec, bool bias)
    : spec_(spec) {
  const int per_group = in_channels / spec.groups;
  Shape ws{out_channels, per_group, kernel, kernel};
  const double std = std::sqrt(2.0 / (per_group * kernel * kernel));
  std::vector<double> w(ws.numel());
  for (double& v : w) v = std * rng.normal();
  weight_ = Tensor(ws, std::move(w), true);
  if (bias) bias_ = Tensor(Shape{1, out_channels, 1, 1}, 0.0, true);
}

Tensor Conv2d::forward(const Tensor& x) const { return conv2d(x, weight_, bias_, spec_); }

void Conv2d::collect(StateList& state, const std::string& prefix) {
  state.add(prefix + ".weight", weight_);
  if (bias_.defined()) state.add(prefix + ".bias", bias_);
}

BatchNorm2d::BatchNorm2d(int channels)
    : gamma_(Shape{1, channels, 1, 1}, 1.0, true), beta_(Shape{1, channels, 1, 1}, 0.0, true) {
  state_.running_mean.assign(static_cast<std::size_t>(channels), 0.0);
  state_.running_var.assign(static_cast<std::size_t>(channels), 1.0);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool training) {
  return batch_norm(x, gamma_, beta_, state_, training);
}

void BatchNorm2d::collect(StateList& state, const std::string& prefix) {
  state.add(prefix + ".gamma", gamma_, false);
  state.add(prefix + ".beta", beta_, false);
  state.add_buffer(prefix + ".running_mean", state_.running_mean);
  state.add_buffer(prefix + ".running_var", state_.running_var);
}

ConvBlock::ConvBlock(int in_channels, int out_channels, Rng& rng, int stride)
    : conv_(in_channels, out_channels, 3, rng, ConvSpec{stride, 1, 1}), norm_(out_channels) {}

Tensor ConvBlock::forward(const Tensor& x, bool training) {
  return relu(norm_.forward(conv_.forward(x), training));
}

void ConvBlock::collect(StateList& state, const std::string& prefix) {
  conv_.collect(state, prefix + ".conv");
  norm_.collect(state, prefix + ".bn");
}

}  // namespace glassseg::nn
