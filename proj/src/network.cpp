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
#include "glassseg/network.hpp"

#include "glassseg/errors.hpp"

namespace glassseg {

std::vector<const McLevelOutput*> NetworkOutput::supervised() const {
  std::vector<const McLevelOutput*> out;
  for (int i = 0; i < kSupervisedLevels; ++i) {
    out.push_back(&cascade[cascade.size() - 1 - static_cast<std::size_t>(i)]);
  }
  return out;
}

GlassSegNet::GlassSegNet(const NetworkConfig& config)
    : config_(config), rng_(config.seed), backbone_(config.backbone, rng_) {
  const int channels = config_.backbone.reduced_channels;
  if (config_.attn_channels == 0) config_.attn_channels = std::max(1, channels / 4);
  for (int i = 0; i < kPyramidLevels; ++i) {
    ccsa_.emplace_back(channels, config_.attn_channels, rng_);
  }
  edge_ = EdgeBlock(channels, rng_);
  for (int i = 0; i < kPyramidLevels; ++i) {
    mc_.emplace_back(channels, i > 0, rng_, config_.reverse_mode);
  }
}

NetworkOutput GlassSegNet::forward(const nn::Tensor& image, bool training) {
  NetworkOutput out;
  out.pyramid = backbone_.extract(image, training);
  for (int i = 0; i < kPyramidLevels; ++i) {
    out.attended.push_back(ccsa_[i].forward(out.pyramid.levels[i]));
  }
  out.edge = edge_.fuse(out.attended.front(), out.attended.back(), training);
  for (int i = 0; i < kPyramidLevels; ++i) {
    out.enhanced.push_back(config_.eq4_literal ? enhance(out.attended[i], out.attended.back())
                                               : enhance(out.attended[i], out.edge.features));
  }
  const std::vector<nn::Tensor> deepest_first(out.enhanced.rbegin(), out.enhanced.rend());
  out.cascade = correction_cascade(deepest_first, mc_, training);
  const nn::Shape& s = image.shape();
  out.output_logit = nn::resize_bilinear(out.cascade.back().glass_logit, s.h, s.w);
  out.output = nn::sigmoid(out.output_logit);
  return out;
}

nn::StateList GlassSegNet::state() {
  nn::StateList state;
  backbone_.collect(state, "backbone");
  for (std::size_t i = 0; i < ccsa_.size(); ++i) ccsa_[i].collect(state, "ccsa" + std::to_string(i + 1));
  edge_.collect(state, "edge");
  for (std::size_t i = 0; i < mc_.size(); ++i) {
    mc_[i].collect(state, "mc" + std::to_string(kPyramidLevels - i));
  }
  return state;
}

}  // namespace glassseg
