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
#ifndef GLASSSEG_EDGE_BLOCK_HPP_
#define GLASSSEG_EDGE_BLOCK_HPP_

#include <string>

#include "glassseg/nn/layers.hpp"

namespace glassseg {

struct EdgeFusion {
  nn::Tensor features;    // f_edge, same size as the finest level
  nn::Tensor edge_logit;  // (N, 1, H, W)
  nn::Tensor edge_pred;   // sigmoid(edge_logit)
};

/// Fuses the finest attention features with the top-down location cue from
/// the coarsest level and predicts a glass-edge map from the result:
///   f_edge = ConvBlock(f_ccsa1 + up(f_ccsa5)),  edge = sigmoid(head(f_edge)).
class EdgeBlock {
 public:
  EdgeBlock() = default;
  EdgeBlock(int channels, Rng& rng);

  EdgeFusion fuse(const nn::Tensor& f_ccsa1, const nn::Tensor& f_ccsa5, bool training);
  void collect(nn::StateList& state, const std::string& prefix);

  nn::ConvBlock& fusion() { return fusion_; }
  nn::Conv2d& head() { return head_; }

 private:
  int channels_ = 0;
  nn::ConvBlock fusion_;
  nn::Conv2d head_;
};

/// f_level + bilinear_resample(f_edge, level size). Output shape equals
/// `f_level`.
nn::Tensor enhance(const nn::Tensor& f_level, const nn::Tensor& f_edge);

}  // namespace glassseg

#endif  // GLASSSEG_EDGE_BLOCK_HPP_
