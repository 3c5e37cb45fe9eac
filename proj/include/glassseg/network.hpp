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
#ifndef GLASSSEG_NETWORK_HPP_
#define GLASSSEG_NETWORK_HPP_

#include <cstdint>
#include <vector>

#include "glassseg/backbone.hpp"
#include "glassseg/ccsa.hpp"
#include "glassseg/edge_block.hpp"
#include "glassseg/mistake_correction.hpp"

namespace glassseg {

inline constexpr int kSupervisedLevels = 4;

struct NetworkConfig {
  BackboneConfig backbone;
  int attn_channels = 0;  // 0 selects reduced_channels / 4
  ReverseMode reverse_mode = ReverseMode::kSigmoidComplement;
  /// Enhance each level with the resampled top-level attention features
  /// instead of the edge features.
  bool eq4_literal = false;
  std::uint64_t seed = 0;
};

struct NetworkOutput {
  FeaturePyramid pyramid;
  std::vector<nn::Tensor> attended;  // CCSA output per level, finest first
  EdgeFusion edge;
  std::vector<nn::Tensor> enhanced;  // finest first
  std::vector<McLevelOutput> cascade;  // deepest first, one per pyramid level
  nn::Tensor output_logit;  // finest glass logit resampled to input size
  nn::Tensor output;        // sigmoid(output_logit)

  /// The supervised cascade outputs, finest first (matches lambda order).
  std::vector<const McLevelOutput*> supervised() const;
};

/// backbone -> CCSA per level -> edge block -> enhancement -> MC cascade.
class GlassSegNet {
 public:
  explicit GlassSegNet(const NetworkConfig& config);

  NetworkOutput forward(const nn::Tensor& image, bool training);

  nn::StateList state();
  const NetworkConfig& config() const { return config_; }

  Backbone& backbone() { return backbone_; }
  std::vector<CrissCrossStripAttention>& attention() { return ccsa_; }
  EdgeBlock& edge_block() { return edge_; }
  std::vector<MistakeCorrection>& correction() { return mc_; }

 private:
  NetworkConfig config_;
  Rng rng_;
  Backbone backbone_;
  std::vector<CrissCrossStripAttention> ccsa_;
  EdgeBlock edge_;
  std::vector<MistakeCorrection> mc_;  // deepest first
};

}  // namespace glassseg

#endif  // GLASSSEG_NETWORK_HPP_
