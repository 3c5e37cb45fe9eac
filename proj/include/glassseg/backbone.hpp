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
#ifndef GLASSSEG_BACKBONE_HPP_
#define GLASSSEG_BACKBONE_HPP_

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "glassseg/nn/layers.hpp"

namespace glassseg {

enum class BackboneVariant { kResNet50, kResNeXt101, kTinyRandom };

BackboneVariant parse_backbone_variant(const std::string& s);
std::string to_string(BackboneVariant v);

struct BackboneConfig {
  BackboneVariant variant = BackboneVariant::kTinyRandom;
  int reduced_channels = 64;
  std::optional<std::filesystem::path> pretrained_weights_path;

  void validate() const;
};

struct FeaturePyramid {
  std::vector<nn::Tensor> levels;  // f_0 .. f_4, finest first
  std::vector<int> strides;        // {4, 4, 8, 16, 32}
};

inline constexpr int kPyramidLevels = 5;
inline constexpr int kPyramidStrides[kPyramidLevels] = {4, 4, 8, 16, 32};

/// Trunk-specific part of the backbone: image -> five raw feature maps.
class Trunk {
 public:
  virtual ~Trunk() = default;
  virtual std::vector<nn::Tensor> forward(const nn::Tensor& image, bool training) = 0;
  virtual std::vector<int> channels() const = 0;
  virtual void collect(nn::StateList& state, const std::string& prefix) = 0;
};

/// Multi-scale feature extractor. Each raw level passes through its own 3x3
/// ConvBlock reducing it to `reduced_channels`.
class Backbone {
 public:
  Backbone(const BackboneConfig& config, Rng& rng);

  /// `image` is (N, 3, H, W) in [0, 1]; H and W must be multiples of 32.
  FeaturePyramid extract(const nn::Tensor& image, bool training);

  /// Loads trunk weights from a tensor file (names prefixed "trunk.").
  void load_trunk_weights(const std::filesystem::path& path);

  void collect(nn::StateList& state, const std::string& prefix);
  const BackboneConfig& config() const { return config_; }

 private:
  BackboneConfig config_;
  std::unique_ptr<Trunk> trunk_;
  std::vector<nn::ConvBlock> reduce_;
};

}  // namespace glassseg

#endif  // GLASSSEG_BACKBONE_HPP_
