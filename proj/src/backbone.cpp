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
#include "glassseg/backbone.hpp"

#include <array>

#include "glassseg/errors.hpp"
#include "glassseg/nn/serialize.hpp"

namespace glassseg {

namespace {

constexpr std::array<double, 3> kImageMean = {0.485, 0.456, 0.406};
constexpr std::array<double, 3> kImageStd = {0.229, 0.224, 0.225};

nn::Tensor normalize_image(const nn::Tensor& image) {
  const nn::Shape& s = image.shape();
  std::vector<double> v(image.data().begin(), image.data().end());
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < 3; ++c) {
      double* p = v.data() + (static_cast<std::size_t>(n) * 3 + c) * s.plane();
      for (std::size_t i = 0; i < s.plane(); ++i) p[i] = (p[i] - kImageMean[c]) / kImageStd[c];
    }
  }
  return nn::Tensor(s, std::move(v));
}

// Stride-4 stem followed by single-ConvBlock stages.
class TinyTrunk : public Trunk {
 public:
  explicit TinyTrunk(Rng& rng)
      : stem1_(3, 16, rng, 2),
        stem2_(16, 32, rng, 2),
        stage1_(32, 32, rng),
        stage2_(32, 48, rng, 2),
        stage3_(48, 64, rng, 2),
        stage4_(64, 96, rng, 2) {}

  std::vector<nn::Tensor> forward(const nn::Tensor& image, bool training) override {
    std::vector<nn::Tensor> f(kPyramidLevels);
    f[0] = stem2_.forward(stem1_.forward(image, training), training);
    f[1] = stage1_.forward(f[0], training);
    f[2] = stage2_.forward(f[1], training);
    f[3] = stage3_.forward(f[2], training);
    f[4] = stage4_.forward(f[3], training);
    return f;
  }

  std::vector<int> channels() const override { return {32, 32, 48, 64, 96}; }

  void collect(nn::StateList& state, const std::string& prefix) override {
    stem1_.collect(state, prefix + ".stem1");
    stem2_.collect(state, prefix + ".stem2");
    stage1_.collect(state, prefix + ".stage1");
    stage2_.collect(state, prefix + ".stage2");
    stage3_.collect(state, prefix + ".stage3");
    stage4_.collect(state, prefix + ".stage4");
  }

 private:
  nn::ConvBlock stem1_, stem2_, stage1_, stage2_, stage3_, stage4_;
};

class Bottleneck {
 public:
  Bottleneck(int in, int planes, int stride, int groups, int width, Rng& rng)
      : conv1_(in, width, 1, rng),
        bn1_(width),
        conv2_(width, width, 3, rng, nn::ConvSpec{stride, 1, groups}),
        bn2_(width),
        conv3_(width, planes * 4, 1, rng),
        bn3_(planes * 4) {
    if (stride != 1 || in != planes * 4) {
      down_conv_ = nn::Conv2d(in, planes * 4, 1, rng, nn::ConvSpec{stride, 0, 1});
      down_bn_ = nn::BatchNorm2d(planes * 4);
      has_down_ = true;
    }
  }

  nn::Tensor forward(const nn::Tensor& x, bool training) {
    nn::Tensor y = nn::relu(bn1_.forward(conv1_.forward(x), training));
    y = nn::relu(bn2_.forward(conv2_.forward(y), training));
    y = bn3_.forward(conv3_.forward(y), training);
    const nn::Tensor skip = has_down_ ? down_bn_.forward(down_conv_.forward(x), training) : x;
    return nn::relu(nn::add(y, skip));
  }

  void collect(nn::StateList& state, const std::string& prefix) {
    conv1_.collect(state, prefix + ".conv1");
    bn1_.collect(state, prefix + ".bn1");
    conv2_.collect(state, prefix + ".conv2");
    bn2_.collect(state, prefix + ".bn2");
    conv3_.collect(state, prefix + ".conv3");
    bn3_.collect(state, prefix + ".bn3");
    if (has_down_) {
      down_conv_.collect(state, prefix + ".downsample.0");
      down_bn_.collect(state, prefix + ".downsample.1");
    }
  }

 private:
  nn::Conv2d conv1_;
  nn::BatchNorm2d bn1_;
  nn::Conv2d conv2_;
  nn::BatchNorm2d bn2_;
  nn::Conv2d conv3_;
  nn::BatchNorm2d bn3_;
  bool has_down_ = false;
  nn::Conv2d down_conv_;
  nn::BatchNorm2d down_bn_;
};

// ResNet-50 ({3,4,6,3}, groups 1) and ResNeXt-101 32x8d ({3,4,23,3}).
// f_0 is the max-pooled stem, f_1..f_4 the four residual stages.
class ResidualTrunk : public Trunk {
 public:
  ResidualTrunk(std::array<int, 4> blocks, int groups, int width_per_group, Rng& rng)
      : stem_conv_(3, 64, 7, rng, nn::ConvSpec{2, 3, 1}), stem_bn_(64) {
    int in = 64;
    const std::array<int, 4> planes = {64, 128, 256, 512};
    for (int s = 0; s < 4; ++s) {
      const int width = planes[s] * width_per_group / 64 * groups;
      for (int b = 0; b < blocks[s]; ++b) {
        const int stride = (b == 0 && s > 0) ? 2 : 1;
        stages_[s].emplace_back(in, planes[s], stride, groups, width, rng);
        in = planes[s] * 4;
      }
    }
  }

  std::vector<nn::Tensor> forward(const nn::Tensor& image, bool training) override {
    std::vector<nn::Tensor> f(kPyramidLevels);
    f[0] = nn::max_pool2d(nn::relu(stem_bn_.forward(stem_conv_.forward(image), training)), 3, 2, 1);
    nn::Tensor x = f[0];
    for (int s = 0; s < 4; ++s) {
      for (auto& block : stages_[s]) x = block.forward(x, training);
      f[s + 1] = x;
    }
    return f;
  }

  std::vector<int> channels() const override { return {64, 256, 512, 1024, 2048}; }

  void collect(nn::StateList& state, const std::string& prefix) override {
    stem_conv_.collect(state, prefix + ".conv1");
    stem_bn_.collect(state, prefix + ".bn1");
    for (int s = 0; s < 4; ++s) {
      for (std::size_t b = 0; b < stages_[s].size(); ++b) {
        stages_[s][b].collect(state, prefix + ".layer" + std::to_string(s + 1) + "." + std::to_string(b));
      }
    }
  }

 private:
  nn::Conv2d stem_conv_;
  nn::BatchNorm2d stem_bn_;
  std::array<std::vector<Bottleneck>, 4> stages_;
};

}  // namespace

BackboneVariant parse_backbone_variant(const std::string& s) {
  if (s == "resnet50") return BackboneVariant::kResNet50;
  if (s == "resnext101") return BackboneVariant::kResNeXt101;
  if (s == "tiny_random") return BackboneVariant::kTinyRandom;
  throw ConfigError("unknown backbone '" + s + "' (expected resnet50|resnext101|tiny_random)");
}

std::string to_string(BackboneVariant v) {
  switch (v) {
    case BackboneVariant::kResNet50: return "resnet50";
    case BackboneVariant::kResNeXt101: return "resnext101";
    case BackboneVariant::kTinyRandom: return "tiny_random";
  }
  return "unknown";
}

void BackboneConfig::validate() const {
  if (reduced_channels < 8) {
    throw ConfigError("reduced_channels must be >= 8, got " + std::to_string(reduced_channels));
  }
}

Backbone::Backbone(const BackboneConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  switch (config_.variant) {
    case BackboneVariant::kTinyRandom:
      trunk_ = std::make_unique<TinyTrunk>(rng);
      break;
    case BackboneVariant::kResNet50:
      trunk_ = std::make_unique<ResidualTrunk>(std::array<int, 4>{3, 4, 6, 3}, 1, 64, rng);
      break;
    case BackboneVariant::kResNeXt101:
      trunk_ = std::make_unique<ResidualTrunk>(std::array<int, 4>{3, 4, 23, 3}, 32, 8, rng);
      break;
  }
  for (int c : trunk_->channels()) reduce_.emplace_back(c, config_.reduced_channels, rng);
  if (config_.pretrained_weights_path) load_trunk_weights(*config_.pretrained_weights_path);
}

FeaturePyramid Backbone::extract(const nn::Tensor& image, bool training) {
  const nn::Shape& s = image.shape();
  if (s.c != 3) throw ShapeError("backbone expects 3-channel images, got " + s.str());
  if (s.h % 32 != 0 || s.w % 32 != 0 || s.h == 0 || s.w == 0) {
    throw ShapeError("backbone input size must be a positive multiple of 32, got " + s.str());
  }
  const auto raw = trunk_->forward(normalize_image(image), training);
  FeaturePyramid pyramid;
  for (int i = 0; i < kPyramidLevels; ++i) {
    pyramid.levels.push_back(reduce_[i].forward(raw[i], training));
    pyramid.strides.push_back(kPyramidStrides[i]);
  }
  return pyramid;
}

void Backbone::load_trunk_weights(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw IoError("pretrained weights not found: " + path.string());
  }
  nn::StateList state;
  trunk_->collect(state, "trunk");
  nn::load_state_file(path, state, true);
}

void Backbone::collect(nn::StateList& state, const std::string& prefix) {
  trunk_->collect(state, prefix + ".trunk");
  for (std::size_t i = 0; i < reduce_.size(); ++i) {
    reduce_[i].collect(state, prefix + ".reduce" + std::to_string(i));
  }
}

}  // namespace glassseg
