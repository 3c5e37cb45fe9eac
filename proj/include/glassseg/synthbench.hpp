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
#ifndef GLASSSEG_SYNTHBENCH_HPP_
#define GLASSSEG_SYNTHBENCH_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>

#include <opencv2/core.hpp>

namespace glassseg {

enum class BackgroundTexture { kNoise, kGradients, kShapes };

BackgroundTexture parse_background_texture(const std::string& s);
std::string to_string(BackgroundTexture t);

struct SynthConfig {
  int n_images = 16;
  cv::Size size = {64, 64};
  std::pair<double, double> glass_alpha_range = {0.15, 0.35};
  int frame_width_px = 2;
  BackgroundTexture background_texture = BackgroundTexture::kShapes;
  std::uint64_t seed = 0;
  int edge_band_radius = 2;

  void validate() const;
};

/// One procedurally generated scene. All images are CV_32FC3 RGB in [0, 1].
struct SynthScene {
  cv::Mat background;  // pristine texture
  cv::Mat blended;     // background with the glass region brightened by alpha
  cv::Mat image;       // blended plus frame, specular streak and distractor
  cv::Mat mask;        // CV_32FC1 {0, 1}, the blended region
  double alpha = 0.0;
  /// Stand-ins for two imperfect baseline segmenters (CV_32FC1 {0, 1}).
  cv::Mat baseline_eroded;   // shrunk mask plus a spurious blob
  cv::Mat baseline_dilated;  // grown mask with a hole
};

/// Background texture in [0.05, 0.35] so a brightness shift of up to 0.6
/// stays in range.
SynthScene synthesize_scene(const SynthConfig& config, std::uint64_t scene_seed);

/// Writes <out_root>/{image,mask,edge,pred/<model>,fp/<model>,fn/<model>}
/// and <out_root>/manifest.jsonl; returns the manifest path. Deterministic
/// in `config.seed`.
std::filesystem::path generate(const SynthConfig& config, const std::filesystem::path& out_root);

}  // namespace glassseg

#endif  // GLASSSEG_SYNTHBENCH_HPP_
