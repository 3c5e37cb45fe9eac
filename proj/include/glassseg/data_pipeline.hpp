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
#ifndef GLASSSEG_DATA_PIPELINE_HPP_
#define GLASSSEG_DATA_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>

#include "glassseg/nn/tensor.hpp"

namespace glassseg {

namespace fs = std::filesystem;

/// One training/evaluation sample on disk. Auxiliary maps share the mask size.
struct SampleRecord {
  fs::path image_path;
  fs::path mask_path;
  std::optional<fs::path> edge_path;
  std::vector<fs::path> fp_paths;  // one per baseline model
  std::vector<fs::path> fn_paths;

  std::string stem() const { return image_path.stem().string(); }
};

struct ColorJitter {
  double brightness = 0.1;
  double contrast = 0.1;
  double saturation = 0.1;
  double hue = 0.1;
};

struct AugmentationConfig {
  double horizontal_flip_prob = 0.5;
  ColorJitter color_jitter;
  std::pair<double, double> crop_scale_range = {0.75, 1.0};
  cv::Size target_size = {416, 416};

  /// No flip, no jitter, full-frame crop.
  static AugmentationConfig identity(cv::Size target);
  void validate() const;
};

/// Decoded sample before augmentation. `image` is CV_32FC3 RGB in [0, 1];
/// every map is CV_32FC1 with values in {0, 1}.
struct RawSample {
  std::string stem;
  cv::Mat image;
  cv::Mat mask;
  cv::Mat edge;  // empty when the record has no edge map
  std::vector<cv::Mat> fp;
  std::vector<cv::Mat> fn;
};

/// Augmented sample at the target size; same layout as RawSample.
using Sample = RawSample;

/// Crop rectangle in source pixels, then optional mirror, then resize.
struct GeometricTransform {
  cv::Rect crop;
  bool flip = false;
  cv::Size target;
};

struct ColorTransform {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  double hue_shift = 0.0;  // fraction of a full turn
};

/// Reads a colour image as CV_32FC3 RGB in [0, 1].
cv::Mat read_image(const fs::path& path);

/// Reads a single-channel 8-bit map and binarizes it (>= 128 -> 1).
cv::Mat read_mask(const fs::path& path);

/// Reads an 8-bit grayscale map as CV_32FC1 in [0, 1] without thresholding.
cv::Mat read_soft_map(const fs::path& path);

/// Writes a [0, 1] map as 8-bit PNG (value * 255, rounded).
void write_map(const fs::path& path, const cv::Mat& map);

/// Decodes every file of `record`. Throws DecodeError naming the path and
/// AlignmentError on size mismatch.
RawSample decode_sample(const SampleRecord& record);

/// Draws the per-sample random transform. Draw order is fixed: flip, crop
/// scale, crop x, crop y, brightness, contrast, saturation, hue.
std::pair<GeometricTransform, ColorTransform> sample_transform(const AugmentationConfig& config,
                                                               cv::Size source,
                                                               std::uint64_t seed);

/// Applies the same geometry to every map (bilinear for the image, nearest
/// for masks, which are re-binarized) and colour only to the image.
Sample apply_transform(const RawSample& raw, const GeometricTransform& geometry,
                       const ColorTransform& color = {});

Sample augment(const RawSample& raw, const AugmentationConfig& config, std::uint64_t seed);

Sample load_sample(const SampleRecord& record, const AugmentationConfig& config,
                   std::uint64_t seed);

/// 1 at every pixel whose (2r+1)^2 window (clipped to the image) contains
/// both glass and non-glass pixels, i.e. dilation XOR erosion. Input must be
/// binary (CV_8U or CV_32F); output is CV_32FC1.
cv::Mat generate_edge_gt(const cv::Mat& mask, int band_radius = 2);

struct MistakeMaps {
  cv::Mat fp;  // CV_32FC1 in {0, 1}
  cv::Mat fn;
};

/// Splits (binarize(prediction) - gt) into its positive (false positive) and
/// negative (false negative) parts.
MistakeMaps generate_mistake_gt(const cv::Mat& prediction, const cv::Mat& gt,
                                double binarize_threshold = 0.5);

/// Dataset directory convention:
///   <root>/image/<stem>.{jpg,png}  <root>/mask/<stem>.png
///   <root>/edge/<stem>.png  <root>/fp/<model>/<stem>.png  <root>/fn/<model>/<stem>.png
std::vector<SampleRecord> scan_dataset(const fs::path& root);

/// One JSON object per line with the SampleRecord fields.
std::vector<SampleRecord> read_manifest(const fs::path& path);
void write_manifest(const fs::path& path, std::span<const SampleRecord> records);

/// (N, 3, H, W) tensor of the images of `samples`.
nn::Tensor image_batch(std::span<const Sample> samples);

/// (N, 1, H, W) tensor of one map per sample.
nn::Tensor map_batch(std::span<const cv::Mat> maps);

/// cv::Mat view of one plane of a (N, 1, H, W) tensor as CV_32FC1.
cv::Mat tensor_plane(const nn::Tensor& t, int n, int c = 0);

/// Lists image files (png, jpg, jpeg, bmp) in a directory, sorted by name.
std::vector<fs::path> list_images(const fs::path& dir);

}  // namespace glassseg

#endif  // GLASSSEG_DATA_PIPELINE_HPP_
