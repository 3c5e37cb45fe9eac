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
#ifndef GLASSSEG_METRICS_HPP_
#define GLASSSEG_METRICS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>
#include <opencv2/core.hpp>

namespace glassseg {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t tn = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t n_p = 0;  // glass pixels in the ground truth
  std::int64_t n_n = 0;  // non-glass pixels in the ground truth

  std::int64_t total() const { return tp + tn + fp + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
};

/// Per-pixel indicator maps of the four outcomes (CV_8U, {0, 1}).
struct ConfusionMaps {
  cv::Mat tp;
  cv::Mat tn;
  cv::Mat fp;
  cv::Mat fn;
};

/// Binarizes `pred` at `threshold` (pred >= threshold is glass) and counts
/// outcomes against the binary `gt`. Both maps are single-channel and
/// [0, 1]-valued; 8-bit inputs are scaled by 1/255.
ConfusionCounts confusion(const cv::Mat& pred, const cv::Mat& gt, double threshold = 0.5,
                          ConfusionMaps* maps = nullptr);

/// tp / (tp + fp + fn). An empty union yields 1.
double iou(const ConfusionCounts& c);

/// Mean absolute difference of the soft maps.
double mae(const cv::Mat& pred, const cv::Mat& gt);

/// 100 * (1 - (tp/n_p + tn/n_n) / 2). Undefined (nullopt) when either class
/// is absent from the ground truth.
std::optional<double> ber(const ConfusionCounts& c);

struct ImageMetrics {
  std::string stem;
  ConfusionCounts counts;
  double iou = 0.0;
  double mae = 0.0;
  std::optional<double> ber;
};

struct MetricReport {
  std::vector<ImageMetrics> images;
  std::vector<std::string> unmatched;  // stems present in only one directory
  std::vector<std::string> errors;
  bool has_aggregates = false;
  ConfusionCounts pooled;
  double iou_pooled = 0.0;  // from summed confusion counts
  double iou_mean = 0.0;    // per-image average
  double mae_mean = 0.0;
  double ber_mean = 0.0;    // over images with both classes
  double ber_pooled = 0.0;
  std::size_t ber_samples = 0;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

/// Pairs `<stem>.*` prediction maps with `<stem>.png` ground-truth masks.
MetricReport evaluate_dataset(const std::filesystem::path& pred_dir,
                              const std::filesystem::path& gt_dir, double threshold = 0.5);

/// Writes metrics.json and metrics.csv into `out_dir`.
void write_report(const MetricReport& report, const std::filesystem::path& out_dir);

/// Writes <stem>.tp.png, .tn.png, .fp.png and .fn.png ({0, 255}) into `out_dir`.
ConfusionCounts export_decomposition(const cv::Mat& pred, const cv::Mat& gt,
                                     const std::filesystem::path& out_dir,
                                     const std::string& stem, double threshold = 0.5);

}  // namespace glassseg

#endif  // GLASSSEG_METRICS_HPP_
