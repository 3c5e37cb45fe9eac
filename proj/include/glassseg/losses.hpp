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
#ifndef GLASSSEG_LOSSES_HPP_
#define GLASSSEG_LOSSES_HPP_

#include <span>
#include <string>
#include <vector>

#include "glassseg/nn/tensor.hpp"

namespace glassseg {

struct LossWeights {
  std::vector<double> lambda_per_scale = {4.0, 4.0, 2.0, 1.0};  // finest scale first
  double gamma = 5.0;
};

enum class EdgeWeightSource { kEdgeGt, kGlassGt };

EdgeWeightSource parse_edge_weight_source(const std::string& s);
std::string to_string(EdgeWeightSource s);

struct LossOptions {
  int window = 31;
  /// Use the printed normalizer sum(W - 1) (guarded by 1e-8) instead of sum(W).
  bool eq9_literal = false;
  EdgeWeightSource edge_weight_source = EdgeWeightSource::kEdgeGt;
};

inline constexpr double kProbEpsilon = 1e-7;

/// Boundary-aware pixel weights W = 1 + gamma * |box_mean(gt) - gt| with a
/// zero-padded window x window box (normalized by window^2). `gt` is
/// (N, 1, H, W) and binary. Not differentiable.
nn::Tensor pixel_weight(const nn::Tensor& gt, int window, double gamma);

/// Weight-normalized binary cross entropy, averaged over the batch:
///   -sum_j W_j [G_j log P_j + (1 - G_j) log(1 - P_j)] / sum_j W_j
/// P is clamped to [1e-7, 1 - 1e-7]. With `literal_denominator` the
/// normalizer is sum_j (W_j - 1) + 1e-8.
nn::Tensor weighted_bce(const nn::Tensor& pred, const nn::Tensor& gt, const nn::Tensor& weight,
                        bool literal_denominator = false);

/// 1 - sum(G P W) / sum((G + P - G P) W), averaged over the batch. An image
/// whose weighted union is zero contributes 0.
nn::Tensor weighted_iou(const nn::Tensor& pred, const nn::Tensor& gt, const nn::Tensor& weight);

struct MistakeLoss {
  nn::Tensor fn;
  nn::Tensor fp;
};

/// Weighted BCE of each mistake prediction against its mistake map.
MistakeLoss mistake_loss(const nn::Tensor& fn_pred, const nn::Tensor& fp_pred,
                         const nn::Tensor& fn_gt, const nn::Tensor& fp_gt,
                         const nn::Tensor& weight, bool literal_denominator = false);

MistakeLoss mistake_loss(const nn::Tensor& fn_pred, const nn::Tensor& fp_pred,
                         const nn::Tensor& fn_gt, const nn::Tensor& fp_gt,
                         const nn::Tensor& fn_weight, const nn::Tensor& fp_weight,
                         bool literal_denominator = false);

struct LossBreakdown {
  double total = 0.0;
  std::vector<double> glass_per_scale;
  std::vector<double> fn_per_scale;
  std::vector<double> fp_per_scale;
  double edge = 0.0;
};

/// sum_i lambda_i (glass_i + fn_i + fp_i) + edge.
double combine_total(const LossBreakdown& parts, const LossWeights& weights);

/// Predictions of one supervised scale, at the same resolution as its target.
struct ScalePrediction {
  nn::Tensor glass;
  nn::Tensor fn;
  nn::Tensor fp;
};

/// Ground truth for one scale. `fn`/`fp` hold one map per baseline model;
/// their losses are averaged over baselines. Empty lists disable the
/// mistake terms.
struct ScaleTarget {
  nn::Tensor glass;
  std::vector<nn::Tensor> fn;
  std::vector<nn::Tensor> fp;
};

struct TotalLoss {
  nn::Tensor total;
  LossBreakdown breakdown;
};

TotalLoss total_loss(std::span<const ScalePrediction> predictions, const nn::Tensor& edge_pred,
                     std::span<const ScaleTarget> targets, const nn::Tensor& edge_gt,
                     const LossWeights& weights, const LossOptions& options = {});

}  // namespace glassseg

#endif  // GLASSSEG_LOSSES_HPP_
