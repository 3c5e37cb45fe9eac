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
#include "glassseg/losses.hpp"

#include <algorithm>
#include <cmath>

#include "glassseg/errors.hpp"
#include "glassseg/nn/ops.hpp"

namespace glassseg {

namespace {

constexpr double kRangeTolerance = 1e-9;
constexpr double kLiteralGuard = 1e-8;

void check_pair(const nn::Tensor& pred, const nn::Tensor& gt, const nn::Tensor& weight,
                const char* what) {
  if (!(pred.shape() == gt.shape()) || !(pred.shape() == weight.shape())) {
    throw ShapeError(std::string(what) + ": shapes differ (pred " + pred.shape().str() + ", gt " +
                     gt.shape().str() + ", weight " + weight.shape().str() + ")");
  }
  for (double p : pred.data()) {
    if (!(p >= -kRangeTolerance && p <= 1.0 + kRangeTolerance)) {
      throw ValidationError(std::string(what) + ": prediction outside [0,1]");
    }
  }
}

}  // namespace

EdgeWeightSource parse_edge_weight_source(const std::string& s) {
  if (s == "edge_gt") return EdgeWeightSource::kEdgeGt;
  if (s == "glass_gt") return EdgeWeightSource::kGlassGt;
  throw ConfigError("unknown edge_weight_source '" + s + "' (expected edge_gt|glass_gt)");
}

std::string to_string(EdgeWeightSource s) {
  return s == EdgeWeightSource::kGlassGt ? "glass_gt" : "edge_gt";
}

nn::Tensor pixel_weight(const nn::Tensor& gt, int window, double gamma) {
  if (window < 1 || window % 2 == 0) {
    throw ConfigError("pixel weight window must be odd and positive, got " + std::to_string(window));
  }
  const nn::Shape& s = gt.shape();
  const int r = window / 2;
  const double area = static_cast<double>(window) * window;
  std::vector<double> out(gt.numel());
  std::vector<double> integral(static_cast<std::size_t>(s.h + 1) * (s.w + 1));
  auto gv = gt.data();
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  const int stride = s.w + 1;
  for (std::size_t p = 0; p < planes; ++p) {
    const double* g = gv.data() + p * s.plane();
    std::fill(integral.begin(), integral.end(), 0.0);
    for (int y = 0; y < s.h; ++y) {
      double row = 0.0;
      for (int x = 0; x < s.w; ++x) {
        row += g[static_cast<std::size_t>(y) * s.w + x];
        integral[static_cast<std::size_t>(y + 1) * stride + x + 1] =
            integral[static_cast<std::size_t>(y) * stride + x + 1] + row;
      }
    }
    for (int y = 0; y < s.h; ++y) {
      const int y0 = std::max(0, y - r);
      const int y1 = std::min(s.h, y + r + 1);
      for (int x = 0; x < s.w; ++x) {
        const int x0 = std::max(0, x - r);
        const int x1 = std::min(s.w, x + r + 1);
        const double box = integral[static_cast<std::size_t>(y1) * stride + x1] -
                           integral[static_cast<std::size_t>(y0) * stride + x1] -
                           integral[static_cast<std::size_t>(y1) * stride + x0] +
                           integral[static_cast<std::size_t>(y0) * stride + x0];
        const std::size_t j = static_cast<std::size_t>(y) * s.w + x;
        const double alpha = std::abs(box / area - g[j]);
        out[p * s.plane() + j] = 1.0 + gamma * alpha;
      }
    }
  }
  return nn::Tensor(s, std::move(out));
}

nn::Tensor weighted_bce(const nn::Tensor& pred, const nn::Tensor& gt, const nn::Tensor& weight,
                        bool literal_denominator) {
  check_pair(pred, gt, weight, "weighted_bce");
  const nn::Shape& s = pred.shape();
  const std::size_t item = static_cast<std::size_t>(s.c) * s.plane();
  auto pv = pred.data();
  auto gv = gt.data();
  auto wv = weight.data();
  std::vector<double> denom(static_cast<std::size_t>(s.n));
  double loss = 0.0;
  for (int n = 0; n < s.n; ++n) {
    double num = 0.0;
    double den = literal_denominator ? kLiteralGuard : 0.0;
    for (std::size_t i = n * item; i < (n + 1) * item; ++i) {
      const double p = std::clamp(pv[i], kProbEpsilon, 1.0 - kProbEpsilon);
      num -= wv[i] * (gv[i] * std::log(p) + (1.0 - gv[i]) * std::log(1.0 - p));
      den += literal_denominator ? wv[i] - 1.0 : wv[i];
    }
    denom[n] = den;
    loss += num / den;
  }
  loss /= s.n;
  return nn::Tensor::make_op(
      nn::Shape{}, {loss}, {pred, gt, weight}, [item, denom](nn::detail::Node& self) {
        auto& pp = *self.parents[0];
        const auto& g = self.parents[1]->value;
        const auto& w = self.parents[2]->value;
        auto& dp = pp.ensure_grad();
        const double scale = self.grad[0] / static_cast<double>(denom.size());
        for (std::size_t n = 0; n < denom.size(); ++n) {
          for (std::size_t i = n * item; i < (n + 1) * item; ++i) {
            const double p = pp.value[i];
            if (p <= kProbEpsilon || p >= 1.0 - kProbEpsilon) continue;
            dp[i] -= scale * w[i] * (g[i] / p - (1.0 - g[i]) / (1.0 - p)) / denom[n];
          }
        }
      });
}

nn::Tensor weighted_iou(const nn::Tensor& pred, const nn::Tensor& gt, const nn::Tensor& weight) {
  check_pair(pred, gt, weight, "weighted_iou");
  const nn::Shape& s = pred.shape();
  const std::size_t item = static_cast<std::size_t>(s.c) * s.plane();
  auto pv = pred.data();
  auto gv = gt.data();
  auto wv = weight.data();
  std::vector<double> inter(static_cast<std::size_t>(s.n));
  std::vector<double> uni(static_cast<std::size_t>(s.n));
  double loss = 0.0;
  for (int n = 0; n < s.n; ++n) {
    double i_sum = 0.0;
    double u_sum = 0.0;
    for (std::size_t i = n * item; i < (n + 1) * item; ++i) {
      i_sum += gv[i] * pv[i] * wv[i];
      u_sum += (gv[i] + pv[i] - gv[i] * pv[i]) * wv[i];
    }
    inter[n] = i_sum;
    uni[n] = u_sum;
    if (u_sum > 0.0) loss += 1.0 - i_sum / u_sum;
  }
  loss /= s.n;
  return nn::Tensor::make_op(
      nn::Shape{}, {loss}, {pred, gt, weight}, [item, inter, uni](nn::detail::Node& self) {
        auto& pp = *self.parents[0];
        const auto& g = self.parents[1]->value;
        const auto& w = self.parents[2]->value;
        auto& dp = pp.ensure_grad();
        const double scale = self.grad[0] / static_cast<double>(inter.size());
        for (std::size_t n = 0; n < inter.size(); ++n) {
          const double u = uni[n];
          if (u <= 0.0) continue;
          for (std::size_t i = n * item; i < (n + 1) * item; ++i) {
            dp[i] -= scale * (g[i] * w[i] * u - inter[n] * (1.0 - g[i]) * w[i]) / (u * u);
          }
        }
      });
}

MistakeLoss mistake_loss(const nn::Tensor& fn_pred, const nn::Tensor& fp_pred,
                         const nn::Tensor& fn_gt, const nn::Tensor& fp_gt,
                         const nn::Tensor& weight, bool literal_denominator) {
  return mistake_loss(fn_pred, fp_pred, fn_gt, fp_gt, weight, weight, literal_denominator);
}

MistakeLoss mistake_loss(const nn::Tensor& fn_pred, const nn::Tensor& fp_pred,
                         const nn::Tensor& fn_gt, const nn::Tensor& fp_gt,
                         const nn::Tensor& fn_weight, const nn::Tensor& fp_weight,
                         bool literal_denominator) {
  return {weighted_bce(fn_pred, fn_gt, fn_weight, literal_denominator),
          weighted_bce(fp_pred, fp_gt, fp_weight, literal_denominator)};
}

double combine_total(const LossBreakdown& parts, const LossWeights& weights) {
  const std::size_t scales = weights.lambda_per_scale.size();
  if (parts.glass_per_scale.size() != scales || parts.fn_per_scale.size() != scales ||
      parts.fp_per_scale.size() != scales) {
    throw ConfigError("loss breakdown has a different number of scales than lambda");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < scales; ++i) {
    total += weights.lambda_per_scale[i] *
             (parts.glass_per_scale[i] + parts.fn_per_scale[i] + parts.fp_per_scale[i]);
  }
  return total + parts.edge;
}

TotalLoss total_loss(std::span<const ScalePrediction> predictions, const nn::Tensor& edge_pred,
                     std::span<const ScaleTarget> targets, const nn::Tensor& edge_gt,
                     const LossWeights& weights, const LossOptions& options) {
  const std::size_t scales = weights.lambda_per_scale.size();
  if (predictions.size() != scales || targets.size() != scales) {
    throw ConfigError("total_loss: " + std::to_string(predictions.size()) + " predictions, " +
                      std::to_string(targets.size()) + " targets, " + std::to_string(scales) +
                      " lambda weights");
  }
  const bool literal = options.eq9_literal;
  TotalLoss out;
  nn::Tensor total(nn::Shape{}, 0.0);
  for (std::size_t i = 0; i < scales; ++i) {
    const ScalePrediction& p = predictions[i];
    const ScaleTarget& t = targets[i];
    if (t.fn.size() != t.fp.size()) {
      throw ConfigError("total_loss: FN and FP target counts differ at scale " + std::to_string(i));
    }
    const nn::Tensor w = pixel_weight(t.glass, options.window, weights.gamma);
    const nn::Tensor glass =
        nn::add(weighted_bce(p.glass, t.glass, w, literal), weighted_iou(p.glass, t.glass, w));

    nn::Tensor fn(nn::Shape{}, 0.0);
    nn::Tensor fp(nn::Shape{}, 0.0);
    if (!t.fn.empty()) {
      const double share = 1.0 / static_cast<double>(t.fn.size());
      for (std::size_t k = 0; k < t.fn.size(); ++k) {
        const MistakeLoss m = mistake_loss(p.fn, p.fp, t.fn[k], t.fp[k],
                                           pixel_weight(t.fn[k], options.window, weights.gamma),
                                           pixel_weight(t.fp[k], options.window, weights.gamma),
                                           literal);
        fn = nn::add(fn, nn::affine(m.fn, share));
        fp = nn::add(fp, nn::affine(m.fp, share));
      }
    }
    out.breakdown.glass_per_scale.push_back(glass.item());
    out.breakdown.fn_per_scale.push_back(fn.item());
    out.breakdown.fp_per_scale.push_back(fp.item());
    total = nn::add(total, nn::affine(nn::add(glass, nn::add(fn, fp)), weights.lambda_per_scale[i]));
  }

  nn::Tensor edge_source = edge_gt;
  if (options.edge_weight_source == EdgeWeightSource::kGlassGt) {
    edge_source = targets.front().glass;
    if (!(edge_source.shape() == edge_gt.shape())) {
      edge_source = nn::resize_nearest(edge_source, edge_gt.shape().h, edge_gt.shape().w);
    }
  }
  const nn::Tensor edge =
      weighted_bce(edge_pred, edge_gt, pixel_weight(edge_source, options.window, weights.gamma), literal);
  out.breakdown.edge = edge.item();
  out.total = nn::add(total, edge);
  out.breakdown.total = out.total.item();
  return out;
}

}  // namespace glassseg
