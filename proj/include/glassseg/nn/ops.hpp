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
#ifndef GLASSSEG_NN_OPS_HPP_
#define GLASSSEG_NN_OPS_HPP_

#include <vector>

#include "glassseg/nn/tensor.hpp"

namespace glassseg::nn {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);

/// Elementwise product. `b` may have a single channel, in which case it is
/// broadcast over the channels of `a`.
Tensor mul(const Tensor& a, const Tensor& b);

/// scale * a + shift.
Tensor affine(const Tensor& a, double scale, double shift = 0.0);

Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);

Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Sum of all elements as a scalar.
Tensor sum(const Tensor& a);

struct ConvSpec {
  int stride = 1;
  int pad = 0;
  int groups = 1;
};

/// 2-D cross-correlation. `weight` is (out, in/groups, k, k); `bias` may be
/// undefined or (1, out, 1, 1).
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, ConvSpec spec);

struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Per-channel normalization. In training mode batch statistics are used and
/// the running estimates are updated; otherwise running estimates are used.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, bool training);

Tensor max_pool2d(const Tensor& x, int kernel, int stride, int pad);

/// Bilinear resampling with half-pixel centers (align_corners = false),
/// used for both up- and down-sampling.
Tensor resize_bilinear(const Tensor& x, int out_h, int out_w);

/// Nearest-neighbour resampling (half-pixel centers). Not differentiable.
Tensor resize_nearest(const Tensor& x, int out_h, int out_w);

/// Horizontal mirror of every plane. Differentiable.
Tensor flip_horizontal(const Tensor& x);

}  // namespace glassseg::nn

#endif  // GLASSSEG_NN_OPS_HPP_
