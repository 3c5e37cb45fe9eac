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
#ifndef GLASSSEG_CCSA_HPP_
#define GLASSSEG_CCSA_HPP_

#include <string>

#include "glassseg/nn/layers.hpp"
#include "glassseg/nn/tensor.hpp"

namespace glassseg {

/// Row means followed by column means: (N, C, H, W) -> (N, C, 1, H + W).
/// Entry i < H averages row i over the width; entry H + x averages column x
/// over the height.
nn::Tensor strip_pool(const nn::Tensor& feature);

/// Softmax affinity between every query position and every strip.
///
/// `queries` is (N, C', H, W) and `key_strips` is (N, C', 1, L). The result is
/// (N, 1, H*W, L) with A[j, i] = exp(q_j . k_i) / sum_i' exp(q_j . k_i'), so
/// each of the H*W rows sums to one. Rows are shifted by their maximum before
/// exponentiation. Throws NumericError on non-finite input.
nn::Tensor strip_affinity(const nn::Tensor& queries, const nn::Tensor& key_strips);

/// Weighted sum of value strips per query: out[c, j] = sum_i A[j, i] V[c, i].
/// `attention` is (N, 1, H*W, L), `value_strips` is (N, C', 1, L); the result
/// is reshaped to (N, C', height, width).
nn::Tensor strip_aggregate(const nn::Tensor& attention, const nn::Tensor& value_strips,
                           int height, int width);

/// Criss-cross strip attention over one pyramid level.
///
/// Queries attend to the H + W strip-pooled keys rather than all H*W
/// positions, so the affinity map is H*W x (H + W) instead of (H*W)^2. The
/// attended C'-channel result is lifted back to C channels by a bias-free 1x1
/// projection and added to the input.
class CrissCrossStripAttention {
 public:
  CrissCrossStripAttention() = default;
  /// Requires attn_channels < channels.
  CrissCrossStripAttention(int channels, int attn_channels, Rng& rng);

  nn::Tensor forward(const nn::Tensor& f_ba) const;

  /// Also returns the affinity map of the last call for inspection.
  nn::Tensor forward(const nn::Tensor& f_ba, nn::Tensor* attention) const;

  void collect(nn::StateList& state, const std::string& prefix);

  int channels() const { return channels_; }
  int attn_channels() const { return attn_channels_; }

  nn::Conv2d& query() { return query_; }
  nn::Conv2d& key() { return key_; }
  nn::Conv2d& value() { return value_; }
  nn::Conv2d& output() { return output_; }
  const nn::Conv2d& query() const { return query_; }
  const nn::Conv2d& key() const { return key_; }
  const nn::Conv2d& value() const { return value_; }
  const nn::Conv2d& output() const { return output_; }

 private:
  int channels_ = 0;
  int attn_channels_ = 0;
  nn::Conv2d query_;
  nn::Conv2d key_;
  nn::Conv2d value_;
  nn::Conv2d output_;
};

}  // namespace glassseg

#endif  // GLASSSEG_CCSA_HPP_
