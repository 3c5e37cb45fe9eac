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
#ifndef GLASSSEG_MISTAKE_CORRECTION_HPP_
#define GLASSSEG_MISTAKE_CORRECTION_HPP_

#include <span>
#include <string>
#include <vector>

#include "glassseg/nn/layers.hpp"

namespace glassseg {

/// How the FN branch reverses the enhanced features.
enum class ReverseMode {
  kSigmoidComplement,  // 1 - sigmoid(f)
  kNegate,             // -f
};

ReverseMode parse_reverse_mode(const std::string& s);
std::string to_string(ReverseMode mode);

struct McLevelOutput {
  nn::Tensor refined_features;
  nn::Tensor glass_logit;
  nn::Tensor glass_pred;
  nn::Tensor fn_logit;
  nn::Tensor fn_pred;
  nn::Tensor fp_logit;
  nn::Tensor fp_pred;
  nn::Tensor fn_features;
  nn::Tensor fp_features;
};

/// Intermediate branch values, filled on request.
struct McTrace {
  nn::Tensor reversed;   // f_rev
  nn::Tensor masked_fn;  // f_rev * fn_pred
  nn::Tensor augmented;  // f_en + masked_fn
  nn::Tensor masked_fp;  // f_en * fp_pred
};

/// One mistake-correction step.
///
/// FN branch: f_rev = reverse(f_en); fn_feat = ConvBlock([f_rev, up(higher.fn)]);
/// fn_pred = sigmoid(head(fn_feat)); f_aug = f_en + f_rev * fn_pred.
/// FP branch: fp_feat = ConvBlock([f_en, up(higher.fp)]);
/// fp_pred = sigmoid(head(fp_feat)); refined = f_aug - f_en * fp_pred.
/// glass_pred = sigmoid(head(refined)).
///
/// The topmost module has no higher level and its ConvBlocks take only the
/// C-channel input.
class MistakeCorrection {
 public:
  MistakeCorrection() = default;
  MistakeCorrection(int channels, bool has_higher, Rng& rng,
                    ReverseMode reverse = ReverseMode::kSigmoidComplement);

  McLevelOutput forward(const nn::Tensor& f_en, const McLevelOutput* higher, bool training,
                        McTrace* trace = nullptr);

  void collect(nn::StateList& state, const std::string& prefix);

  bool has_higher() const { return has_higher_; }
  int channels() const { return channels_; }
  nn::ConvBlock& fn_block() { return fn_block_; }
  nn::ConvBlock& fp_block() { return fp_block_; }
  nn::Conv2d& fn_head() { return fn_head_; }
  nn::Conv2d& fp_head() { return fp_head_; }
  nn::Conv2d& glass_head() { return glass_head_; }
  ReverseMode reverse_mode() const { return reverse_; }

 private:
  int channels_ = 0;
  bool has_higher_ = false;
  ReverseMode reverse_ = ReverseMode::kSigmoidComplement;
  nn::ConvBlock fn_block_;
  nn::ConvBlock fp_block_;
  nn::Conv2d fn_head_;
  nn::Conv2d fp_head_;
  nn::Conv2d glass_head_;
};

/// Runs `modules` over `enhanced` (both deepest level first), threading each
/// level's FN/FP features into the next finer level.
std::vector<McLevelOutput> correction_cascade(std::span<const nn::Tensor> enhanced,
                                              std::span<MistakeCorrection> modules,
                                              bool training);

}  // namespace glassseg

#endif  // GLASSSEG_MISTAKE_CORRECTION_HPP_
