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
#include "glassseg/mistake_correction.hpp"

#include "glassseg/errors.hpp"

namespace glassseg {

ReverseMode parse_reverse_mode(const std::string& s) {
  if (s == "sigmoid_complement") return ReverseMode::kSigmoidComplement;
  if (s == "negate") return ReverseMode::kNegate;
  throw ConfigError("unknown reverse_mode '" + s + "' (expected sigmoid_complement|negate)");
}

std::string to_string(ReverseMode mode) {
  return mode == ReverseMode::kNegate ? "negate" : "sigmoid_complement";
}

MistakeCorrection::MistakeCorrection(int channels, bool has_higher, Rng& rng, ReverseMode reverse)
    : channels_(channels),
      has_higher_(has_higher),
      reverse_(reverse),
      fn_block_(has_higher ? 2 * channels : channels, channels, rng),
      fp_block_(has_higher ? 2 * channels : channels, channels, rng),
      fn_head_(channels, 1, 1, rng, {}, true),
      fp_head_(channels, 1, 1, rng, {}, true),
      glass_head_(channels, 1, 1, rng, {}, true) {}

McLevelOutput MistakeCorrection::forward(const nn::Tensor& f_en, const McLevelOutput* higher,
                                         bool training, McTrace* trace) {
  const nn::Shape& s = f_en.shape();
  if (s.c != channels_) {
    throw ShapeError("mistake correction expects " + std::to_string(channels_) +
                     " channels, got " + s.str());
  }
  if ((higher != nullptr) != has_higher_) {
    throw ShapeError(has_higher_ ? "mistake correction: missing higher-level features"
                                 : "mistake correction: topmost level given higher features");
  }
  auto with_higher = [&](const nn::Tensor& x, const nn::Tensor& h) {
    if (higher == nullptr) return x;
    if (h.shape().c != channels_ || h.shape().n != s.n) {
      throw ShapeError("mistake correction: higher features " + h.shape().str() +
                       " do not match " + s.str());
    }
    return nn::concat_channels(x, nn::resize_bilinear(h, s.h, s.w));
  };

  McLevelOutput out;
  const nn::Tensor reversed = reverse_ == ReverseMode::kNegate
                                  ? nn::affine(f_en, -1.0)
                                  : nn::affine(nn::sigmoid(f_en), -1.0, 1.0);
  out.fn_features = fn_block_.forward(
      with_higher(reversed, higher ? higher->fn_features : nn::Tensor{}), training);
  out.fn_logit = fn_head_.forward(out.fn_features);
  out.fn_pred = nn::sigmoid(out.fn_logit);
  const nn::Tensor masked_fn = nn::mul(reversed, out.fn_pred);
  const nn::Tensor augmented = nn::add(f_en, masked_fn);

  out.fp_features = fp_block_.forward(
      with_higher(f_en, higher ? higher->fp_features : nn::Tensor{}), training);
  out.fp_logit = fp_head_.forward(out.fp_features);
  out.fp_pred = nn::sigmoid(out.fp_logit);
  const nn::Tensor masked_fp = nn::mul(f_en, out.fp_pred);
  out.refined_features = nn::sub(augmented, masked_fp);

  out.glass_logit = glass_head_.forward(out.refined_features);
  out.glass_pred = nn::sigmoid(out.glass_logit);
  nn::check_finite(out.glass_logit, "mistake correction glass logits");

  if (trace != nullptr) {
    trace->reversed = reversed;
    trace->masked_fn = masked_fn;
    trace->augmented = augmented;
    trace->masked_fp = masked_fp;
  }
  return out;
}

void MistakeCorrection::collect(nn::StateList& state, const std::string& prefix) {
  fn_block_.collect(state, prefix + ".fn_block");
  fp_block_.collect(state, prefix + ".fp_block");
  fn_head_.collect(state, prefix + ".fn_head");
  fp_head_.collect(state, prefix + ".fp_head");
  glass_head_.collect(state, prefix + ".glass_head");
}

std::vector<McLevelOutput> correction_cascade(std::span<const nn::Tensor> enhanced,
                                              std::span<MistakeCorrection> modules,
                                              bool training) {
  if (enhanced.size() != modules.size()) {
    throw ConfigError("correction cascade: " + std::to_string(enhanced.size()) +
                      " levels but " + std::to_string(modules.size()) + " modules");
  }
  std::vector<McLevelOutput> outputs;
  outputs.reserve(enhanced.size());
  for (std::size_t i = 0; i < enhanced.size(); ++i) {
    const McLevelOutput* higher = i == 0 ? nullptr : &outputs.back();
    outputs.push_back(modules[i].forward(enhanced[i], higher, training));
  }
  return outputs;
}

}  // namespace glassseg
