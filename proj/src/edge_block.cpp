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
#include "glassseg/edge_block.hpp"

#include "glassseg/errors.hpp"

namespace glassseg {

EdgeBlock::EdgeBlock(int channels, Rng& rng)
    : channels_(channels),
      fusion_(channels, channels, rng),
      head_(channels, 1, 1, rng, {}, true) {}

EdgeFusion EdgeBlock::fuse(const nn::Tensor& f_ccsa1, const nn::Tensor& f_ccsa5, bool training) {
  const nn::Shape& fine = f_ccsa1.shape();
  const nn::Shape& coarse = f_ccsa5.shape();
  if (fine.c != channels_ || coarse.c != channels_ || fine.n != coarse.n) {
    throw ShapeError("edge block: expected " + std::to_string(channels_) + " channels, got " +
                     fine.str() + " and " + coarse.str());
  }
  if (coarse.h > fine.h || coarse.w > fine.w) {
    throw ShapeError("edge block: coarse level " + coarse.str() + " larger than fine level " +
                     fine.str());
  }
  const nn::Tensor location = nn::resize_bilinear(f_ccsa5, fine.h, fine.w);
  EdgeFusion out;
  out.features = fusion_.forward(nn::add(f_ccsa1, location), training);
  out.edge_logit = head_.forward(out.features);
  out.edge_pred = nn::sigmoid(out.edge_logit);
  return out;
}

void EdgeBlock::collect(nn::StateList& state, const std::string& prefix) {
  fusion_.collect(state, prefix + ".fusion");
  head_.collect(state, prefix + ".head");
}

nn::Tensor enhance(const nn::Tensor& f_level, const nn::Tensor& f_edge) {
  const nn::Shape& s = f_level.shape();
  const nn::Shape& e = f_edge.shape();
  if (s.c != e.c || s.n != e.n) {
    throw ShapeError("enhance: channel mismatch " + s.str() + " vs " + e.str());
  }
  return nn::add(f_level, nn::resize_bilinear(f_edge, s.h, s.w));
}

}  // namespace glassseg
