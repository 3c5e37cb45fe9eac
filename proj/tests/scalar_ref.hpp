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
#ifndef GLASSSEG_TESTS_SCALAR_REF_HPP_
#define GLASSSEG_TESTS_SCALAR_REF_HPP_

#include <cmath>
#include <vector>

#include "glassseg/nn/layers.hpp"

// Plain-loop references over single images stored as flat CHW vectors.
namespace scalar_ref {

using Map = std::vector<double>;  // C x H x W

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Map from_tensor(const glassseg::nn::Tensor& t, int n = 0) {
  const auto s = t.shape();
  const std::size_t per = static_cast<std::size_t>(s.c) * s.h * s.w;
  return Map(t.data().begin() + n * per, t.data().begin() + (n + 1) * per);
}

/// 3x3, stride 1, zero padding 1, no bias; then eval-mode batch norm and ReLU.
inline Map conv_block_eval(const Map& x, int cin, int h, int w, glassseg::nn::ConvBlock& block) {
  const auto& wt = block.conv().weight();
  const int cout = wt.shape().n;
  const auto& st = block.norm().stats();
  const auto gamma = block.norm().gamma().data();
  const auto beta = block.norm().beta().data();
  Map out(static_cast<std::size_t>(cout) * h * w);
  for (int o = 0; o < cout; ++o)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        double acc = 0;
        for (int c = 0; c < cin; ++c)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int yy = y + ky - 1, xs = xx + kx - 1;
              if (yy < 0 || yy >= h || xs < 0 || xs >= w) continue;
              acc += wt.at(o, c, ky, kx) * x[(static_cast<std::size_t>(c) * h + yy) * w + xs];
            }
        const double norm = (acc - st.running_mean[o]) / std::sqrt(st.running_var[o] + st.eps);
        out[(static_cast<std::size_t>(o) * h + y) * w + xx] = std::max(0.0, gamma[o] * norm + beta[o]);
      }
  return out;
}

/// 1x1 convolution to a single channel, with bias.
inline Map head(const Map& x, int cin, int h, int w, glassseg::nn::Conv2d& conv) {
  Map out(static_cast<std::size_t>(h) * w);
  const double b = conv.bias().data()[0];
  for (int j = 0; j < h * w; ++j) {
    double acc = b;
    for (int c = 0; c < cin; ++c) acc += conv.weight().at(0, c, 0, 0) * x[static_cast<std::size_t>(c) * h * w + j];
    out[j] = acc;
  }
  return out;
}

/// Half-pixel bilinear resampling of every channel.
inline Map bilinear(const Map& x, int c, int h, int w, int oh, int ow) {
  auto coord = [](int dst, int in, int out, int& i0, int& i1, double& f) {
    double src = (dst + 0.5) * static_cast<double>(in) / out - 0.5;
    if (src < 0) src = 0;
    i0 = std::min(static_cast<int>(std::floor(src)), in - 1);
    i1 = std::min(i0 + 1, in - 1);
    f = src - i0;
  };
  Map out(static_cast<std::size_t>(c) * oh * ow);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < oh; ++y)
      for (int xx = 0; xx < ow; ++xx) {
        int y0, y1, x0, x1;
        double fy, fx;
        coord(y, h, oh, y0, y1, fy);
        coord(xx, w, ow, x0, x1, fx);
        auto at = [&](int r, int q) { return x[(static_cast<std::size_t>(ch) * h + r) * w + q]; };
        out[(static_cast<std::size_t>(ch) * oh + y) * ow + xx] =
            (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) + fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
      }
  return out;
}

inline Map concat(const Map& a, const Map& b) {
  Map out(a);
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

/// Gives a block's batch norm non-trivial running statistics.
inline void randomize_stats(glassseg::nn::ConvBlock& block, glassseg::Rng& rng) {
  auto& st = block.norm().stats();
  for (double& m : st.running_mean) m = rng.uniform(-0.3, 0.3);
  for (double& v : st.running_var) v = rng.uniform(0.5, 2.0);
  for (double& g : block.norm().gamma().data()) g = rng.uniform(0.5, 1.5);
  for (double& b : block.norm().beta().data()) b = rng.uniform(-0.2, 0.2);
}

}  // namespace scalar_ref

#endif  // GLASSSEG_TESTS_SCALAR_REF_HPP_
