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
#include "glassseg/ccsa.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "glassseg/errors.hpp"

namespace glassseg {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

}  // namespace

nn::Tensor strip_pool(const nn::Tensor& feature) {
  const nn::Shape& s = feature.shape();
  const int strips = s.h + s.w;
  const nn::Shape so{s.n, s.c, 1, strips};
  std::vector<double> out(so.numel(), 0.0);
  auto fv = feature.data();
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = fv.data() + p * s.plane();
    double* dst = out.data() + p * strips;
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        const double v = src[static_cast<std::size_t>(y) * s.w + x];
        dst[y] += v;
        dst[s.h + x] += v;
      }
    }
    for (int y = 0; y < s.h; ++y) dst[y] /= s.w;
    for (int x = 0; x < s.w; ++x) dst[s.h + x] /= s.h;
  }
  return nn::Tensor::make_op(so, std::move(out), {feature}, [s, strips, planes](nn::detail::Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t q = 0; q < planes; ++q) {
      const double* d = self.grad.data() + q * strips;
      double* gx = g.data() + q * s.plane();
      for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
          gx[static_cast<std::size_t>(y) * s.w + x] += d[y] / s.w + d[s.h + x] / s.h;
        }
      }
    }
  });
}

nn::Tensor strip_affinity(const nn::Tensor& queries, const nn::Tensor& key_strips) {
  const nn::Shape& sq = queries.shape();
  const nn::Shape& sk = key_strips.shape();
  if (sq.n != sk.n || sq.c != sk.c || sk.h != 1) {
    throw ShapeError("strip_affinity: queries " + sq.str() + " incompatible with key strips " +
                     sk.str());
  }
  nn::check_finite(queries, "strip_affinity queries");
  nn::check_finite(key_strips, "strip_affinity key strips");
  const int positions = sq.h * sq.w;
  const int strips = sk.w;
  const int dim = sq.c;
  const nn::Shape so{sq.n, 1, positions, strips};
  std::vector<double> out(so.numel());
  auto qv = queries.data();
  auto kv = key_strips.data();
  for (int n = 0; n < sq.n; ++n) {
    ConstMapMat q(qv.data() + static_cast<std::size_t>(n) * dim * positions, dim, positions);
    ConstMapMat k(kv.data() + static_cast<std::size_t>(n) * dim * strips, dim, strips);
    MapMat a(out.data() + static_cast<std::size_t>(n) * positions * strips, positions, strips);
    a.noalias() = q.transpose() * k;
    for (int j = 0; j < positions; ++j) {
      const double top = a.row(j).maxCoeff();
      double total = 0.0;
      for (int i = 0; i < strips; ++i) {
        const double e = std::exp(a(j, i) - top);
        a(j, i) = e;
        total += e;
      }
      a.row(j) /= total;
    }
  }
  return nn::Tensor::make_op(
      so, std::move(out), {queries, key_strips}, [n_batch = sq.n, dim, positions, strips](nn::detail::Node& self) {
        auto& pq = *self.parents[0];
        auto& pk = *self.parents[1];
        RowMat dlogits(positions, strips);
        for (int n = 0; n < n_batch; ++n) {
          const std::size_t aoff = static_cast<std::size_t>(n) * positions * strips;
          ConstMapMat a(self.value.data() + aoff, positions, strips);
          ConstMapMat da(self.grad.data() + aoff, positions, strips);
          for (int j = 0; j < positions; ++j) {
            const double dot = a.row(j).dot(da.row(j));
            dlogits.row(j) = a.row(j).cwiseProduct(da.row(j).array().matrix()) - dot * a.row(j);
          }
          const std::size_t qoff = static_cast<std::size_t>(n) * dim * positions;
          const std::size_t koff = static_cast<std::size_t>(n) * dim * strips;
          if (pq.requires_grad) {
            ConstMapMat k(pk.value.data() + koff, dim, strips);
            MapMat dq(pq.ensure_grad().data() + qoff, dim, positions);
            dq.noalias() += k * dlogits.transpose();
          }
          if (pk.requires_grad) {
            ConstMapMat q(pq.value.data() + qoff, dim, positions);
            MapMat dk(pk.ensure_grad().data() + koff, dim, strips);
            dk.noalias() += q * dlogits;
          }
        }
      });
}

nn::Tensor strip_aggregate(const nn::Tensor& attention, const nn::Tensor& value_strips,
                           int height, int width) {
  const nn::Shape& sa = attention.shape();
  const nn::Shape& sv = value_strips.shape();
  const int positions = height * width;
  if (sa.n != sv.n || sa.c != 1 || sa.h != positions || sa.w != sv.w || sv.h != 1) {
    throw ShapeError("strip_aggregate: attention " + sa.str() + " incompatible with values " +
                     sv.str());
  }
  const int strips = sv.w;
  const int dim = sv.c;
  const nn::Shape so{sa.n, dim, height, width};
  std::vector<double> out(so.numel());
  auto av = attention.data();
  auto vv = value_strips.data();
  for (int n = 0; n < sa.n; ++n) {
    ConstMapMat a(av.data() + static_cast<std::size_t>(n) * positions * strips, positions, strips);
    ConstMapMat v(vv.data() + static_cast<std::size_t>(n) * dim * strips, dim, strips);
    MapMat o(out.data() + static_cast<std::size_t>(n) * dim * positions, dim, positions);
    o.noalias() = v * a.transpose();
  }
  return nn::Tensor::make_op(
      so, std::move(out), {attention, value_strips}, [n_batch = sa.n, dim, positions, strips](nn::detail::Node& self) {
        auto& pa = *self.parents[0];
        auto& pv = *self.parents[1];
        for (int n = 0; n < n_batch; ++n) {
          const std::size_t aoff = static_cast<std::size_t>(n) * positions * strips;
          const std::size_t voff = static_cast<std::size_t>(n) * dim * strips;
          ConstMapMat dout(self.grad.data() + static_cast<std::size_t>(n) * dim * positions, dim, positions);
          if (pa.requires_grad) {
            ConstMapMat v(pv.value.data() + voff, dim, strips);
            MapMat da(pa.ensure_grad().data() + aoff, positions, strips);
            da.noalias() += dout.transpose() * v;
          }
          if (pv.requires_grad) {
            ConstMapMat a(pa.value.data() + aoff, positions, strips);
            MapMat dv(pv.ensure_grad().data() + voff, dim, strips);
            dv.noalias() += dout * a;
          }
        }
      });
}

CrissCrossStripAttention::CrissCrossStripAttention(int channels, int attn_channels, Rng& rng)
    : channels_(channels), attn_channels_(attn_channels) {
  if (attn_channels < 1 || attn_channels >= channels) {
    throw ConfigError("CCSA needs 0 < attn_channels < channels, got " +
                      std::to_string(attn_channels) + " and " + std::to_string(channels));
  }
  query_ = nn::Conv2d(channels, attn_channels, 1, rng, {}, true);
  key_ = nn::Conv2d(channels, attn_channels, 1, rng, {}, true);
  value_ = nn::Conv2d(channels, attn_channels, 1, rng, {}, true);
  output_ = nn::Conv2d(attn_channels, channels, 1, rng, {}, false);
  // Start close to the identity so the residual path dominates early training.
  for (double& w : output_.weight().data()) w *= 0.1;
}

nn::Tensor CrissCrossStripAttention::forward(const nn::Tensor& f_ba) const {
  return forward(f_ba, nullptr);
}

nn::Tensor CrissCrossStripAttention::forward(const nn::Tensor& f_ba, nn::Tensor* attention) const {
  const nn::Shape& s = f_ba.shape();
  if (s.c != channels_) {
    throw ShapeError("CCSA expects " + std::to_string(channels_) + " channels, got " + s.str());
  }
  const nn::Tensor q = query_.forward(f_ba);
  const nn::Tensor k_strips = strip_pool(key_.forward(f_ba));
  const nn::Tensor v_strips = strip_pool(value_.forward(f_ba));
  nn::Tensor a = strip_affinity(q, k_strips);
  const nn::Tensor attended = strip_aggregate(a, v_strips, s.h, s.w);
  if (attention != nullptr) *attention = a;
  return nn::add(output_.forward(attended), f_ba);
}

void CrissCrossStripAttention::collect(nn::StateList& state, const std::string& prefix) {
  query_.collect(state, prefix + ".query");
  key_.collect(state, prefix + ".key");
  value_.collect(state, prefix + ".value");
  output_.collect(state, prefix + ".output");
}

}  // namespace glassseg
