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
#include "glassseg/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include <Eigen/Core>

#include "glassseg/errors.hpp"

namespace glassseg::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}

detail::Node& parent(detail::Node& self, std::size_t i) { return *self.parents[i]; }

struct Tap {
  int i0;
  int i1;
  double l0;
  double l1;
};

std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int d = 0; d < out; ++d) {
    double src = scale * (d + 0.5) - 0.5;
    if (src < 0.0) src = 0.0;
    int i0 = std::min(static_cast<int>(src), in - 1);
    const int i1 = i0 < in - 1 ? i0 + 1 : i0;
    const double l1 = std::min(src - i0, 1.0);
    taps[d] = {i0, i1, 1.0 - l1, l1};
  }
  return taps;
}

void im2col(const double* x, int channels, int h, int w, int k, int stride, int pad,
            int out_h, int out_w, double* cols) {
  const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * plane;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          double* dst = row + static_cast<std::size_t>(oy) * out_w;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + out_w, 0.0);
            continue;
          }
          const double* src = x + (static_cast<std::size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* cols, int channels, int h, int w, int k, int stride, int pad,
            int out_h, int out_w, double* dx) {
  const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * plane;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          const double* src = row + static_cast<std::size_t>(oy) * out_w;
          double* dst = dx + (static_cast<std::size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<double> out(a.numel());
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return Tensor::make_op(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    accumulate_grad(parent(self, 0), self.grad);
    accumulate_grad(parent(self, 1), self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  std::vector<double> out(a.numel());
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return Tensor::make_op(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    accumulate_grad(parent(self, 0), self.grad);
    auto& pb = parent(self, 1);
    if (!pb.requires_grad) return;
    auto& g = pb.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  const bool broadcast = sb.c == 1 && sa.c != 1;
  if (!(sa == sb) && !(broadcast && sa.n == sb.n && sa.h == sb.h && sa.w == sb.w)) {
    throw ShapeError("mul: incompatible shapes " + sa.str() + " vs " + sb.str());
  }
  const std::size_t plane = sa.plane();
  const int channels = sa.c;
  // Index of the b element paired with a[i].
  auto b_index = [=](std::size_t i) {
    if (!broadcast) return i;
    const std::size_t n = i / (channels * plane);
    return n * plane + i % plane;
  };
  std::vector<double> out(a.numel());
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[b_index(i)];
  return Tensor::make_op(sa, std::move(out), {a, b}, [b_index](detail::Node& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[b_index(i)];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        g[b_index(i)] += self.grad[i] * pa.value[i];
      }
    }
  });
}

Tensor affine(const Tensor& a, double scale, double shift) {
  std::vector<double> out(a.numel());
  auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * av[i] + shift;
  return Tensor::make_op(a.shape(), std::move(out), {a}, [scale](detail::Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale * self.grad[i];
  });
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.numel());
  auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-av[i]));
  return Tensor::make_op(a.shape(), std::move(out), {a}, [](detail::Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = self.value[i];
      g[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.numel());
  auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
  return Tensor::make_op(a.shape(), std::move(out), {a}, [](detail::Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (p.value[i] > 0.0) g[i] += self.grad[i];
    }
  });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat_channels: " + sa.str() + " vs " + sb.str());
  }
  Shape so{sa.n, sa.c + sb.c, sa.h, sa.w};
  const std::size_t ia = static_cast<std::size_t>(sa.c) * sa.plane();
  const std::size_t ib = static_cast<std::size_t>(sb.c) * sb.plane();
  std::vector<double> out;
  out.reserve(so.numel());
  auto av = a.data();
  auto bv = b.data();
  for (int n = 0; n < sa.n; ++n) {
    out.insert(out.end(), av.begin() + static_cast<std::ptrdiff_t>(n * ia),
               av.begin() + static_cast<std::ptrdiff_t>((n + 1) * ia));
    out.insert(out.end(), bv.begin() + static_cast<std::ptrdiff_t>(n * ib),
               bv.begin() + static_cast<std::ptrdiff_t>((n + 1) * ib));
  }
  return Tensor::make_op(so, std::move(out), {a, b}, [ia, ib](detail::Node& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    const std::size_t batch = self.value.size() / (ia + ib);
    for (std::size_t n = 0; n < batch; ++n) {
      const double* src = self.grad.data() + n * (ia + ib);
      if (pa.requires_grad) {
        auto& g = pa.ensure_grad();
        for (std::size_t i = 0; i < ia; ++i) g[n * ia + i] += src[i];
      }
      if (pb.requires_grad) {
        auto& g = pb.ensure_grad();
        for (std::size_t i = 0; i < ib; ++i) g[n * ib + i] += src[ia + i];
      }
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return Tensor::make_op(Shape{}, {s}, {a}, [](detail::Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, ConvSpec spec) {
  const Shape& sx = x.shape();
  const Shape& sw = weight.shape();
  const int groups = spec.groups;
  if (sw.h != sw.w) throw ShapeError("conv2d: non-square kernel " + sw.str());
  if (groups < 1 || sx.c % groups != 0 || sw.n % groups != 0 || sw.c * groups != sx.c) {
    throw ShapeError("conv2d: input " + sx.str() + " incompatible with weight " + sw.str() +
                     " and groups=" + std::to_string(groups));
  }
  if (bias.defined() && bias.numel() != static_cast<std::size_t>(sw.n)) {
    throw ShapeError("conv2d: bias size does not match output channels");
  }
  const int k = sw.h;
  const int out_h = (sx.h + 2 * spec.pad - k) / spec.stride + 1;
  const int out_w = (sx.w + 2 * spec.pad - k) / spec.stride + 1;
  if (out_h <= 0 || out_w <= 0) throw ShapeError("conv2d: empty output for input " + sx.str());
  const int cin_g = sx.c / groups;
  const int cout_g = sw.n / groups;
  const int col_rows = cin_g * k * k;
  const int col_cols = out_h * out_w;
  const bool direct = k == 1 && spec.stride == 1 && spec.pad == 0;
  Shape so{sx.n, sw.n, out_h, out_w};

  std::vector<double> out(so.numel());
  std::vector<double> cols(direct ? 0 : static_cast<std::size_t>(col_rows) * col_cols);
  auto xv = x.data();
  auto wv = weight.data();
  for (int n = 0; n < sx.n; ++n) {
    for (int g = 0; g < groups; ++g) {
      const double* xg = xv.data() + (static_cast<std::size_t>(n) * sx.c + g * cin_g) * sx.plane();
      const double* cp = xg;
      if (!direct) {
        im2col(xg, cin_g, sx.h, sx.w, k, spec.stride, spec.pad, out_h, out_w, cols.data());
        cp = cols.data();
      }
      ConstMapMat colm(cp, col_rows, col_cols);
      ConstMapMat wm(wv.data() + static_cast<std::size_t>(g) * cout_g * col_rows, cout_g, col_rows);
      MapMat om(out.data() + (static_cast<std::size_t>(n) * sw.n + g * cout_g) * col_cols, cout_g,
                col_cols);
      om.noalias() = wm * colm;
    }
    if (bias.defined()) {
      auto bv = bias.data();
      for (int c = 0; c < sw.n; ++c) {
        double* o = out.data() + (static_cast<std::size_t>(n) * sw.n + c) * col_cols;
        for (int i = 0; i < col_cols; ++i) o[i] += bv[c];
      }
    }
  }

  std::vector<Tensor> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return Tensor::make_op(
      so, std::move(out), std::move(parents),
      [sx, sw, spec, k, out_h, out_w, cin_g, cout_g, col_rows, col_cols, direct](detail::Node& self) {
        auto& px = parent(self, 0);
        auto& pw = parent(self, 1);
        const bool has_bias = self.parents.size() > 2;
        std::vector<double> cols(direct ? 0 : static_cast<std::size_t>(col_rows) * col_cols);
        std::vector<double> dcols(static_cast<std::size_t>(col_rows) * col_cols);
        for (int n = 0; n < sx.n; ++n) {
          for (int g = 0; g < spec.groups; ++g) {
            const std::size_t xoff = (static_cast<std::size_t>(n) * sx.c + g * cin_g) * sx.plane();
            ConstMapMat dout(self.grad.data() + (static_cast<std::size_t>(n) * sw.n + g * cout_g) * col_cols,
                             cout_g, col_cols);
            if (pw.requires_grad) {
              const double* cp = px.value.data() + xoff;
              if (!direct) {
                im2col(cp, cin_g, sx.h, sx.w, k, spec.stride, spec.pad, out_h, out_w, cols.data());
                cp = cols.data();
              }
              ConstMapMat colm(cp, col_rows, col_cols);
              MapMat dw(pw.ensure_grad().data() + static_cast<std::size_t>(g) * cout_g * col_rows,
                        cout_g, col_rows);
              dw.noalias() += dout * colm.transpose();
            }
            if (px.requires_grad) {
              ConstMapMat wm(pw.value.data() + static_cast<std::size_t>(g) * cout_g * col_rows, cout_g,
                             col_rows);
              double* dx = px.ensure_grad().data() + xoff;
              if (direct) {
                MapMat dxm(dx, col_rows, col_cols);
                dxm.noalias() += wm.transpose() * dout;
              } else {
                MapMat dcm(dcols.data(), col_rows, col_cols);
                dcm.noalias() = wm.transpose() * dout;
                col2im(dcols.data(), cin_g, sx.h, sx.w, k, spec.stride, spec.pad, out_h, out_w, dx);
              }
            }
          }
          if (has_bias) {
            auto& pb = parent(self, 2);
            if (pb.requires_grad) {
              auto& gb = pb.ensure_grad();
              for (int c = 0; c < sw.n; ++c) {
                const double* d = self.grad.data() + (static_cast<std::size_t>(n) * sw.n + c) * col_cols;
                double s = 0.0;
                for (int i = 0; i < col_cols; ++i) s += d[i];
                gb[c] += s;
              }
            }
          }
        }
      });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, bool training) {
  const Shape& s = x.shape();
  const auto channels = static_cast<std::size_t>(s.c);
  if (gamma.numel() != channels || beta.numel() != channels ||
      state.running_mean.size() != channels || state.running_var.size() != channels) {
    throw ShapeError("batch_norm: parameter size does not match channels of " + s.str());
  }
  const std::size_t plane = s.plane();
  const std::size_t count = static_cast<std::size_t>(s.n) * plane;
  auto xv = x.data();
  auto gv = gamma.data();
  auto bv = beta.data();

  std::vector<double> mean(channels);
  std::vector<double> invstd(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    if (training) {
      double m = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const double* p = xv.data() + (n * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) m += p[i];
      }
      m /= static_cast<double>(count);
      double v = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const double* p = xv.data() + (n * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) v += (p[i] - m) * (p[i] - m);
      }
      v /= static_cast<double>(count);
      mean[c] = m;
      invstd[c] = 1.0 / std::sqrt(v + state.eps);
      const double unbiased = count > 1 ? v * count / (count - 1.0) : v;
      state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * m;
      state.running_var[c] = (1.0 - state.momentum) * state.running_var[c] + state.momentum * unbiased;
    } else {
      mean[c] = state.running_mean[c];
      invstd[c] = 1.0 / std::sqrt(state.running_var[c] + state.eps);
    }
  }

  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  std::vector<double> out(x.numel());
  for (int n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t off = (n * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double h = (xv[off + i] - mean[c]) * invstd[c];
        (*xhat)[off + i] = h;
        out[off + i] = gv[c] * h + bv[c];
      }
    }
  }

  return Tensor::make_op(
      s, std::move(out), {x, gamma, beta},
      [s, channels, plane, count, training, xhat, invstd](detail::Node& self) {
        auto& px = parent(self, 0);
        auto& pg = parent(self, 1);
        auto& pb = parent(self, 2);
        const auto& dy = self.grad;
        for (std::size_t c = 0; c < channels; ++c) {
          double sum_dy = 0.0;
          double sum_dy_xhat = 0.0;
          for (int n = 0; n < s.n; ++n) {
            const std::size_t off = (n * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_dy += dy[off + i];
              sum_dy_xhat += dy[off + i] * (*xhat)[off + i];
            }
          }
          if (pg.requires_grad) pg.ensure_grad()[c] += sum_dy_xhat;
          if (pb.requires_grad) pb.ensure_grad()[c] += sum_dy;
          if (!px.requires_grad) continue;
          auto& dx = px.ensure_grad();
          const double g = pg.value[c];
          const double m = static_cast<double>(count);
          for (int n = 0; n < s.n; ++n) {
            const std::size_t off = (n * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              if (training) {
                dx[off + i] += g * invstd[c] / m *
                               (m * dy[off + i] - sum_dy - (*xhat)[off + i] * sum_dy_xhat);
              } else {
                dx[off + i] += g * invstd[c] * dy[off + i];
              }
            }
          }
        }
      });
}

Tensor max_pool2d(const Tensor& x, int kernel, int stride, int pad) {
  const Shape& s = x.shape();
  const int out_h = (s.h + 2 * pad - kernel) / stride + 1;
  const int out_w = (s.w + 2 * pad - kernel) / stride + 1;
  if (out_h <= 0 || out_w <= 0) throw ShapeError("max_pool2d: empty output for " + s.str());
  Shape so{s.n, s.c, out_h, out_w};
  std::vector<double> out(so.numel());
  auto argmax = std::make_shared<std::vector<std::size_t>>(so.numel());
  auto xv = x.data();
  std::size_t o = 0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * s.plane();
      for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox, ++o) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t arg = base;
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= s.h) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= s.w) continue;
              const std::size_t idx = base + static_cast<std::size_t>(iy) * s.w + ix;
              if (xv[idx] > best) {
                best = xv[idx];
                arg = idx;
              }
            }
          }
          out[o] = best;
          (*argmax)[o] = arg;
        }
      }
    }
  }
  return Tensor::make_op(so, std::move(out), {x}, [argmax](detail::Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[(*argmax)[i]] += self.grad[i];
  });
}

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
  const Shape& s = x.shape();
  if (out_h <= 0 || out_w <= 0) throw ShapeError("resize_bilinear: non-positive output size");
  if (s.h == out_h && s.w == out_w) {
    return affine(x, 1.0, 0.0);
  }
  Shape so{s.n, s.c, out_h, out_w};
  const auto ty = bilinear_taps(s.h, out_h);
  const auto tx = bilinear_taps(s.w, out_w);
  std::vector<double> out(so.numel());
  auto xv = x.data();
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = xv.data() + p * s.plane();
    double* dst = out.data() + p * so.plane();
    for (int y = 0; y < out_h; ++y) {
      const Tap& a = ty[y];
      const double* r0 = src + static_cast<std::size_t>(a.i0) * s.w;
      const double* r1 = src + static_cast<std::size_t>(a.i1) * s.w;
      for (int xo = 0; xo < out_w; ++xo) {
        const Tap& b = tx[xo];
        dst[static_cast<std::size_t>(y) * out_w + xo] =
            a.l0 * (b.l0 * r0[b.i0] + b.l1 * r0[b.i1]) + a.l1 * (b.l0 * r1[b.i0] + b.l1 * r1[b.i1]);
      }
    }
  }
  return Tensor::make_op(so, std::move(out), {x}, [s, so, ty, tx, planes](detail::Node& self) {
    auto& px = parent(self, 0);
    if (!px.requires_grad) return;
    auto& g = px.ensure_grad();
    for (std::size_t p = 0; p < planes; ++p) {
      const double* d = self.grad.data() + p * so.plane();
      double* gx = g.data() + p * s.plane();
      for (int y = 0; y < so.h; ++y) {
        const Tap& a = ty[y];
        double* r0 = gx + static_cast<std::size_t>(a.i0) * s.w;
        double* r1 = gx + static_cast<std::size_t>(a.i1) * s.w;
        for (int xo = 0; xo < so.w; ++xo) {
          const Tap& b = tx[xo];
          const double v = d[static_cast<std::size_t>(y) * so.w + xo];
          r0[b.i0] += a.l0 * b.l0 * v;
          r0[b.i1] += a.l0 * b.l1 * v;
          r1[b.i0] += a.l1 * b.l0 * v;
          r1[b.i1] += a.l1 * b.l1 * v;
        }
      }
    }
  });
}

Tensor resize_nearest(const Tensor& x, int out_h, int out_w) {
  const Shape& s = x.shape();
  if (out_h <= 0 || out_w <= 0) throw ShapeError("resize_nearest: non-positive output size");
  Shape so{s.n, s.c, out_h, out_w};
  auto src_index = [](int d, int in, int out) {
    const double scale = static_cast<double>(in) / out;
    return std::min(static_cast<int>(std::floor((d + 0.5) * scale)), in - 1);
  };
  std::vector<double> out(so.numel());
  auto xv = x.data();
  const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
  for (std::size_t p = 0; p < planes; ++p) {
    for (int y = 0; y < out_h; ++y) {
      const int sy = src_index(y, s.h, out_h);
      for (int xo = 0; xo < out_w; ++xo) {
        out[p * so.plane() + static_cast<std::size_t>(y) * out_w + xo] =
            xv[p * s.plane() + static_cast<std::size_t>(sy) * s.w + src_index(xo, s.w, out_w)];
      }
    }
  }
  return Tensor(so, std::move(out));
}

Tensor flip_horizontal(const Tensor& x) {
  const Shape& s = x.shape();
  std::vector<double> out(x.numel());
  auto xv = x.data();
  const std::size_t rows = static_cast<std::size_t>(s.n) * s.c * s.h;
  for (std::size_t r = 0; r < rows; ++r) {
    for (int i = 0; i < s.w; ++i) out[r * s.w + i] = xv[r * s.w + (s.w - 1 - i)];
  }
  return Tensor::make_op(s, std::move(out), {x}, [rows, w = s.w](detail::Node& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      for (int i = 0; i < w; ++i) g[r * w + (w - 1 - i)] += self.grad[r * w + i];
    }
  });
}

}  // namespace glassseg::nn
