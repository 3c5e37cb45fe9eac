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
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "glassseg/errors.hpp"
#include "glassseg/nn/layers.hpp"
#include "glassseg/nn/ops.hpp"
#include "glassseg/nn/serialize.hpp"
#include "test_util.hpp"

using namespace glassseg;
using namespace glassseg::nn;
using testutil::check_gradient;
using testutil::random_tensor;

namespace {

// Scalar half-pixel bilinear sample, written independently of the library.
double bilinear_ref(const std::vector<double>& img, int h, int w, int oh, int ow, int y, int x) {
  auto coord = [](int dst, int in, int out, int& i0, int& i1, double& frac) {
    double src = (dst + 0.5) * static_cast<double>(in) / out - 0.5;
    if (src < 0) src = 0;
    i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    i1 = i0 + 1 < in ? i0 + 1 : in - 1;
    frac = src - i0;
  };
  int y0, y1, x0, x1;
  double fy, fx;
  coord(y, h, oh, y0, y1, fy);
  coord(x, w, ow, x0, x1, fx);
  auto at = [&](int r, int c) { return img[static_cast<std::size_t>(r) * w + c]; };
  return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) + fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
}

Tensor weighted_sum(const Tensor& t, const Tensor& probe) { return sum(mul(t, probe)); }

}  // namespace

TEST_CASE("resize_bilinear matches reference values") {
  const Tensor x(Shape{1, 1, 2, 2}, {0, 1, 1, 0});
  const Tensor up = resize_bilinear(x, 4, 4);
  const double expected[16] = {0.0,  0.25,  0.75,  1.0,  0.25, 0.375, 0.625, 0.75,
                               0.75, 0.625, 0.375, 0.25, 1.0,  0.75,  0.25,  0.0};
  for (int i = 0; i < 16; ++i) CHECK(up.data()[i] == doctest::Approx(expected[i]).epsilon(1e-12));

  std::vector<double> ramp(64);
  for (int i = 0; i < 64; ++i) ramp[i] = i;
  const Tensor r(Shape{1, 1, 8, 8}, ramp);
  const Tensor down = resize_bilinear(r, 2, 2);
  CHECK(down.at(0, 0, 0, 0) == doctest::Approx(13.5));
  CHECK(down.at(0, 0, 0, 1) == doctest::Approx(17.5));
  CHECK(down.at(0, 0, 1, 0) == doctest::Approx(45.5));
  CHECK(down.at(0, 0, 1, 1) == doctest::Approx(49.5));
  const Tensor odd = resize_bilinear(r, 3, 5);
  CHECK(odd.at(0, 0, 0, 0) == doctest::Approx(6.966666666666666));
  CHECK(odd.at(0, 0, 2, 4) == doctest::Approx(56.033333333333324));
}

TEST_CASE("resize_bilinear agrees with a scalar oracle on random sizes") {
  Rng rng(3);
  const int sizes[][4] = {{5, 7, 11, 3}, {8, 8, 2, 2}, {3, 4, 13, 16}, {6, 6, 6, 9}};
  for (const auto& s : sizes) {
    const Tensor x = random_tensor(Shape{1, 1, s[0], s[1]}, rng);
    const std::vector<double> v(x.data().begin(), x.data().end());
    const Tensor y = resize_bilinear(x, s[2], s[3]);
    for (int r = 0; r < s[2]; ++r) {
      for (int c = 0; c < s[3]; ++c) {
        CHECK(std::abs(y.at(0, 0, r, c) - bilinear_ref(v, s[0], s[1], s[2], s[3], r, c)) < 1e-12);
      }
    }
  }
  const Tensor same = random_tensor(Shape{1, 2, 4, 4}, rng);
  CHECK(testutil::max_abs_diff(resize_bilinear(same, 4, 4).data(), same.data()) == 0.0);
}

TEST_CASE("resize_nearest picks half-pixel centers") {
  std::vector<double> ramp(16);
  for (int i = 0; i < 16; ++i) ramp[i] = i;
  const Tensor r(Shape{1, 1, 4, 4}, ramp);
  const Tensor d = resize_nearest(r, 2, 2);
  // Source index floor((dst + 0.5) * 2) = 1, 3.
  CHECK(d.at(0, 0, 0, 0) == 5);
  CHECK(d.at(0, 0, 0, 1) == 7);
  CHECK(d.at(0, 0, 1, 0) == 13);
  CHECK(d.at(0, 0, 1, 1) == 15);
}

TEST_CASE("conv2d matches a direct loop") {
  Rng rng(11);
  const ConvSpec spec{2, 1, 2};
  const Tensor x = random_tensor(Shape{2, 4, 7, 6}, rng);
  const Tensor w = random_tensor(Shape{6, 2, 3, 3}, rng);
  const Tensor b = random_tensor(Shape{1, 6, 1, 1}, rng);
  const Tensor y = conv2d(x, w, b, spec);
  const int oh = (7 + 2 - 3) / 2 + 1, ow = (6 + 2 - 3) / 2 + 1;
  REQUIRE(y.shape() == Shape{2, 6, oh, ow});
  double worst = 0.0;
  for (int n = 0; n < 2; ++n)
    for (int o = 0; o < 6; ++o)
      for (int r = 0; r < oh; ++r)
        for (int c = 0; c < ow; ++c) {
          const int g = o / 3;
          double acc = b.at(0, o, 0, 0);
          for (int i = 0; i < 2; ++i)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int yy = r * 2 - 1 + ky, xx = c * 2 - 1 + kx;
                if (yy < 0 || yy >= 7 || xx < 0 || xx >= 6) continue;
                acc += w.at(o, i, ky, kx) * x.at(n, g * 2 + i, yy, xx);
              }
          worst = std::max(worst, std::abs(acc - y.at(n, o, r, c)));
        }
  CHECK(worst < 1e-12);
}

TEST_CASE("batch_norm eval uses running statistics") {
  Rng rng(5);
  const Tensor x = random_tensor(Shape{2, 3, 2, 2}, rng);
  const Tensor gamma(Shape{1, 3, 1, 1}, {1.0, 2.0, 0.5});
  const Tensor beta(Shape{1, 3, 1, 1}, {0.0, -1.0, 0.25});
  BatchNormState st{{0.1, -0.2, 0.3}, {1.5, 0.5, 2.0}};
  const Tensor y = batch_norm(x, gamma, beta, st, false);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 4; ++i) {
        const double ref = gamma.data()[c] * (x.at(n, c, i / 2, i % 2) - st.running_mean[c]) /
                               std::sqrt(st.running_var[c] + st.eps) +
                           beta.data()[c];
        CHECK(y.at(n, c, i / 2, i % 2) == doctest::Approx(ref).epsilon(1e-12));
      }
}

TEST_CASE("batch_norm training normalizes and updates running estimates") {
  Rng rng(6);
  const Tensor x = random_tensor(Shape{3, 2, 3, 3}, rng, -2, 3);
  const Tensor gamma(Shape{1, 2, 1, 1}, 1.0);
  const Tensor beta(Shape{1, 2, 1, 1}, 0.0);
  BatchNormState st{{0.0, 0.0}, {1.0, 1.0}};
  const Tensor y = batch_norm(x, gamma, beta, st, true);
  for (int c = 0; c < 2; ++c) {
    double m = 0, m2 = 0, xm = 0, xv = 0;
    for (int n = 0; n < 3; ++n)
      for (int i = 0; i < 9; ++i) {
        m += y.at(n, c, i / 3, i % 3);
        m2 += y.at(n, c, i / 3, i % 3) * y.at(n, c, i / 3, i % 3);
        xm += x.at(n, c, i / 3, i % 3);
      }
    m /= 27;
    xm /= 27;
    for (int n = 0; n < 3; ++n)
      for (int i = 0; i < 9; ++i) xv += std::pow(x.at(n, c, i / 3, i % 3) - xm, 2);
    CHECK(std::abs(m) < 1e-12);
    CHECK(m2 / 27 == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(st.running_mean[c] == doctest::Approx(0.1 * xm));
    CHECK(st.running_var[c] == doctest::Approx(0.9 + 0.1 * xv / 26));
  }
}

TEST_CASE("op gradients agree with central differences") {
  Rng rng(21);
  const Shape s{2, 3, 4, 5};
  Tensor a = random_tensor(s, rng, -1, 1, true);
  Tensor b = random_tensor(s, rng, -1, 1, true);
  Tensor mask = random_tensor(Shape{2, 1, 4, 5}, rng, 0, 1, true);
  const Tensor probe = random_tensor(s, rng);

  SUBCASE("add/sub/mul/affine") {
    auto f = [&] { return weighted_sum(mul(sub(add(a, b), affine(b, 0.3, 0.2)), a), probe); };
    CHECK(check_gradient(f, a).max_rel_error < 1e-6);
    CHECK(check_gradient(f, b).max_rel_error < 1e-6);
  }
  SUBCASE("channel broadcast mul") {
    auto f = [&] { return weighted_sum(mul(a, mask), probe); };
    CHECK(check_gradient(f, a).max_rel_error < 1e-6);
    CHECK(check_gradient(f, mask).max_rel_error < 1e-6);
  }
  SUBCASE("sigmoid and relu away from the kink") {
    for (double& v : a.data()) v = v >= 0 ? v + 0.1 : v - 0.1;
    auto f = [&] { return weighted_sum(add(sigmoid(a), relu(a)), probe); };
    CHECK(check_gradient(f, a).max_rel_error < 1e-6);
  }
  SUBCASE("concat") {
    const Tensor p2 = random_tensor(Shape{2, 6, 4, 5}, rng);
    auto f = [&] { return weighted_sum(concat_channels(a, b), p2); };
    CHECK(check_gradient(f, b).max_rel_error < 1e-6);
  }
  SUBCASE("conv2d with stride, padding and groups") {
    Tensor x = random_tensor(Shape{2, 4, 6, 5}, rng, -1, 1, true);
    Tensor w = random_tensor(Shape{4, 2, 3, 3}, rng, -1, 1, true);
    Tensor bias = random_tensor(Shape{1, 4, 1, 1}, rng, -1, 1, true);
    const Tensor p = random_tensor(Shape{2, 4, 3, 3}, rng);
    auto f = [&] { return weighted_sum(conv2d(x, w, bias, {2, 1, 2}), p); };
    CHECK(check_gradient(f, x).max_rel_error < 1e-6);
    CHECK(check_gradient(f, w).max_rel_error < 1e-6);
    CHECK(check_gradient(f, bias).max_rel_error < 1e-6);
  }
  SUBCASE("batch_norm training") {
    Tensor gamma = random_tensor(Shape{1, 3, 1, 1}, rng, 0.5, 1.5, true);
    Tensor beta = random_tensor(Shape{1, 3, 1, 1}, rng, -1, 1, true);
    auto f = [&] {
      BatchNormState st{{0, 0, 0}, {1, 1, 1}};
      return weighted_sum(batch_norm(a, gamma, beta, st, true), probe);
    };
    CHECK(check_gradient(f, a).max_rel_error < 1e-5);
    CHECK(check_gradient(f, gamma).max_rel_error < 1e-6);
    CHECK(check_gradient(f, beta).max_rel_error < 1e-6);
  }
  SUBCASE("max_pool2d with distinct values") {
    Tensor x(Shape{1, 2, 5, 5}, 0.0, true);
    for (std::size_t i = 0; i < x.numel(); ++i) x.data()[i] = std::sin(1.7 * static_cast<double>(i)) * 3;
    const Tensor p = random_tensor(Shape{1, 2, 3, 3}, rng);
    auto f = [&] { return weighted_sum(max_pool2d(x, 3, 2, 1), p); };
    CHECK(check_gradient(f, x).max_rel_error < 1e-6);
  }
  SUBCASE("bilinear up and down, flip") {
    const Tensor pu = random_tensor(Shape{2, 3, 9, 7}, rng);
    const Tensor pd = random_tensor(Shape{2, 3, 2, 3}, rng);
    auto up = [&] { return weighted_sum(resize_bilinear(a, 9, 7), pu); };
    auto down = [&] { return weighted_sum(resize_bilinear(a, 2, 3), pd); };
    auto fl = [&] { return weighted_sum(flip_horizontal(a), probe); };
    CHECK(check_gradient(up, a).max_rel_error < 1e-6);
    CHECK(check_gradient(down, a).max_rel_error < 1e-6);
    CHECK(check_gradient(fl, a).max_rel_error < 1e-6);
  }
}

TEST_CASE("shape mismatches raise ShapeError") {
  const Tensor a(Shape{1, 2, 3, 3});
  const Tensor b(Shape{1, 2, 3, 4});
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(mul(a, Tensor(Shape{1, 3, 3, 3})), ShapeError);
  CHECK_THROWS_AS(conv2d(a, Tensor(Shape{1, 3, 1, 1}), Tensor(), {}), ShapeError);
}

TEST_CASE("NoGradGuard stops graph recording") {
  Tensor a(Shape{1, 1, 2, 2}, 1.0, true);
  {
    NoGradGuard guard;
    const Tensor y = affine(a, 2.0);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(affine(a, 2.0).requires_grad());
}

TEST_CASE("state serialization round-trips") {
  Rng rng(9);
  ConvBlock block(3, 4, rng);
  StateList state;
  block.collect(state, "b");
  block.norm().stats().running_mean[1] = 0.75;
  std::stringstream ss;
  write_state(ss, state);

  Rng other(10);
  ConvBlock copy(3, 4, other);
  StateList dst;
  copy.collect(dst, "b");
  read_state(ss, dst, true, "memory");
  CHECK(testutil::max_abs_diff(copy.conv().weight().data(), block.conv().weight().data()) == 0.0);
  CHECK(copy.norm().stats().running_mean[1] == 0.75);

  ConvBlock wrong(3, 5, other);
  StateList bad;
  wrong.collect(bad, "b");
  std::stringstream again;
  write_state(again, state);
  CHECK_THROWS_AS(read_state(again, bad, true, "memory"), Error);
}

TEST_CASE("Rng is deterministic and restorable") {
  Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) CHECK(a.next() == b.next());
  const std::string s = a.state();
  const double x = a.uniform();
  b.set_state(s);
  CHECK(b.uniform() == x);
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
}
