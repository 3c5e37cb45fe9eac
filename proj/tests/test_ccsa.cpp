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

#include "ccsa_oracle.hpp"
#include "glassseg/ccsa.hpp"
#include "glassseg/errors.hpp"
#include "glassseg/nn/ops.hpp"
#include "test_util.hpp"

using namespace glassseg;
using nn::Shape;
using nn::Tensor;
using testutil::random_tensor;

TEST_CASE("strip_pool orders row means before column means") {
  const Tensor x(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  const Tensor s = strip_pool(x);
  REQUIRE(s.shape() == Shape{1, 1, 1, 4});
  CHECK(s.data()[0] == 1.5);
  CHECK(s.data()[1] == 3.5);
  CHECK(s.data()[2] == 2.0);
  CHECK(s.data()[3] == 3.0);

  const Tensor c(Shape{2, 3, 4, 5}, 0.625);
  const Tensor pooled = strip_pool(c);
  for (double v : pooled.data()) CHECK(v == 0.625);
  const Tensor one(Shape{1, 2, 1, 1}, {0.3, -0.7});
  const Tensor p = strip_pool(one);
  CHECK(p.data()[0] == 0.3);
  CHECK(p.data()[1] == 0.3);
  CHECK(p.data()[2] == -0.7);
  CHECK(p.data()[3] == -0.7);
}

TEST_CASE("strip_affinity is a row-stochastic softmax") {
  SUBCASE("equal logits give a uniform row") {
    const Tensor q(Shape{1, 2, 2, 3}, 0.5);
    const Tensor k(Shape{1, 2, 1, 5}, 0.25);
    const Tensor a = strip_affinity(q, k);
    REQUIRE(a.shape() == Shape{1, 1, 6, 5});
    for (double v : a.data()) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
  }
  SUBCASE("a dominating key saturates") {
    const Tensor q(Shape{1, 1, 1, 1}, 1.0);
    const Tensor k(Shape{1, 1, 1, 3}, {0.0, 50.0, 0.0});
    const Tensor a = strip_affinity(q, k);
    CHECK(std::abs(a.data()[1] - 1.0) < 1e-20);
    CHECK(a.data()[0] < 2e-22);
  }
  SUBCASE("random 4x3 against a double loop") {
    Rng rng(4);
    const Tensor q = random_tensor(Shape{1, 3, 2, 2}, rng, -2, 2);
    const Tensor k = random_tensor(Shape{1, 3, 1, 3}, rng, -2, 2);
    const Tensor a = strip_affinity(q, k);
    for (int j = 0; j < 4; ++j) {
      double z = 0;
      double e[3];
      for (int i = 0; i < 3; ++i) {
        double dot = 0;
        for (int c = 0; c < 3; ++c) dot += q.data()[c * 4 + j] * k.data()[c * 3 + i];
        e[i] = std::exp(dot);
        z += e[i];
      }
      double row = 0;
      for (int i = 0; i < 3; ++i) {
        CHECK(std::abs(a.data()[j * 3 + i] - e[i] / z) < 1e-6);
        row += a.data()[j * 3 + i];
      }
      CHECK(std::abs(row - 1.0) < 1e-12);
    }
  }
  SUBCASE("non-finite input is rejected") {
    Tensor q(Shape{1, 1, 1, 2}, 1.0);
    q.data()[1] = std::nan("");
    CHECK_THROWS_AS(strip_affinity(q, Tensor(Shape{1, 1, 1, 3}, 0.0)), NumericError);
  }
}

TEST_CASE("CCSA forward matches the dense reference in float64") {
  Rng rng(17);
  CrissCrossStripAttention m(8, 3, rng);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor x = random_tensor(Shape{1, 8, 6, 7}, rng, -1, 1);
    Tensor attn;
    const Tensor y = m.forward(x, &attn);
    const std::vector<double> xv(x.data().begin(), x.data().end());
    const auto ref = testutil::ccsa_dense_reference<double>(xv, 8, 6, 7, m);
    CHECK(testutil::max_abs_diff(y.data(), ref) < 1e-12);
    REQUIRE(attn.shape() == Shape{1, 1, 42, 13});
    for (int j = 0; j < 42; ++j) {
      double row = 0;
      for (int i = 0; i < 13; ++i) row += attn.data()[j * 13 + i];
      CHECK(std::abs(row - 1.0) < 1e-6);
    }
    // Affinity memory is HW x (H + W), well below the dense (HW)^2.
    CHECK(attn.numel() < static_cast<std::size_t>(42 * 42));
  }
}

TEST_CASE("zero value projection makes CCSA the identity") {
  Rng rng(2);
  CrissCrossStripAttention m(6, 2, rng);
  for (double& w : m.value().weight().data()) w = 0.0;
  for (double& b : m.value().bias().data()) b = 0.0;
  const Tensor x = random_tensor(Shape{2, 6, 5, 4}, rng);
  const Tensor y = m.forward(x);
  CHECK(testutil::max_abs_diff(y.data(), x.data()) == 0.0);
}

TEST_CASE("CCSA commutes with horizontal flips") {
  Rng rng(8);
  CrissCrossStripAttention m(5, 2, rng);
  const Tensor x = random_tensor(Shape{1, 5, 6, 6}, rng);
  const Tensor a = nn::flip_horizontal(m.forward(x));
  const Tensor b = m.forward(nn::flip_horizontal(x));
  CHECK(testutil::max_abs_diff(a.data(), b.data()) < 1e-5);
}

TEST_CASE("CCSA parameter gradients agree with finite differences") {
  Rng rng(12);
  CrissCrossStripAttention m(4, 2, rng);
  Tensor x = random_tensor(Shape{1, 4, 5, 5}, rng, -1, 1, true);
  const Tensor probe = random_tensor(Shape{1, 4, 5, 5}, rng);
  auto loss = [&] { return nn::sum(nn::mul(m.forward(x), probe)); };
  nn::StateList state;
  m.collect(state, "ccsa");
  for (auto& p : state.parameters) {
    CAPTURE(p.name);
    CHECK(testutil::check_gradient(loss, p.tensor).max_rel_error < 1e-3);
  }
  CHECK(testutil::check_gradient(loss, x).max_rel_error < 1e-3);
}

TEST_CASE("CCSA validates its configuration") {
  Rng rng(1);
  CHECK_THROWS_AS(CrissCrossStripAttention(4, 4, rng), ConfigError);
  CHECK_THROWS_AS(CrissCrossStripAttention(4, 0, rng), ConfigError);
  CrissCrossStripAttention m(4, 2, rng);
  CHECK_THROWS_AS(m.forward(Tensor(Shape{1, 3, 4, 4})), ShapeError);
}
