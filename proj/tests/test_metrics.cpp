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

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "glassseg/data_pipeline.hpp"
#include "glassseg/errors.hpp"
#include "glassseg/metrics.hpp"
#include "test_util.hpp"

using namespace glassseg;

namespace {

cv::Mat map2x2(float a, float b, float c, float d) { return (cv::Mat_<float>(2, 2) << a, b, c, d); }

cv::Mat random_binary(cv::Size size, Rng& rng, double p = 0.5) {
  cv::Mat m(size, CV_32F);
  for (int y = 0; y < size.height; ++y)
    for (int x = 0; x < size.width; ++x) m.at<float>(y, x) = rng.bernoulli(p) ? 1.f : 0.f;
  return m;
}

}  // namespace

TEST_CASE("hand-counted 2x2 fixture") {
  const cv::Mat pred = map2x2(1, 1, 0, 0);
  const cv::Mat gt = map2x2(1, 0, 1, 0);
  ConfusionMaps maps;
  const ConfusionCounts c = confusion(pred, gt, 0.5, &maps);
  CHECK(c.tp == 1);
  CHECK(c.fp == 1);
  CHECK(c.fn == 1);
  CHECK(c.tn == 1);
  CHECK(maps.tp.at<uchar>(0, 0) == 1);
  CHECK(maps.fp.at<uchar>(0, 1) == 1);
  CHECK(maps.fn.at<uchar>(1, 0) == 1);
  CHECK(maps.tn.at<uchar>(1, 1) == 1);
  CHECK(std::abs(iou(c) - 1.0 / 3.0) <= 1e-9);
  CHECK(std::abs(mae(pred, gt) - 0.5) <= 1e-9);
  REQUIRE(ber(c).has_value());
  CHECK(std::abs(*ber(c) - 50.0) <= 1e-6);
}

TEST_CASE("perfect and inverted predictions") {
  Rng rng(61);
  const cv::Mat gt = random_binary({9, 7}, rng);
  const ConfusionCounts perfect = confusion(gt, gt);
  CHECK(perfect.fp == 0);
  CHECK(perfect.fn == 0);
  CHECK(perfect.tp == perfect.n_p);
  CHECK(perfect.tn == perfect.n_n);
  CHECK(iou(perfect) == 1.0);
  CHECK(mae(gt, gt) == 0.0);
  CHECK(*ber(perfect) == 0.0);

  const cv::Mat inv = 1.0 - gt;
  const ConfusionCounts bad = confusion(inv, gt);
  CHECK(bad.tp == 0);
  CHECK(bad.tn == 0);
  CHECK(iou(bad) == 0.0);
  CHECK(*ber(bad) == 100.0);

  CHECK(mae(cv::Mat(gt.size(), CV_32F, cv::Scalar(0.5)), gt) == doctest::Approx(0.5));
  CHECK(iou(confusion(cv::Mat::zeros(3, 3, CV_32F), cv::Mat::zeros(3, 3, CV_32F))) == 1.0);
  CHECK_FALSE(ber(confusion(cv::Mat::ones(3, 3, CV_32F), cv::Mat::ones(3, 3, CV_32F))).has_value());
}

TEST_CASE("metric properties") {
  Rng rng(62);
  for (int t = 0; t < 50; ++t) {
    const cv::Mat gt = random_binary({8, 6}, rng);
    cv::Mat pred(gt.size(), CV_32F);
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 8; ++x) pred.at<float>(y, x) = static_cast<float>(rng.uniform());
    const ConfusionCounts c = confusion(pred, gt);
    CHECK(c.tp + c.fn == c.n_p);
    CHECK(c.tn + c.fp == c.n_n);
    CHECK(c.total() == 48);
    CHECK(mae(pred, gt) == doctest::Approx(mae(gt, pred)).epsilon(1e-15));

    cv::Mat fp, fg;
    cv::flip(pred, fp, 1);
    cv::flip(gt, fg, 1);
    const ConfusionCounts f = confusion(fp, fg);
    CHECK(iou(f) == iou(c));
    if (ber(c)) CHECK(*ber(f) == *ber(c));

    // Turning one FP pixel into a TN.
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 8; ++x)
        if (pred.at<float>(y, x) >= 0.5f && gt.at<float>(y, x) == 0.f) {
          cv::Mat fixed = pred.clone();
          fixed.at<float>(y, x) = 0.f;
          const ConfusionCounts d = confusion(fixed, gt);
          CHECK(iou(d) >= iou(c));
          if (ber(c)) CHECK(*ber(d) <= *ber(c));
          y = 6;
          break;
        }
  }
  CHECK_THROWS_AS(confusion(cv::Mat::zeros(2, 2, CV_32F), cv::Mat::zeros(3, 3, CV_32F)), ValidationError);
}

TEST_CASE("8-bit inputs are scaled") {
  cv::Mat pred8 = (cv::Mat_<uchar>(1, 2) << 255, 0);
  cv::Mat gt8 = (cv::Mat_<uchar>(1, 2) << 255, 255);
  const ConfusionCounts c = confusion(pred8, gt8);
  CHECK(c.tp == 1);
  CHECK(c.fn == 1);
  CHECK(mae(pred8, gt8) == doctest::Approx(0.5));
}

TEST_CASE("dataset evaluation and report files") {
  testutil::TempDir dir("metrics");
  fs::create_directories(dir / "pred");
  fs::create_directories(dir / "gt");
  Rng rng(63);
  const cv::Mat a = random_binary({10, 10}, rng), b = random_binary({10, 10}, rng);
  write_map(dir / "gt/a.png", a);
  write_map(dir / "gt/b.png", b);

  SUBCASE("perfect directory") {
    write_map(dir / "pred/a.png", a);
    write_map(dir / "pred/b.png", b);
    const MetricReport r = evaluate_dataset(dir / "pred", dir / "gt");
    REQUIRE(r.has_aggregates);
    CHECK(r.iou_pooled == 1.0);
    CHECK(r.mae_mean == 0.0);
    CHECK(r.ber_mean == 0.0);
    write_report(r, dir / "report");
    CHECK(fs::exists(dir / "report/metrics.json"));
    CHECK(fs::exists(dir / "report/metrics.csv"));
    CHECK(r.to_csv().find("a,") != std::string::npos);
  }
  SUBCASE("one perfect, one inverted") {
    write_map(dir / "pred/a.png", a);
    write_map(dir / "pred/b.png", 1.0 - b);
    write_map(dir / "pred/c.png", a);
    const MetricReport r = evaluate_dataset(dir / "pred", dir / "gt");
    CHECK(r.ber_mean == doctest::Approx(50.0));
    REQUIRE(r.unmatched.size() == 1u);
    CHECK(r.unmatched[0] == "c");
    CHECK(r.images.size() == 2u);
  }
  SUBCASE("no common stems") {
    write_map(dir / "pred/z.png", a);
    const MetricReport r = evaluate_dataset(dir / "pred", dir / "gt");
    CHECK_FALSE(r.has_aggregates);
    CHECK_FALSE(r.errors.empty());
  }
}

TEST_CASE("decomposition export writes four indicator maps") {
  testutil::TempDir dir("decomp");
  const cv::Mat pred = map2x2(1, 1, 0, 0), gt = map2x2(1, 0, 1, 0);
  const ConfusionCounts c = export_decomposition(pred, gt, dir.path(), "s");
  CHECK(c.tp == 1);
  for (const char* k : {"tp", "tn", "fp", "fn"}) {
    const cv::Mat m = cv::imread((dir.path() / (std::string("s.") + k + ".png")).string(), cv::IMREAD_UNCHANGED);
    REQUIRE_FALSE(m.empty());
    CHECK(cv::countNonZero(m) == 1);
    double hi;
    cv::minMaxLoc(m, nullptr, &hi);
    CHECK(hi == 255.0);
  }
}
