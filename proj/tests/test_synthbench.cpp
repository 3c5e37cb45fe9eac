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

#include <fstream>

#include <opencv2/imgcodecs.hpp>

#include "glassseg/data_pipeline.hpp"
#include "glassseg/errors.hpp"
#include "glassseg/synthbench.hpp"
#include "test_util.hpp"

using namespace glassseg;

TEST_CASE("sixteen 64x64 scenes with bounded glass area") {
  testutil::TempDir dir("synth");
  SynthConfig cfg;
  cfg.seed = 7;
  const fs::path manifest = generate(cfg, dir.path());
  const auto records = read_manifest(manifest);
  REQUIRE(records.size() == 16u);
  for (const auto& r : records) {
    CAPTURE(r.stem());
    const cv::Mat mask = cv::imread(r.mask_path.string(), cv::IMREAD_UNCHANGED);
    const cv::Mat image = cv::imread(r.image_path.string(), cv::IMREAD_COLOR);
    REQUIRE(r.edge_path.has_value());
    const cv::Mat edge = cv::imread(r.edge_path->string(), cv::IMREAD_UNCHANGED);
    CHECK(mask.size() == cv::Size(64, 64));
    CHECK(image.size() == cv::Size(64, 64));
    CHECK(edge.size() == cv::Size(64, 64));
    const double fraction = cv::countNonZero(mask) / 4096.0;
    CHECK(fraction >= 0.1);
    CHECK(fraction <= 0.6);
    CHECK(cv::countNonZero(edge) > 0);
    CHECK(r.fp_paths.size() == 2u);
    CHECK(r.fn_paths.size() == 2u);
    CHECK_NOTHROW(decode_sample(r));
  }
}

TEST_CASE("generation is byte-identical per seed") {
  testutil::TempDir a("synth_a"), b("synth_b");
  SynthConfig cfg;
  cfg.n_images = 4;
  cfg.seed = 3;
  generate(cfg, a.path());
  generate(cfg, b.path());
  for (const char* rel : {"image/synth_0000.png", "mask/synth_0003.png", "edge/synth_0002.png",
                          "fp/sim_eroded/synth_0001.png", "pred/sim_dilated/synth_0000.png"}) {
    CAPTURE(rel);
    const std::string x = testutil::read_file(a / rel);
    CHECK_FALSE(x.empty());
    CHECK(x == testutil::read_file(b / rel));
  }
  cfg.seed = 4;
  testutil::TempDir c("synth_c");
  generate(cfg, c.path());
  CHECK(testutil::read_file(a / "image/synth_0000.png") != testutil::read_file(c / "image/synth_0000.png"));
}

TEST_CASE("empty dataset") {
  testutil::TempDir dir("synth_empty");
  SynthConfig cfg;
  cfg.n_images = 0;
  const fs::path manifest = generate(cfg, dir.path());
  CHECK(fs::exists(manifest));
  CHECK(read_manifest(manifest).empty());
}

TEST_CASE("scenes are constructive") {
  for (auto texture : {BackgroundTexture::kNoise, BackgroundTexture::kGradients, BackgroundTexture::kShapes}) {
    SynthConfig cfg;
    cfg.background_texture = texture;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      const SynthScene s = synthesize_scene(cfg, seed);
      CAPTURE(to_string(texture));
      CAPTURE(seed);
      cv::Mat diff = s.blended - s.background;
      std::vector<cv::Mat> ch;
      cv::split(diff, ch);
      const cv::Mat inside = s.mask > 0.5f;
      const cv::Mat changed = (cv::abs(ch[0]) > 0) | (cv::abs(ch[1]) > 0) | (cv::abs(ch[2]) > 0);
      // Blending happens exactly on the mask.
      CHECK(cv::countNonZero(changed != inside) == 0);
      // Mean brightness shift inside the pane equals alpha.
      const cv::Scalar shift = cv::mean(diff, inside);
      for (int c = 0; c < 3; ++c) CHECK(std::abs(shift[c] - s.alpha) < 1e-6);
      CHECK(s.alpha >= cfg.glass_alpha_range.first);
      CHECK(s.alpha <= cfg.glass_alpha_range.second);
      double lo, hi;
      cv::minMaxLoc(s.background.reshape(1), &lo, &hi);
      CHECK(lo >= 0.05 - 1e-6);
      CHECK(hi <= 0.35 + 1e-6);
    }
  }
}

TEST_CASE("synth configuration validation") {
  SynthConfig cfg;
  cfg.glass_alpha_range = {0.01, 0.3};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.glass_alpha_range = {0.2, 0.7};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.glass_alpha_range = {0.2, 0.3};
  cfg.frame_width_px = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(parse_background_texture("noise") == BackgroundTexture::kNoise);
  CHECK_THROWS_AS(parse_background_texture("clouds"), ConfigError);

  testutil::TempDir dir("synth_ro");
  std::ofstream(dir / "file") << "x";
  SynthConfig ok;
  ok.n_images = 1;
  CHECK_THROWS_AS(generate(ok, dir / "file" / "sub"), IoError);
}
