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
#include "glassseg/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "glassseg/data_pipeline.hpp"
#include "glassseg/errors.hpp"
#include "glassseg/nn/random.hpp"

namespace glassseg {

namespace {

constexpr double kTextureLow = 0.05;
constexpr double kTextureHigh = 0.35;
constexpr double kFrameValue = 0.02;
constexpr double kStreakGain = 0.12;
constexpr double kDistractorGain = 0.2;
const char* const kBaselineModels[] = {"sim_dilated", "sim_eroded"};

cv::Vec3f random_color(Rng& rng) {
  return {static_cast<float>(rng.uniform(kTextureLow, kTextureHigh)),
          static_cast<float>(rng.uniform(kTextureLow, kTextureHigh)),
          static_cast<float>(rng.uniform(kTextureLow, kTextureHigh))};
}

cv::Mat noise_texture(cv::Size size, Rng& rng) {
  cv::Mat coarse(std::max(2, size.height / 8), std::max(2, size.width / 8), CV_32FC3);
  for (int y = 0; y < coarse.rows; ++y) {
    for (int x = 0; x < coarse.cols; ++x) coarse.at<cv::Vec3f>(y, x) = random_color(rng);
  }
  cv::Mat out;
  cv::resize(coarse, out, size, 0, 0, cv::INTER_LINEAR);
  for (int y = 0; y < out.rows; ++y) {
    for (int x = 0; x < out.cols; ++x) {
      auto& px = out.at<cv::Vec3f>(y, x);
      for (int c = 0; c < 3; ++c) {
        px[c] = static_cast<float>(std::clamp(px[c] + 0.02 * (rng.uniform() - 0.5), kTextureLow, kTextureHigh));
      }
    }
  }
  return out;
}

cv::Mat gradient_texture(cv::Size size, Rng& rng) {
  cv::Mat out(size, CV_32FC3);
  const cv::Vec3f a = random_color(rng);
  const cv::Vec3f b = random_color(rng);
  const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);
  const double span = std::abs(dx) * size.width + std::abs(dy) * size.height;
  const double origin = std::min(0.0, dx * size.width) + std::min(0.0, dy * size.height);
  for (int y = 0; y < size.height; ++y) {
    for (int x = 0; x < size.width; ++x) {
      const float t = static_cast<float>((dx * x + dy * y - origin) / span);
      out.at<cv::Vec3f>(y, x) = a * (1.0f - t) + b * t;
    }
  }
  return out;
}

cv::Mat shapes_texture(cv::Size size, Rng& rng) {
  cv::Mat out(size, CV_32FC3, cv::Scalar(random_color(rng)));
  const int count = 4 + static_cast<int>(rng.below(5));
  for (int i = 0; i < count; ++i) {
    const cv::Vec3f c = random_color(rng);
    const cv::Scalar color(c[0], c[1], c[2]);
    const cv::Point center(static_cast<int>(rng.below(static_cast<std::uint64_t>(size.width))),
                           static_cast<int>(rng.below(static_cast<std::uint64_t>(size.height))));
    const int extent = std::max(3, static_cast<int>(rng.uniform(0.08, 0.3) * size.width));
    if (rng.bernoulli(0.5)) {
      cv::circle(out, center, extent / 2, color, cv::FILLED, cv::LINE_8);
    } else {
      cv::rectangle(out, cv::Rect(center.x - extent / 2, center.y - extent / 3, extent, 2 * extent / 3),
                    color, cv::FILLED, cv::LINE_8);
    }
  }
  return out;
}

cv::Mat square_kernel(int radius) {
  return cv::Mat::ones(2 * radius + 1, 2 * radius + 1, CV_8U);
}

void add_where(cv::Mat& image, const cv::Mat& where, double gain) {
  for (int y = 0; y < image.rows; ++y) {
    auto* px = image.ptr<cv::Vec3f>(y);
    const float* m = where.ptr<float>(y);
    for (int x = 0; x < image.cols; ++x) {
      if (m[x] > 0.5f) px[x] += cv::Vec3f::all(static_cast<float>(gain));
    }
  }
}

void write_rgb(const std::filesystem::path& path, const cv::Mat& rgb) {
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  cv::Mat u8;
  bgr.convertTo(u8, CV_8UC3, 255.0);
  if (!cv::imwrite(path.string(), u8)) throw IoError("cannot write " + path.string());
}

}  // namespace

BackgroundTexture parse_background_texture(const std::string& s) {
  if (s == "noise") return BackgroundTexture::kNoise;
  if (s == "gradients") return BackgroundTexture::kGradients;
  if (s == "shapes") return BackgroundTexture::kShapes;
  throw ConfigError("unknown background texture '" + s + "' (expected noise|gradients|shapes)");
}

std::string to_string(BackgroundTexture t) {
  switch (t) {
    case BackgroundTexture::kNoise: return "noise";
    case BackgroundTexture::kGradients: return "gradients";
    case BackgroundTexture::kShapes: return "shapes";
  }
  return "unknown";
}

void SynthConfig::validate() const {
  if (n_images < 0) throw ConfigError("n_images must be non-negative");
  if (size.width < 16 || size.height < 16) throw ConfigError("synthetic images must be at least 16x16");
  const auto [lo, hi] = glass_alpha_range;
  if (!(lo >= 0.05 && lo <= hi && hi <= 0.6)) {
    throw ConfigError("glass_alpha_range must lie within [0.05, 0.6]");
  }
  if (frame_width_px < 1) throw ConfigError("frame_width_px must be >= 1");
  if (edge_band_radius < 1) throw ConfigError("edge_band_radius must be >= 1");
}

SynthScene synthesize_scene(const SynthConfig& config, std::uint64_t scene_seed) {
  config.validate();
  Rng rng(scene_seed);
  const cv::Size size = config.size;
  SynthScene scene;

  switch (config.background_texture) {
    case BackgroundTexture::kNoise: scene.background = noise_texture(size, rng); break;
    case BackgroundTexture::kGradients: scene.background = gradient_texture(size, rng); break;
    case BackgroundTexture::kShapes: scene.background = shapes_texture(size, rng); break;
  }

  // Pane rectangle covering 15-50% of the frame, kept clear of the border so
  // the surrounding frame fits.
  const int margin = config.frame_width_px + 1;
  const double area = static_cast<double>(size.area());
  const double fraction = rng.uniform(0.15, 0.5);
  const double aspect = rng.uniform(0.7, 1.4);
  int w = static_cast<int>(std::lround(std::sqrt(fraction * area * aspect)));
  int h = static_cast<int>(std::lround(fraction * area / std::max(1, w)));
  w = std::clamp(w, 4, size.width - 2 * margin);
  h = std::clamp(h, 4, size.height - 2 * margin);
  const int x0 = margin + static_cast<int>(rng.below(static_cast<std::uint64_t>(size.width - 2 * margin - w + 1)));
  const int y0 = margin + static_cast<int>(rng.below(static_cast<std::uint64_t>(size.height - 2 * margin - h + 1)));

  scene.mask = cv::Mat::zeros(size, CV_32F);
  if (rng.bernoulli(0.25)) {
    // Convex polygon: the rectangle with each corner cut by up to 30% of a side.
    auto cut = [&](int side) { return static_cast<int>(rng.uniform(0.0, 0.3) * side); };
    const int x1 = x0 + w - 1;
    const int y1 = y0 + h - 1;
    const int a = cut(w), b = cut(h), c = cut(w), d = cut(h), e = cut(w), f = cut(h), g = cut(w), k = cut(h);
    const std::vector<cv::Point> poly = {{x0 + a, y0}, {x1 - c, y0}, {x1, y0 + d}, {x1, y1 - f},
                                         {x1 - e, y1}, {x0 + g, y1}, {x0, y1 - k}, {x0, y0 + b}};
    cv::fillConvexPoly(scene.mask, poly, cv::Scalar(1.0), cv::LINE_8);
  } else {
    scene.mask(cv::Rect(x0, y0, w, h)).setTo(1.0);
  }

  scene.alpha = rng.uniform(config.glass_alpha_range.first, config.glass_alpha_range.second);
  // Blending toward (background + 1) by alpha shifts brightness by exactly alpha.
  scene.blended = scene.background.clone();
  add_where(scene.blended, scene.mask, scene.alpha);

  scene.image = scene.blended.clone();
  cv::Mat grown;
  cv::dilate(scene.mask, grown, square_kernel(config.frame_width_px));
  const cv::Mat frame = grown - scene.mask;
  scene.image.setTo(cv::Scalar::all(kFrameValue), frame > 0.5f);

  // Faint specular streak across the pane.
  cv::Mat streak = cv::Mat::zeros(size, CV_32F);
  const cv::Point s0(x0 + static_cast<int>(rng.below(static_cast<std::uint64_t>(w))), y0);
  const cv::Point s1(s0.x + static_cast<int>(rng.uniform(-0.5, 0.5) * w), y0 + h - 1);
  cv::line(streak, s0, s1, cv::Scalar(1.0), 1, cv::LINE_8);
  streak = streak.mul(scene.mask);
  add_where(scene.image, streak, kStreakGain);

  // Reflective distractor outside the pane, unframed.
  cv::Mat distractor = cv::Mat::zeros(size, CV_32F);
  const bool has_distractor = rng.bernoulli(0.5);
  const cv::Point dc(static_cast<int>(rng.below(static_cast<std::uint64_t>(size.width))),
                     static_cast<int>(rng.below(static_cast<std::uint64_t>(size.height))));
  const int dr = std::max(2, size.width / 12);
  cv::circle(distractor, dc, dr, cv::Scalar(1.0), cv::FILLED, cv::LINE_8);
  distractor.setTo(0.0, grown > 0.5f);
  if (has_distractor) add_where(scene.image, distractor, kDistractorGain);
  cv::min(cv::max(scene.image, 0.0), 1.0, scene.image);

  cv::Mat eroded;
  cv::erode(scene.mask, eroded, square_kernel(2));
  scene.baseline_eroded = cv::max(eroded, distractor);
  cv::dilate(scene.mask, scene.baseline_dilated, square_kernel(2));
  cv::Mat hole = cv::Mat::zeros(size, CV_32F);
  cv::circle(hole, cv::Point(x0 + w / 2, y0 + h / 2), std::max(2, std::min(w, h) / 6), cv::Scalar(1.0),
             cv::FILLED, cv::LINE_8);
  scene.baseline_dilated.setTo(0.0, hole > 0.5f);
  return scene;
}

std::filesystem::path generate(const SynthConfig& config, const std::filesystem::path& out_root) {
  config.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_root, ec);
  if (ec) throw IoError("cannot create " + out_root.string() + ": " + ec.message());
  for (const char* sub : {"image", "mask", "edge"}) fs::create_directories(out_root / sub);
  for (const char* model : kBaselineModels) {
    for (const char* kind : {"pred", "fp", "fn"}) fs::create_directories(out_root / kind / model);
  }

  std::vector<SampleRecord> records;
  for (int i = 0; i < config.n_images; ++i) {
    const SynthScene scene = synthesize_scene(config, mix_seed(config.seed, static_cast<std::uint64_t>(i)));
    const std::string stem = fmt::format("synth_{:04d}", i);
    SampleRecord r;
    r.image_path = out_root / "image" / (stem + ".png");
    r.mask_path = out_root / "mask" / (stem + ".png");
    r.edge_path = out_root / "edge" / (stem + ".png");
    write_rgb(r.image_path, scene.image);
    write_map(r.mask_path, scene.mask);
    write_map(*r.edge_path, generate_edge_gt(scene.mask, config.edge_band_radius));
    const cv::Mat* baselines[] = {&scene.baseline_dilated, &scene.baseline_eroded};
    for (std::size_t m = 0; m < std::size(kBaselineModels); ++m) {
      const std::string model = kBaselineModels[m];
      write_map(out_root / "pred" / model / (stem + ".png"), *baselines[m]);
      const MistakeMaps mistakes = generate_mistake_gt(*baselines[m], scene.mask);
      r.fp_paths.push_back(out_root / "fp" / model / (stem + ".png"));
      r.fn_paths.push_back(out_root / "fn" / model / (stem + ".png"));
      write_map(r.fp_paths.back(), mistakes.fp);
      write_map(r.fn_paths.back(), mistakes.fn);
    }
    records.push_back(std::move(r));
  }
  const fs::path manifest = out_root / "manifest.jsonl";
  write_manifest(manifest, records);
  return manifest;
}

}  // namespace glassseg
