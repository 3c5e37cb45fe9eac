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
#include "glassseg/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "glassseg/errors.hpp"
#include "glassseg/nn/random.hpp"

namespace glassseg {

namespace {

using nlohmann::json;

cv::Mat to_float_binary(const cv::Mat& mask, const char* what) {
  if (mask.empty() || mask.channels() != 1) {
    throw ValidationError(std::string(what) + ": expected a non-empty single-channel map");
  }
  cv::Mat f;
  if (mask.depth() == CV_8U) {
    cv::Mat m = mask.clone();
    m.setTo(1, m == 255);
    m.convertTo(f, CV_32F);
  } else {
    mask.convertTo(f, CV_32F);
  }
  for (int y = 0; y < f.rows; ++y) {
    const float* row = f.ptr<float>(y);
    for (int x = 0; x < f.cols; ++x) {
      if (row[x] != 0.0f && row[x] != 1.0f) {
        throw ValidationError(std::string(what) + ": mask is not binary");
      }
    }
  }
  return f;
}

cv::Mat binarize(const cv::Mat& m) {
  cv::Mat out;
  cv::threshold(m, out, 0.5, 1.0, cv::THRESH_BINARY);
  return out;
}

void check_size(const cv::Mat& reference, const cv::Mat& other, const fs::path& path) {
  if (reference.size() != other.size()) {
    throw AlignmentError("size of " + path.string() + " (" + std::to_string(other.cols) + "x" +
                         std::to_string(other.rows) + ") does not match the image (" +
                         std::to_string(reference.cols) + "x" + std::to_string(reference.rows) + ")");
  }
}

cv::Mat resize_to(const cv::Mat& m, cv::Size size, int interpolation) {
  if (m.size() == size) return m.clone();
  cv::Mat out;
  cv::resize(m, out, size, 0, 0, interpolation);
  return out;
}

cv::Mat geometry(const cv::Mat& m, const GeometricTransform& t, bool is_mask) {
  cv::Mat out = m(t.crop).clone();
  if (t.flip) cv::flip(out, out, 1);
  out = resize_to(out, t.target, is_mask ? cv::INTER_NEAREST_EXACT : cv::INTER_LINEAR);
  return is_mask ? binarize(out) : out;
}

void apply_color(cv::Mat& rgb, const ColorTransform& c) {
  rgb *= c.brightness;
  cv::Mat gray;
  cv::cvtColor(rgb, gray, cv::COLOR_RGB2GRAY);
  const double mean = cv::mean(gray)[0];
  rgb = (rgb - cv::Scalar::all(mean)) * c.contrast + cv::Scalar::all(mean);
  cv::cvtColor(rgb, gray, cv::COLOR_RGB2GRAY);
  cv::Mat gray3;
  cv::cvtColor(gray, gray3, cv::COLOR_GRAY2RGB);
  cv::addWeighted(rgb, c.saturation, gray3, 1.0 - c.saturation, 0.0, rgb);
  cv::min(cv::max(rgb, 0.0), 1.0, rgb);
  if (c.hue_shift != 0.0) {
    cv::Mat hsv;
    cv::cvtColor(rgb, hsv, cv::COLOR_RGB2HSV);
    std::vector<cv::Mat> ch;
    cv::split(hsv, ch);
    ch[0] += c.hue_shift * 360.0;
    for (int y = 0; y < ch[0].rows; ++y) {
      float* row = ch[0].ptr<float>(y);
      for (int x = 0; x < ch[0].cols; ++x) {
        row[x] = std::fmod(row[x] + 360.0f, 360.0f);
      }
    }
    cv::merge(ch, hsv);
    cv::cvtColor(hsv, rgb, cv::COLOR_HSV2RGB);
  }
  cv::min(cv::max(rgb, 0.0), 1.0, rgb);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

}  // namespace

AugmentationConfig AugmentationConfig::identity(cv::Size target) {
  AugmentationConfig c;
  c.horizontal_flip_prob = 0.0;
  c.color_jitter = {0.0, 0.0, 0.0, 0.0};
  c.crop_scale_range = {1.0, 1.0};
  c.target_size = target;
  return c;
}

void AugmentationConfig::validate() const {
  if (horizontal_flip_prob < 0.0 || horizontal_flip_prob > 1.0) {
    throw ConfigError("horizontal_flip_prob must lie in [0, 1]");
  }
  const auto& j = color_jitter;
  for (double v : {j.brightness, j.contrast, j.saturation}) {
    if (v < 0.0 || v >= 1.0) throw ConfigError("colour jitter deltas must lie in [0, 1)");
  }
  if (j.hue < 0.0 || j.hue > 0.5) throw ConfigError("hue jitter must lie in [0, 0.5]");
  const auto [lo, hi] = crop_scale_range;
  if (!(lo > 0.0 && lo <= hi && hi <= 1.0)) {
    throw ConfigError("crop_scale_range must satisfy 0 < min <= max <= 1");
  }
  if (target_size.width <= 0 || target_size.height <= 0) {
    throw ConfigError("target_size must be positive");
  }
}

cv::Mat read_image(const fs::path& path) {
  const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (raw.empty()) throw DecodeError("cannot decode image: " + path.string());
  cv::Mat rgb;
  cv::cvtColor(raw, rgb, cv::COLOR_BGR2RGB);
  cv::Mat out;
  rgb.convertTo(out, CV_32FC3, 1.0 / 255.0);
  return out;
}

cv::Mat read_soft_map(const fs::path& path) {
  const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw DecodeError("cannot decode map: " + path.string());
  if (raw.channels() != 1 || raw.depth() != CV_8U) {
    throw DecodeError("expected single-channel 8-bit map: " + path.string());
  }
  cv::Mat out;
  raw.convertTo(out, CV_32F, 1.0 / 255.0);
  return out;
}

cv::Mat read_mask(const fs::path& path) {
  const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw DecodeError("cannot decode mask: " + path.string());
  if (raw.channels() != 1 || raw.depth() != CV_8U) {
    throw DecodeError("expected single-channel 8-bit mask: " + path.string());
  }
  cv::Mat out;
  cv::threshold(raw, out, 127, 1, cv::THRESH_BINARY);
  out.convertTo(out, CV_32F);
  return out;
}

void write_map(const fs::path& path, const cv::Mat& map) {
  cv::Mat u8;
  map.convertTo(u8, CV_8U, 255.0);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), u8)) throw IoError("cannot write " + path.string());
}

RawSample decode_sample(const SampleRecord& record) {
  RawSample s;
  s.stem = record.stem();
  s.image = read_image(record.image_path);
  s.mask = read_mask(record.mask_path);
  check_size(s.image, s.mask, record.mask_path);
  if (record.edge_path) {
    s.edge = read_mask(*record.edge_path);
    check_size(s.image, s.edge, *record.edge_path);
  }
  if (record.fp_paths.size() != record.fn_paths.size()) {
    throw ValidationError("record " + s.stem + " has different numbers of FP and FN maps");
  }
  for (const auto& p : record.fp_paths) {
    s.fp.push_back(read_mask(p));
    check_size(s.image, s.fp.back(), p);
  }
  for (const auto& p : record.fn_paths) {
    s.fn.push_back(read_mask(p));
    check_size(s.image, s.fn.back(), p);
  }
  return s;
}

std::pair<GeometricTransform, ColorTransform> sample_transform(const AugmentationConfig& config,
                                                               cv::Size source,
                                                               std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  GeometricTransform g;
  g.target = config.target_size;
  g.flip = rng.bernoulli(config.horizontal_flip_prob);
  const auto [lo, hi] = config.crop_scale_range;
  const double scale = rng.uniform(lo, hi);
  const double side = std::sqrt(scale);
  const int w = std::clamp(static_cast<int>(std::lround(source.width * side)), 1, source.width);
  const int h = std::clamp(static_cast<int>(std::lround(source.height * side)), 1, source.height);
  const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(source.width - w + 1)));
  const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(source.height - h + 1)));
  g.crop = cv::Rect(x, y, w, h);

  const ColorJitter& j = config.color_jitter;
  ColorTransform c;
  c.brightness = rng.uniform(1.0 - j.brightness, 1.0 + j.brightness);
  c.contrast = rng.uniform(1.0 - j.contrast, 1.0 + j.contrast);
  c.saturation = rng.uniform(1.0 - j.saturation, 1.0 + j.saturation);
  c.hue_shift = rng.uniform(-j.hue, j.hue);
  return {g, c};
}

Sample apply_transform(const RawSample& raw, const GeometricTransform& geometry_t,
                       const ColorTransform& color) {
  const cv::Rect bounds(0, 0, raw.image.cols, raw.image.rows);
  if ((geometry_t.crop & bounds) != geometry_t.crop || geometry_t.crop.empty()) {
    throw ValidationError("crop rectangle outside image for " + raw.stem);
  }
  Sample s;
  s.stem = raw.stem;
  s.image = geometry(raw.image, geometry_t, false);
  const bool identity_color = color.brightness == 1.0 && color.contrast == 1.0 &&
                              color.saturation == 1.0 && color.hue_shift == 0.0;
  if (!identity_color) apply_color(s.image, color);
  s.mask = geometry(raw.mask, geometry_t, true);
  if (!raw.edge.empty()) s.edge = geometry(raw.edge, geometry_t, true);
  for (const auto& m : raw.fp) s.fp.push_back(geometry(m, geometry_t, true));
  for (const auto& m : raw.fn) s.fn.push_back(geometry(m, geometry_t, true));
  return s;
}

Sample augment(const RawSample& raw, const AugmentationConfig& config, std::uint64_t seed) {
  const auto [g, c] = sample_transform(config, raw.image.size(), seed);
  return apply_transform(raw, g, c);
}

Sample load_sample(const SampleRecord& record, const AugmentationConfig& config,
                   std::uint64_t seed) {
  return augment(decode_sample(record), config, seed);
}

cv::Mat generate_edge_gt(const cv::Mat& mask, int band_radius) {
  if (band_radius < 1) throw ValidationError("band_radius must be >= 1");
  const cv::Mat m = to_float_binary(mask, "generate_edge_gt");
  const cv::Mat kernel = cv::Mat::ones(2 * band_radius + 1, 2 * band_radius + 1, CV_8U);
  cv::Mat dilated;
  cv::Mat eroded;
  cv::dilate(m, dilated, kernel);
  cv::erode(m, eroded, kernel);
  return dilated - eroded;
}

MistakeMaps generate_mistake_gt(const cv::Mat& prediction, const cv::Mat& gt,
                                double binarize_threshold) {
  if (prediction.size() != gt.size() || prediction.channels() != 1) {
    throw ValidationError("generate_mistake_gt: prediction and ground truth differ in shape");
  }
  const cv::Mat g = to_float_binary(gt, "generate_mistake_gt");
  cv::Mat p;
  if (prediction.depth() == CV_8U) {
    prediction.convertTo(p, CV_32F, 1.0 / 255.0);
  } else {
    prediction.convertTo(p, CV_32F);
  }
  MistakeMaps out{cv::Mat::zeros(g.size(), CV_32F), cv::Mat::zeros(g.size(), CV_32F)};
  for (int y = 0; y < g.rows; ++y) {
    const float* pr = p.ptr<float>(y);
    const float* gr = g.ptr<float>(y);
    float* fp = out.fp.ptr<float>(y);
    float* fn = out.fn.ptr<float>(y);
    for (int x = 0; x < g.cols; ++x) {
      const float mistake = (pr[x] >= binarize_threshold ? 1.0f : 0.0f) - gr[x];
      fp[x] = mistake > 0.0f ? 1.0f : 0.0f;
      fn[x] = mistake < 0.0f ? 1.0f : 0.0f;
    }
  }
  return out;
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<SampleRecord> scan_dataset(const fs::path& root) {
  std::vector<SampleRecord> records;
  const fs::path mask_dir = root / "mask";
  std::vector<std::string> models;
  if (fs::is_directory(root / "fp")) {
    for (const auto& e : fs::directory_iterator(root / "fp")) {
      if (e.is_directory()) models.push_back(e.path().filename().string());
    }
    std::sort(models.begin(), models.end());
  }
  for (const auto& image : list_images(root / "image")) {
    SampleRecord r;
    r.image_path = image;
    r.mask_path = mask_dir / (image.stem().string() + ".png");
    if (!fs::exists(r.mask_path)) continue;
    const fs::path edge = root / "edge" / (image.stem().string() + ".png");
    if (fs::exists(edge)) r.edge_path = edge;
    for (const auto& m : models) {
      const fs::path fp = root / "fp" / m / (image.stem().string() + ".png");
      const fs::path fn = root / "fn" / m / (image.stem().string() + ".png");
      if (fs::exists(fp) && fs::exists(fn)) {
        r.fp_paths.push_back(fp);
        r.fn_paths.push_back(fn);
      }
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<SampleRecord> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  const fs::path base = path.parent_path();
  std::vector<SampleRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      SampleRecord r;
      r.image_path = resolve(base, j.at("image_path").get<std::string>());
      r.mask_path = resolve(base, j.at("mask_path").get<std::string>());
      if (j.contains("edge_path") && !j["edge_path"].is_null()) {
        r.edge_path = resolve(base, j["edge_path"].get<std::string>());
      }
      for (const auto& p : j.value("fp_paths", json::array())) r.fp_paths.push_back(resolve(base, p));
      for (const auto& p : j.value("fn_paths", json::array())) r.fn_paths.push_back(resolve(base, p));
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DecodeError("manifest " + path.string() + " line " + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
  return records;
}

void write_manifest(const fs::path& path, std::span<const SampleRecord> records) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  const fs::path base = path.parent_path();
  auto rel = [&](const fs::path& p) { return p.lexically_relative(base).generic_string(); };
  for (const auto& r : records) {
    json j;
    j["image_path"] = rel(r.image_path);
    j["mask_path"] = rel(r.mask_path);
    j["edge_path"] = r.edge_path ? json(rel(*r.edge_path)) : json(nullptr);
    j["fp_paths"] = json::array();
    j["fn_paths"] = json::array();
    for (const auto& p : r.fp_paths) j["fp_paths"].push_back(rel(p));
    for (const auto& p : r.fn_paths) j["fn_paths"].push_back(rel(p));
    out << j.dump() << '\n';
  }
}

nn::Tensor image_batch(std::span<const Sample> samples) {
  if (samples.empty()) throw ShapeError("image_batch: empty batch");
  const cv::Size size = samples.front().image.size();
  nn::Shape s{static_cast<int>(samples.size()), 3, size.height, size.width};
  std::vector<double> v(s.numel());
  for (int n = 0; n < s.n; ++n) {
    const cv::Mat& img = samples[n].image;
    if (img.size() != size || img.type() != CV_32FC3) {
      throw ShapeError("image_batch: samples differ in size or type");
    }
    for (int y = 0; y < s.h; ++y) {
      const auto* row = img.ptr<cv::Vec3f>(y);
      for (int x = 0; x < s.w; ++x) {
        for (int c = 0; c < 3; ++c) {
          v[((static_cast<std::size_t>(n) * 3 + c) * s.h + y) * s.w + x] = row[x][c];
        }
      }
    }
  }
  return nn::Tensor(s, std::move(v));
}

nn::Tensor map_batch(std::span<const cv::Mat> maps) {
  if (maps.empty()) throw ShapeError("map_batch: empty batch");
  const cv::Size size = maps.front().size();
  nn::Shape s{static_cast<int>(maps.size()), 1, size.height, size.width};
  std::vector<double> v(s.numel());
  for (int n = 0; n < s.n; ++n) {
    cv::Mat f;
    maps[n].convertTo(f, CV_32F);
    if (f.size() != size || f.channels() != 1) throw ShapeError("map_batch: maps differ in size");
    for (int y = 0; y < s.h; ++y) {
      const float* row = f.ptr<float>(y);
      for (int x = 0; x < s.w; ++x) v[(static_cast<std::size_t>(n) * s.h + y) * s.w + x] = row[x];
    }
  }
  return nn::Tensor(s, std::move(v));
}

cv::Mat tensor_plane(const nn::Tensor& t, int n, int c) {
  const nn::Shape& s = t.shape();
  cv::Mat out(s.h, s.w, CV_32F);
  for (int y = 0; y < s.h; ++y) {
    float* row = out.ptr<float>(y);
    for (int x = 0; x < s.w; ++x) row[x] = static_cast<float>(t.at(n, c, y, x));
  }
  return out;
}

}  // namespace glassseg
