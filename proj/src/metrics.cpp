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
#include "glassseg/metrics.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>

#include "glassseg/data_pipeline.hpp"
#include "glassseg/errors.hpp"
#include "glassseg/log.hpp"

namespace glassseg {

namespace {

cv::Mat as_float(const cv::Mat& m) {
  if (m.channels() != 1) throw ValidationError("metric maps must be single-channel");
  cv::Mat f;
  m.convertTo(f, CV_32F, m.depth() == CV_8U ? 1.0 / 255.0 : 1.0);
  return f;
}

}  // namespace

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  tn += o.tn;
  fp += o.fp;
  fn += o.fn;
  n_p += o.n_p;
  n_n += o.n_n;
  return *this;
}

ConfusionCounts confusion(const cv::Mat& pred, const cv::Mat& gt, double threshold,
                          ConfusionMaps* maps) {
  if (pred.size() != gt.size()) {
    throw ValidationError("confusion: prediction and ground truth differ in size");
  }
  const cv::Mat p = as_float(pred);
  const cv::Mat g = as_float(gt);
  if (maps != nullptr) {
    for (cv::Mat* m : {&maps->tp, &maps->tn, &maps->fp, &maps->fn}) {
      *m = cv::Mat::zeros(g.size(), CV_8U);
    }
  }
  ConfusionCounts c;
  for (int y = 0; y < g.rows; ++y) {
    const float* pr = p.ptr<float>(y);
    const float* gr = g.ptr<float>(y);
    for (int x = 0; x < g.cols; ++x) {
      const bool predicted = pr[x] >= threshold;
      const bool glass = gr[x] >= 0.5f;
      cv::Mat* which = nullptr;
      if (predicted && glass) {
        ++c.tp;
        if (maps) which = &maps->tp;
      } else if (!predicted && !glass) {
        ++c.tn;
        if (maps) which = &maps->tn;
      } else if (predicted) {
        ++c.fp;
        if (maps) which = &maps->fp;
      } else {
        ++c.fn;
        if (maps) which = &maps->fn;
      }
      if (which != nullptr) which->at<std::uint8_t>(y, x) = 1;
    }
  }
  c.n_p = c.tp + c.fn;
  c.n_n = c.tn + c.fp;
  return c;
}

double iou(const ConfusionCounts& c) {
  const std::int64_t uni = c.tp + c.fp + c.fn;
  if (uni == 0) {
    log_info("iou: empty prediction and ground truth, reporting 1");
    return 1.0;
  }
  return static_cast<double>(c.tp) / static_cast<double>(uni);
}

double mae(const cv::Mat& pred, const cv::Mat& gt) {
  if (pred.size() != gt.size()) throw ValidationError("mae: maps differ in size");
  const cv::Mat p = as_float(pred);
  const cv::Mat g = as_float(gt);
  double total = 0.0;
  for (int y = 0; y < g.rows; ++y) {
    const float* pr = p.ptr<float>(y);
    const float* gr = g.ptr<float>(y);
    for (int x = 0; x < g.cols; ++x) total += std::abs(static_cast<double>(pr[x]) - gr[x]);
  }
  return total / static_cast<double>(g.total());
}

std::optional<double> ber(const ConfusionCounts& c) {
  if (c.n_p == 0 || c.n_n == 0) return std::nullopt;
  const double tpr = static_cast<double>(c.tp) / static_cast<double>(c.n_p);
  const double tnr = static_cast<double>(c.tn) / static_cast<double>(c.n_n);
  return 100.0 * (1.0 - 0.5 * (tpr + tnr));
}

MetricReport evaluate_dataset(const std::filesystem::path& pred_dir,
                              const std::filesystem::path& gt_dir, double threshold) {
  std::map<std::string, std::filesystem::path> preds;
  std::map<std::string, std::filesystem::path> gts;
  for (const auto& p : list_images(pred_dir)) preds[p.stem().string()] = p;
  for (const auto& p : list_images(gt_dir)) gts[p.stem().string()] = p;

  MetricReport report;
  for (const auto& [stem, path] : preds) {
    if (!gts.count(stem)) report.unmatched.push_back(stem);
  }
  for (const auto& [stem, path] : gts) {
    if (!preds.count(stem)) report.unmatched.push_back(stem);
  }

  double ber_sum = 0.0;
  double iou_sum = 0.0;
  double mae_sum = 0.0;
  for (const auto& [stem, pred_path] : preds) {
    auto it = gts.find(stem);
    if (it == gts.end()) continue;
    try {
      const cv::Mat pred = read_soft_map(pred_path);
      const cv::Mat gt = read_mask(it->second);
      if (pred.size() != gt.size()) {
        throw AlignmentError("prediction " + pred_path.string() + " and mask differ in size");
      }
      ImageMetrics m;
      m.stem = stem;
      m.counts = confusion(pred, gt, threshold);
      m.iou = iou(m.counts);
      m.mae = mae(pred, gt);
      m.ber = ber(m.counts);
      if (!m.ber) log_warning("ber: " + stem + " has a single-class ground truth, skipped");
      report.pooled += m.counts;
      iou_sum += m.iou;
      mae_sum += m.mae;
      if (m.ber) {
        ber_sum += *m.ber;
        ++report.ber_samples;
      }
      report.images.push_back(std::move(m));
    } catch (const Error& e) {
      report.errors.push_back(stem + ": " + e.what());
    }
  }

  if (!report.images.empty()) {
    const double n = static_cast<double>(report.images.size());
    report.has_aggregates = true;
    report.iou_pooled = iou(report.pooled);
    report.iou_mean = iou_sum / n;
    report.mae_mean = mae_sum / n;
    report.ber_mean = report.ber_samples > 0 ? ber_sum / static_cast<double>(report.ber_samples) : 0.0;
    report.ber_pooled = ber(report.pooled).value_or(0.0);
  } else {
    report.errors.push_back("no prediction in " + pred_dir.string() + " matches a mask in " +
                            gt_dir.string());
  }
  return report;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  j["images"] = nlohmann::json::array();
  for (const auto& m : images) {
    nlohmann::json r;
    r["stem"] = m.stem;
    r["iou"] = m.iou;
    r["mae"] = m.mae;
    r["ber"] = m.ber ? nlohmann::json(*m.ber) : nlohmann::json(nullptr);
    r["tp"] = m.counts.tp;
    r["tn"] = m.counts.tn;
    r["fp"] = m.counts.fp;
    r["fn"] = m.counts.fn;
    j["images"].push_back(r);
  }
  j["unmatched"] = unmatched;
  j["errors"] = errors;
  if (has_aggregates) {
    j["aggregate"] = {
        {"iou", iou_pooled},         {"iou_pooled", iou_pooled}, {"iou_mean", iou_mean},
        {"mae", mae_mean},           {"ber", ber_mean},          {"ber_mean", ber_mean},
        {"ber_pooled", ber_pooled},  {"ber_samples", ber_samples},
        {"images", images.size()},
    };
  } else {
    j["aggregate"] = nullptr;
  }
  return j;
}

std::string MetricReport::to_csv() const {
  std::ostringstream os;
  os << "stem,iou,mae,ber\n";
  for (const auto& m : images) {
    os << m.stem << ',' << fmt::format("{:.6f},{:.6f},", m.iou, m.mae)
       << (m.ber ? fmt::format("{:.4f}", *m.ber) : std::string()) << '\n';
  }
  return os.str();
}

void write_report(const MetricReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream js(out_dir / "metrics.json");
  std::ofstream csv(out_dir / "metrics.csv");
  if (!js || !csv) throw IoError("cannot write metrics report into " + out_dir.string());
  js << report.to_json().dump(2) << '\n';
  csv << report.to_csv();
}

ConfusionCounts export_decomposition(const cv::Mat& pred, const cv::Mat& gt,
                                     const std::filesystem::path& out_dir,
                                     const std::string& stem, double threshold) {
  ConfusionMaps maps;
  const ConfusionCounts c = confusion(pred, gt, threshold, &maps);
  std::filesystem::create_directories(out_dir);
  const std::pair<const char*, const cv::Mat*> parts[] = {
      {"tp", &maps.tp}, {"tn", &maps.tn}, {"fp", &maps.fp}, {"fn", &maps.fn}};
  for (const auto& [name, m] : parts) {
    const auto path = out_dir / (stem + "." + name + ".png");
    if (!cv::imwrite(path.string(), *m * 255)) throw IoError("cannot write " + path.string());
  }
  return c;
}

}  // namespace glassseg
