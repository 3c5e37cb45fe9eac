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
// glassseg command line entry point.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "glassseg/data_pipeline.hpp"
#include "glassseg/errors.hpp"
#include "glassseg/log.hpp"
#include "glassseg/metrics.hpp"
#include "glassseg/synthbench.hpp"
#include "glassseg/trainer.hpp"

namespace {

using glassseg::fs::path;
using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Common {
  bool json_output = false;
  bool quiet = false;
};

void emit(const Common& common, const json& machine, const std::string& human) {
  if (common.json_output) std::cout << machine.dump(2) << '\n';
  else std::cout << human;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::optional<path> config;
  std::vector<std::string> overrides;
  path manifest;
  std::optional<path> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_iters;
  std::optional<int> batch_size;
  std::optional<double> lr;
  std::optional<std::string> backbone;
  bool resume = false;
  bool dry_run = false;
};

path resolve_manifest(const path& given, const path& out_dir) {
  if (!glassseg::fs::is_directory(given)) return given;
  if (glassseg::fs::exists(given / "manifest.jsonl")) return given / "manifest.jsonl";
  const auto records = glassseg::scan_dataset(given);
  glassseg::fs::create_directories(out_dir);
  const path manifest = out_dir / "manifest.jsonl";
  glassseg::write_manifest(manifest, records);
  return manifest;
}

int run_train(const TrainArgs& a, const Common& common) {
  glassseg::TrainConfig config;
  if (a.config) glassseg::apply_config_file(config, *a.config);
  glassseg::apply_overrides(config, a.overrides);
  if (a.out) config.out_dir = *a.out;
  if (a.seed) config.seed = *a.seed;
  if (a.max_iters) config.max_iters = *a.max_iters;
  if (a.batch_size) config.batch_size = *a.batch_size;
  if (a.lr) config.lr0 = *a.lr;
  if (a.backbone) config.set("backbone", *a.backbone);
  if (a.resume) config.resume = true;
  config.validate();

  std::string summary = "effective config (flag > file > default):";
  for (const auto& [k, v] : config.to_kv()) summary += " " + k + "=" + v;
  glassseg::log_info(summary);

  const path manifest = resolve_manifest(a.manifest, config.out_dir);
  const glassseg::TrainResult r = glassseg::train(config, manifest, a.dry_run);
  json out{{"dry_run", r.dry_run},
           {"iteration", r.checkpoint.iteration},
           {"checkpoint", r.checkpoint.path.string()},
           {"config_hash", fmt::format("{:016x}", r.checkpoint.config_hash)},
           {"loss", r.last_loss.total}};
  std::string human = r.dry_run ? fmt::format("dry run ok, loss={:.6f}\n", r.last_loss.total)
                                : fmt::format("trained {} iterations, loss={:.6f}, checkpoint {}\n",
                                              r.checkpoint.iteration, r.last_loss.total,
                                              r.checkpoint.path.string());
  emit(common, out, human);
  return kExitOk;
}

// ---------------------------------------------------------------- eval

int run_eval(const path& pred, const path& gt, double threshold, const std::optional<path>& out,
             const Common& common) {
  const glassseg::MetricReport report = glassseg::evaluate_dataset(pred, gt, threshold);
  if (out) glassseg::write_report(report, *out);
  if (!report.has_aggregates) {
    emit(common, report.to_json(), "no matching prediction/ground-truth pairs\n");
    return kExitRuntime;
  }
  std::string human = fmt::format("IoU={:.3f} MAE={:.3f} BER={:.2f}\n", report.iou_pooled, report.mae_mean,
                                  report.ber_mean);
  if (!common.quiet) {
    human += fmt::format("images={} unmatched={} iou_mean={:.4f} ber_pooled={:.2f}\n", report.images.size(),
                         report.unmatched.size(), report.iou_mean, report.ber_pooled);
  }
  emit(common, report.to_json(), human);
  return kExitOk;
}

// ---------------------------------------------------------------- predict

int run_predict(const path& checkpoint, const path& images, const path& out, const Common& common) {
  const path ckpt = glassseg::fs::is_directory(checkpoint) ? glassseg::latest_checkpoint(checkpoint) : checkpoint;
  const glassseg::PredictSummary s = glassseg::predict(ckpt, images, out);
  json skipped = json::array();
  for (const auto& [p, why] : s.skipped) skipped.push_back({{"path", p.string()}, {"reason", why}});
  std::string human = fmt::format("wrote {} maps to {}\n", s.written.size(), out.string());
  for (const auto& [p, why] : s.skipped) human += fmt::format("skipped {}: {}\n", p.string(), why);
  emit(common, json{{"written", s.written.size()}, {"skipped", skipped}, {"out", out.string()}}, human);
  return kExitOk;
}

// ---------------------------------------------------------------- ground truth

int run_gen_mistake(const path& pred_dir, const path& gt_dir, const path& out, double threshold,
                    const Common& common) {
  glassseg::fs::create_directories(out / "fp");
  glassseg::fs::create_directories(out / "fn");
  int written = 0;
  std::vector<std::string> missing;
  for (const path& p : glassseg::list_images(pred_dir)) {
    const path gt = gt_dir / (p.stem().string() + ".png");
    if (!glassseg::fs::exists(gt)) {
      missing.push_back(p.stem().string());
      continue;
    }
    const auto maps = glassseg::generate_mistake_gt(glassseg::read_soft_map(p), glassseg::read_mask(gt), threshold);
    glassseg::write_map(out / "fp" / (p.stem().string() + ".png"), maps.fp);
    glassseg::write_map(out / "fn" / (p.stem().string() + ".png"), maps.fn);
    ++written;
  }
  for (const auto& m : missing) glassseg::log_warning("no ground truth for " + m);
  emit(common, json{{"written", written}, {"missing_gt", missing}},
       fmt::format("wrote {} fp/fn pairs to {}\n", written, out.string()));
  return kExitOk;
}

int run_gen_edge(const path& masks, const path& out, int radius, const Common& common) {
  glassseg::fs::create_directories(out);
  int written = 0;
  for (const path& p : glassseg::list_images(masks)) {
    glassseg::write_map(out / (p.stem().string() + ".png"),
                        glassseg::generate_edge_gt(glassseg::read_mask(p), radius));
    ++written;
  }
  emit(common, json{{"written", written}}, fmt::format("wrote {} edge maps to {}\n", written, out.string()));
  return kExitOk;
}

// ---------------------------------------------------------------- synthbench

struct SynthArgs {
  int n = 16;
  int size = 64;
  std::optional<int> width;
  std::uint64_t seed = 0;
  double alpha_min = 0.15;
  double alpha_max = 0.35;
  int frame_width = 2;
  std::string texture = "shapes";
  path out = "synth";
};

int run_gen_synth(const SynthArgs& a, const Common& common) {
  glassseg::SynthConfig c;
  c.n_images = a.n;
  c.size = {a.width.value_or(a.size), a.size};
  c.seed = a.seed;
  c.glass_alpha_range = {a.alpha_min, a.alpha_max};
  c.frame_width_px = a.frame_width;
  c.background_texture = glassseg::parse_background_texture(a.texture);
  const path manifest = glassseg::generate(c, a.out);
  emit(common, json{{"manifest", manifest.string()}, {"images", a.n}},
       fmt::format("wrote {} images, manifest {}\n", a.n, manifest.string()));
  return kExitOk;
}

// ---------------------------------------------------------------- decompose

int run_decompose(const path& pred_dir, const path& gt_dir, const path& out, double threshold,
                  const Common& common) {
  glassseg::fs::create_directories(out);
  json rows = json::array();
  for (const path& p : glassseg::list_images(pred_dir)) {
    const path gt = gt_dir / (p.stem().string() + ".png");
    if (!glassseg::fs::exists(gt)) {
      glassseg::log_warning("no ground truth for " + p.stem().string());
      continue;
    }
    const auto c = glassseg::export_decomposition(glassseg::read_soft_map(p), glassseg::read_mask(gt), out,
                                                  p.stem().string(), threshold);
    rows.push_back({{"stem", p.stem().string()}, {"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}});
  }
  emit(common, rows, fmt::format("decomposed {} images into {}\n", rows.size(), out.string()));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"glassseg: glass surface segmentation toolkit"};
  app.require_subcommand(1);
  Common common;
  app.add_flag("--json", common.json_output, "Machine-readable JSON on stdout");
  app.add_flag("-q,--quiet", common.quiet, "Only print warnings and errors");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train the network");
  train->add_option("--config", ta.config, "Flat key = value config file")->check(CLI::ExistingFile);
  train->add_option("--set", ta.overrides, "Config override key=value (repeatable)");
  train->add_option("--data,--manifest", ta.manifest, "manifest.jsonl or dataset root")->required();
  train->add_option("--out", ta.out, "Output directory (config key out_dir)");
  train->add_option("--seed", ta.seed, "Random seed");
  train->add_option("--max-iters", ta.max_iters, "Optimizer steps");
  train->add_option("--batch-size", ta.batch_size, "Samples per micro-batch");
  train->add_option("--lr", ta.lr, "Initial learning rate (lr0)");
  train->add_option("--backbone", ta.backbone, "resnet50 | resnext101 | tiny_random");
  train->add_flag("--resume", ta.resume, "Continue from <out>/latest");
  train->add_flag("--dry-run", ta.dry_run, "Validate config and data without updating weights");

  path pred, gt, images, checkpoint, out;
  std::optional<path> report_out;
  double threshold = 0.5;
  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  eval->add_option("--pred", pred, "Prediction directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--gt", gt, "Ground-truth mask directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--threshold", threshold, "Binarization threshold")->capture_default_str();
  eval->add_option("--out", report_out, "Write metrics.json and metrics.csv here");

  auto* predict = app.add_subcommand("predict", "Write soft glass maps");
  predict->add_option("--checkpoint", checkpoint, "Checkpoint file or training directory")->required();
  predict->add_option("--images", images, "Image directory")->required();
  predict->add_option("--out", out, "Output directory")->required();

  auto* mistake = app.add_subcommand("gen-mistake-gt", "Derive FP/FN maps from baseline predictions");
  mistake->add_option("--pred", pred, "Baseline prediction directory")->required()->check(CLI::ExistingDirectory);
  mistake->add_option("--gt", gt, "Ground-truth mask directory")->required()->check(CLI::ExistingDirectory);
  mistake->add_option("--out", out, "Output root (fp/ and fn/ are created)")->required();
  mistake->add_option("--threshold", threshold, "Binarization threshold")->capture_default_str();

  int radius = 2;
  auto* edge = app.add_subcommand("gen-edge-gt", "Derive boundary bands from masks");
  edge->add_option("--masks", gt, "Mask directory")->required()->check(CLI::ExistingDirectory);
  edge->add_option("--out", out, "Output directory")->required();
  edge->add_option("--radius", radius, "Band half-width in pixels")->capture_default_str();

  SynthArgs sa;
  auto* synth = app.add_subcommand("gen-synth", "Generate a synthetic glass dataset");
  synth->add_option("--n", sa.n, "Number of images")->capture_default_str();
  synth->add_option("--size", sa.size, "Image height (and width unless --width)")->capture_default_str();
  synth->add_option("--width", sa.width, "Image width");
  synth->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
  synth->add_option("--alpha-min", sa.alpha_min, "Smallest brightness shift")->capture_default_str();
  synth->add_option("--alpha-max", sa.alpha_max, "Largest brightness shift")->capture_default_str();
  synth->add_option("--frame-width", sa.frame_width, "Frame width in pixels")->capture_default_str();
  synth->add_option("--texture", sa.texture, "noise | gradients | shapes")->capture_default_str();
  synth->add_option("--out", sa.out, "Output root")->capture_default_str();

  auto* decompose = app.add_subcommand("decompose", "Export TP/TN/FP/FN indicator maps");
  decompose->add_option("--pred", pred, "Prediction directory")->required()->check(CLI::ExistingDirectory);
  decompose->add_option("--gt", gt, "Ground-truth mask directory")->required()->check(CLI::ExistingDirectory);
  decompose->add_option("--out", out, "Output directory")->required();
  decompose->add_option("--threshold", threshold, "Binarization threshold")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (!dynamic_cast<const CLI::CallForHelp*>(&e)) std::cerr << app.help();
    return kExitUsage;
  }
  if (common.quiet) glassseg::set_log_level(glassseg::LogLevel::kWarning);

  try {
    if (*train) return run_train(ta, common);
    if (*eval) return run_eval(pred, gt, threshold, report_out, common);
    if (*predict) return run_predict(checkpoint, images, out, common);
    if (*mistake) return run_gen_mistake(pred, gt, out, threshold, common);
    if (*edge) return run_gen_edge(gt, out, radius, common);
    if (*synth) return run_gen_synth(sa, common);
    if (*decompose) return run_decompose(pred, gt, out, threshold, common);
  } catch (const glassseg::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const glassseg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
