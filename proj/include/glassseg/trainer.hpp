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
#ifndef GLASSSEG_TRAINER_HPP_
#define GLASSSEG_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "glassseg/data_pipeline.hpp"
#include "glassseg/losses.hpp"
#include "glassseg/network.hpp"

namespace glassseg {

/// Where the per-scale losses are evaluated. kInput upsamples every
/// prediction logit to the input resolution; kNative downsamples the
/// targets (nearest) to each prediction's own resolution.
enum class SupervisionMode { kInput, kNative };

SupervisionMode parse_supervision_mode(const std::string& s);
std::string to_string(SupervisionMode m);

struct TrainConfig {
  double lr0 = 0.001;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double poly_power = 0.9;
  int batch_size = 12;
  int grad_accum = 1;  // micro-batches of batch_size per optimizer step
  int max_iters = 2000;
  std::uint64_t seed = 0;
  cv::Size input_size = {416, 416};
  int checkpoint_every = 0;  // 0 writes only the final checkpoint

  BackboneConfig backbone;
  int attn_channels = 0;
  ReverseMode reverse_mode = ReverseMode::kSigmoidComplement;
  bool eq4_literal = false;

  LossWeights loss;
  LossOptions loss_options;
  SupervisionMode supervision = SupervisionMode::kInput;

  bool augment = true;
  AugmentationConfig augmentation;  // target_size follows input_size

  fs::path out_dir = "runs/train";
  bool resume = false;

  void validate() const;

  /// Sets one key from its text form. Unknown key -> UsageError, bad value
  /// -> ConfigError.
  void set(const std::string& key, const std::string& value);

  /// Every key with its current value, in a fixed order.
  std::vector<std::pair<std::string, std::string>> to_kv() const;

  /// FNV-1a over the keys that influence the optimization trajectory.
  std::uint64_t hash() const;

  NetworkConfig network_config() const;
  AugmentationConfig effective_augmentation() const;
};

/// Applies a flat `key = value` file ('#' starts a comment, values may be
/// quoted) on top of `config`.
void apply_config_file(TrainConfig& config, const fs::path& path);

/// Applies `key=value` overrides.
void apply_overrides(TrainConfig& config, const std::vector<std::string>& overrides);

/// lr0 * (1 - iter / max_iters)^poly_power; iterations past max_iters give 0
/// with a warning.
double poly_lr(int iter, const TrainConfig& config);

/// SGD with momentum and L2 weight decay, matching torch.optim.SGD:
///   buf = momentum * buf + (g + wd * w);  w -= lr * buf
class Sgd {
 public:
  Sgd(nn::StateList state, double momentum, double weight_decay);

  void step(double lr);
  void zero_grad();

  /// Momentum buffers as a state list ("momentum.<param name>").
  nn::StateList buffers();

 private:
  nn::StateList state_;
  double momentum_;
  double weight_decay_;
  std::vector<nn::Tensor> velocity_;
};

struct Checkpoint {
  TrainConfig config;
  int iteration = 0;
  std::string rng_state;
  std::uint64_t config_hash = 0;
  fs::path path;
};

/// Layout: "GSCKPT01", u64 header length, JSON header, model state,
/// optimizer state (both in the nn::write_state format).
void save_checkpoint(const fs::path& path, const Checkpoint& meta, GlassSegNet& net, Sgd* optimizer);

/// Reads only the header.
Checkpoint read_checkpoint_header(const fs::path& path);

/// Reads header and weights into `net` (and `optimizer` when non-null).
Checkpoint load_checkpoint(const fs::path& path, GlassSegNet& net, Sgd* optimizer);

/// Path named by <dir>/latest.
fs::path latest_checkpoint(const fs::path& dir);

struct TrainResult {
  Checkpoint checkpoint;
  LossBreakdown last_loss;
  bool dry_run = false;
};

/// Runs max_iters optimizer steps over the samples of `manifest`.
/// Writes <out_dir>/train_log.jsonl, <out_dir>/config.txt,
/// <out_dir>/ckpt_<iter>.bin and <out_dir>/latest. With `dry_run` the data
/// and config are validated and one no-grad forward is run; nothing is
/// written and no weight changes.
TrainResult train(const TrainConfig& config, const fs::path& manifest, bool dry_run = false);

struct PredictSummary {
  std::vector<fs::path> written;
  std::vector<std::pair<fs::path, std::string>> skipped;  // path, reason
};

/// Soft glass maps as 8-bit PNGs at the original resolution of every image
/// in `image_dir` (bilinear upsampling of the input-size prediction).
PredictSummary predict(const fs::path& checkpoint, const fs::path& image_dir, const fs::path& out_dir);

/// Same, with an already loaded network at `input_size`.
PredictSummary predict(GlassSegNet& net, cv::Size input_size, const fs::path& image_dir,
                       const fs::path& out_dir);

}  // namespace glassseg

#endif  // GLASSSEG_TRAINER_HPP_
