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
#include "glassseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>
#include <opencv2/imgproc.hpp>

#include "glassseg/errors.hpp"
#include "glassseg/log.hpp"
#include "glassseg/nn/serialize.hpp"

namespace glassseg {

namespace {

using json = nlohmann::json;

constexpr char kCheckpointMagic[8] = {'G', 'S', 'C', 'K', 'P', 'T', '0', '1'};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("'" + key + "' expects true|false, got '" + v + "'");
}

cv::Size parse_size(const std::string& key, const std::string& v) {
  const auto x = v.find('x');
  if (x == std::string::npos) {
    const int s = static_cast<int>(parse_int(key, v));
    return {s, s};
  }
  // HxW
  const int h = static_cast<int>(parse_int(key, v.substr(0, x)));
  const int w = static_cast<int>(parse_int(key, v.substr(x + 1)));
  return {w, h};
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  return out;
}

std::string format_double(double d) { return fmt::format("{}", d); }

std::string format_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

// Keys that do not alter the optimization trajectory.
bool excluded_from_hash(const std::string& key) {
  return key == "out_dir" || key == "resume" || key == "checkpoint_every";
}

void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

std::string hash_hex(std::uint64_t h) { return fmt::format("{:016x}", h); }

json header_json(const Checkpoint& meta) {
  json kv = json::object();
  for (const auto& [k, v] : meta.config.to_kv()) kv[k] = v;
  return json{{"iteration", meta.iteration},
              {"rng_state", meta.rng_state},
              {"config_hash", hash_hex(meta.config_hash)},
              {"config", kv}};
}

Checkpoint read_header(std::istream& is, const fs::path& path) {
  char magic[sizeof kCheckpointMagic];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw DecodeError(path.string() + ": not a glassseg checkpoint");
  }
  const std::uint64_t len = read_u64(is);
  if (!is || len > (1u << 24)) throw DecodeError(path.string() + ": corrupt checkpoint header");
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw DecodeError(path.string() + ": truncated checkpoint header");
  Checkpoint meta;
  meta.path = path;
  try {
    const json h = json::parse(text);
    meta.iteration = h.at("iteration").get<int>();
    meta.rng_state = h.at("rng_state").get<std::string>();
    meta.config_hash = std::stoull(h.at("config_hash").get<std::string>(), nullptr, 16);
    for (const auto& [k, v] : h.at("config").items()) meta.config.set(k, v.get<std::string>());
  } catch (const json::exception& e) {
    throw DecodeError(path.string() + ": bad checkpoint header: " + e.what());
  }
  return meta;
}

// Decoded training set, kept in memory for the whole run.
struct Corpus {
  std::vector<RawSample> samples;
  int baselines = 0;
};

Corpus decode_corpus(const std::vector<SampleRecord>& records) {
  Corpus corpus;
  for (std::size_t i = 0; i < records.size(); ++i) {
    RawSample raw = decode_sample(records[i]);
    if (raw.edge.empty()) raw.edge = generate_edge_gt(raw.mask);
    const int n = static_cast<int>(raw.fp.size());
    if (i == 0) {
      corpus.baselines = n;
    } else if (n != corpus.baselines) {
      throw ValidationError(fmt::format("sample '{}' has {} mistake maps, expected {}", raw.stem, n,
                                        corpus.baselines));
    }
    corpus.samples.push_back(std::move(raw));
  }
  return corpus;
}

nn::Tensor to_target(const nn::Tensor& t, int h, int w) {
  if (t.shape().h == h && t.shape().w == w) return t;
  return nn::resize_nearest(t, h, w);
}

nn::Tensor to_prediction(const nn::Tensor& logit, int h, int w) {
  if (logit.shape().h == h && logit.shape().w == w) return nn::sigmoid(logit);
  return nn::sigmoid(nn::resize_bilinear(logit, h, w));
}

struct Batch {
  nn::Tensor image;
  nn::Tensor glass;
  nn::Tensor edge;
  std::vector<nn::Tensor> fn;
  std::vector<nn::Tensor> fp;
  std::vector<std::string> stems;
};

Batch make_batch(const std::vector<Sample>& samples, int baselines) {
  Batch b;
  b.image = image_batch(samples);
  std::vector<cv::Mat> maps;
  auto collect = [&](auto pick) {
    maps.clear();
    for (const Sample& s : samples) maps.push_back(pick(s));
    return map_batch(maps);
  };
  b.glass = collect([](const Sample& s) { return s.mask; });
  b.edge = collect([](const Sample& s) { return s.edge; });
  for (int k = 0; k < baselines; ++k) {
    b.fn.push_back(collect([k](const Sample& s) { return s.fn[static_cast<std::size_t>(k)]; }));
    b.fp.push_back(collect([k](const Sample& s) { return s.fp[static_cast<std::size_t>(k)]; }));
  }
  for (const Sample& s : samples) b.stems.push_back(s.stem);
  return b;
}

TotalLoss batch_loss(const NetworkOutput& out, const Batch& batch, const TrainConfig& config) {
  std::vector<ScalePrediction> preds;
  std::vector<ScaleTarget> targets;
  const int H = batch.glass.shape().h;
  const int W = batch.glass.shape().w;
  for (const McLevelOutput* level : out.supervised()) {
    int h = H, w = W;
    if (config.supervision == SupervisionMode::kNative) {
      h = level->glass_logit.shape().h;
      w = level->glass_logit.shape().w;
    }
    preds.push_back({to_prediction(level->glass_logit, h, w), to_prediction(level->fn_logit, h, w),
                     to_prediction(level->fp_logit, h, w)});
    ScaleTarget t;
    t.glass = to_target(batch.glass, h, w);
    for (std::size_t k = 0; k < batch.fn.size(); ++k) {
      t.fn.push_back(to_target(batch.fn[k], h, w));
      t.fp.push_back(to_target(batch.fp[k], h, w));
    }
    targets.push_back(std::move(t));
  }
  int eh = H, ew = W;
  if (config.supervision == SupervisionMode::kNative) {
    eh = out.edge.edge_logit.shape().h;
    ew = out.edge.edge_logit.shape().w;
  }
  return total_loss(preds, to_prediction(out.edge.edge_logit, eh, ew), targets,
                    to_target(batch.edge, eh, ew), config.loss, config.loss_options);
}

json breakdown_json(const LossBreakdown& b) {
  return json{{"total", b.total},
              {"glass", b.glass_per_scale},
              {"fn", b.fn_per_scale},
              {"fp", b.fp_per_scale},
              {"edge", b.edge}};
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os << text;
  os.flush();
  if (!os) throw IoError("cannot write " + path.string());
}

// Sequential sampler over shuffled epochs; the permutation is drawn from the
// trainer rng so that a checkpointed rng state resumes the same order.
class EpochSampler {
 public:
  explicit EpochSampler(std::size_t n) : order_(n), cursor_(n) {}

  std::size_t next(Rng& rng) {
    if (cursor_ >= order_.size()) {
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng.below(i)]);
      cursor_ = 0;
    }
    return order_[cursor_++];
  }

  std::size_t cursor() const { return cursor_; }
  const std::vector<std::size_t>& order() const { return order_; }
  void restore(std::vector<std::size_t> order, std::size_t cursor) {
    order_ = std::move(order);
    cursor_ = cursor;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t cursor_;
};

std::string sampler_state(const EpochSampler& s) {
  std::string out = std::to_string(s.cursor());
  for (std::size_t i : s.order()) out += "," + std::to_string(i);
  return out;
}

void restore_sampler(EpochSampler& s, const std::string& text, std::size_t n) {
  std::vector<std::size_t> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(std::stoull(item));
  if (values.size() != n + 1) throw ConfigError("checkpoint sampler state does not match the dataset size");
  s.restore(std::vector<std::size_t>(values.begin() + 1, values.end()), values.front());
}

}  // namespace

SupervisionMode parse_supervision_mode(const std::string& s) {
  if (s == "input") return SupervisionMode::kInput;
  if (s == "native") return SupervisionMode::kNative;
  throw ConfigError("unknown supervision mode '" + s + "' (expected input|native)");
}

std::string to_string(SupervisionMode m) { return m == SupervisionMode::kInput ? "input" : "native"; }

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(poly_power > 0.0 && poly_power <= 1.0)) throw ConfigError("poly_power must lie in (0, 1]");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (grad_accum < 1) throw ConfigError("grad_accum must be >= 1");
  if (max_iters < 0) throw ConfigError("max_iters must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (input_size.width < 32 || input_size.height < 32 || input_size.width % 32 || input_size.height % 32) {
    throw ConfigError(fmt::format("input_size {}x{} must be positive multiples of 32", input_size.height,
                                  input_size.width));
  }
  if (loss.lambda_per_scale.size() != static_cast<std::size_t>(kSupervisedLevels)) {
    throw ConfigError(fmt::format("lambda needs {} entries", kSupervisedLevels));
  }
  if (loss_options.window < 1 || loss_options.window % 2 == 0) throw ConfigError("window must be odd and >= 1");
  backbone.validate();
  if (attn_channels < 0 || (attn_channels > 0 && attn_channels >= backbone.reduced_channels)) {
    throw ConfigError("attn_channels must be 0 (auto) or lie in (0, reduced_channels)");
  }
  effective_augmentation().validate();
}

void TrainConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "lr0") lr0 = parse_double(key, v);
  else if (key == "momentum") momentum = parse_double(key, v);
  else if (key == "weight_decay") weight_decay = parse_double(key, v);
  else if (key == "poly_power") poly_power = parse_double(key, v);
  else if (key == "batch_size") batch_size = static_cast<int>(parse_int(key, v));
  else if (key == "grad_accum") grad_accum = static_cast<int>(parse_int(key, v));
  else if (key == "max_iters") max_iters = static_cast<int>(parse_int(key, v));
  else if (key == "seed") seed = static_cast<std::uint64_t>(parse_int(key, v));
  else if (key == "input_size") input_size = parse_size(key, v);
  else if (key == "checkpoint_every") checkpoint_every = static_cast<int>(parse_int(key, v));
  else if (key == "backbone") backbone.variant = parse_backbone_variant(v);
  else if (key == "reduced_channels") backbone.reduced_channels = static_cast<int>(parse_int(key, v));
  else if (key == "pretrained") {
    if (v.empty()) backbone.pretrained_weights_path.reset();
    else backbone.pretrained_weights_path = v;
  }
  else if (key == "attn_channels") attn_channels = static_cast<int>(parse_int(key, v));
  else if (key == "reverse_mode") reverse_mode = parse_reverse_mode(v);
  else if (key == "eq4_literal") eq4_literal = parse_bool(key, v);
  else if (key == "lambda") loss.lambda_per_scale = parse_list(key, v);
  else if (key == "gamma") loss.gamma = parse_double(key, v);
  else if (key == "window") loss_options.window = static_cast<int>(parse_int(key, v));
  else if (key == "eq9_literal") loss_options.eq9_literal = parse_bool(key, v);
  else if (key == "edge_weight_source") loss_options.edge_weight_source = parse_edge_weight_source(v);
  else if (key == "supervision") supervision = parse_supervision_mode(v);
  else if (key == "augment") augment = parse_bool(key, v);
  else if (key == "hflip_prob") augmentation.horizontal_flip_prob = parse_double(key, v);
  else if (key == "brightness") augmentation.color_jitter.brightness = parse_double(key, v);
  else if (key == "contrast") augmentation.color_jitter.contrast = parse_double(key, v);
  else if (key == "saturation") augmentation.color_jitter.saturation = parse_double(key, v);
  else if (key == "hue") augmentation.color_jitter.hue = parse_double(key, v);
  else if (key == "crop_scale_min") augmentation.crop_scale_range.first = parse_double(key, v);
  else if (key == "crop_scale_max") augmentation.crop_scale_range.second = parse_double(key, v);
  else if (key == "out_dir") out_dir = v;
  else if (key == "resume") resume = parse_bool(key, v);
  else throw UsageError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> TrainConfig::to_kv() const {
  const auto b = [](bool x) { return std::string(x ? "true" : "false"); };
  return {
      {"lr0", format_double(lr0)},
      {"momentum", format_double(momentum)},
      {"weight_decay", format_double(weight_decay)},
      {"poly_power", format_double(poly_power)},
      {"batch_size", std::to_string(batch_size)},
      {"grad_accum", std::to_string(grad_accum)},
      {"max_iters", std::to_string(max_iters)},
      {"seed", std::to_string(seed)},
      {"input_size", fmt::format("{}x{}", input_size.height, input_size.width)},
      {"checkpoint_every", std::to_string(checkpoint_every)},
      {"backbone", to_string(backbone.variant)},
      {"reduced_channels", std::to_string(backbone.reduced_channels)},
      {"pretrained", backbone.pretrained_weights_path ? backbone.pretrained_weights_path->string() : ""},
      {"attn_channels", std::to_string(attn_channels)},
      {"reverse_mode", to_string(reverse_mode)},
      {"eq4_literal", b(eq4_literal)},
      {"lambda", format_list(loss.lambda_per_scale)},
      {"gamma", format_double(loss.gamma)},
      {"window", std::to_string(loss_options.window)},
      {"eq9_literal", b(loss_options.eq9_literal)},
      {"edge_weight_source", to_string(loss_options.edge_weight_source)},
      {"supervision", to_string(supervision)},
      {"augment", b(augment)},
      {"hflip_prob", format_double(augmentation.horizontal_flip_prob)},
      {"brightness", format_double(augmentation.color_jitter.brightness)},
      {"contrast", format_double(augmentation.color_jitter.contrast)},
      {"saturation", format_double(augmentation.color_jitter.saturation)},
      {"hue", format_double(augmentation.color_jitter.hue)},
      {"crop_scale_min", format_double(augmentation.crop_scale_range.first)},
      {"crop_scale_max", format_double(augmentation.crop_scale_range.second)},
      {"out_dir", out_dir.string()},
      {"resume", b(resume)},
  };
}

std::uint64_t TrainConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (const auto& [k, v] : to_kv()) {
    if (excluded_from_hash(k)) continue;
    feed(k);
    feed(v);
  }
  return h;
}

NetworkConfig TrainConfig::network_config() const {
  NetworkConfig n;
  n.backbone = backbone;
  n.attn_channels = attn_channels;
  n.reverse_mode = reverse_mode;
  n.eq4_literal = eq4_literal;
  n.seed = seed;
  return n;
}

AugmentationConfig TrainConfig::effective_augmentation() const {
  if (!augment) return AugmentationConfig::identity(input_size);
  AugmentationConfig a = augmentation;
  a.target_size = input_size;
  return a;
}

void apply_config_file(TrainConfig& config, const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("{}:{}: expected key = value", path.string(), lineno));
    }
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    config.set(trim(line.substr(0, eq)), value);
  }
}

void apply_overrides(TrainConfig& config, const std::vector<std::string>& overrides) {
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw UsageError("override '" + o + "' is not key=value");
    config.set(trim(o.substr(0, eq)), o.substr(eq + 1));
  }
}

double poly_lr(int iter, const TrainConfig& config) {
  if (iter < 0) throw ValidationError("poly_lr: negative iteration");
  if (iter > config.max_iters) {
    log_warning(fmt::format("poly_lr: iteration {} beyond max_iters {}, using 0", iter, config.max_iters));
    return 0.0;
  }
  if (config.max_iters == 0) return config.lr0;
  const double frac = 1.0 - static_cast<double>(iter) / static_cast<double>(config.max_iters);
  return config.lr0 * std::pow(frac, config.poly_power);
}

Sgd::Sgd(nn::StateList state, double momentum, double weight_decay)
    : state_(std::move(state)), momentum_(momentum), weight_decay_(weight_decay) {
  for (const auto& p : state_.parameters) velocity_.emplace_back(p.tensor.shape(), 0.0);
}

void Sgd::step(double lr) {
  for (std::size_t i = 0; i < state_.parameters.size(); ++i) {
    nn::NamedParameter& p = state_.parameters[i];
    auto w = p.tensor.data();
    auto buf = velocity_[i].data();
    const bool has_grad = p.tensor.has_grad();
    const auto g = has_grad ? p.tensor.grad() : std::span<double>{};
    const double wd = p.decay ? weight_decay_ : 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double d = (has_grad ? g[j] : 0.0) + wd * w[j];
      buf[j] = momentum_ * buf[j] + d;
      w[j] -= lr * buf[j];
    }
  }
}

void Sgd::zero_grad() {
  for (auto& p : state_.parameters) p.tensor.zero_grad();
}

nn::StateList Sgd::buffers() {
  nn::StateList list;
  for (std::size_t i = 0; i < velocity_.size(); ++i) {
    list.add("momentum." + state_.parameters[i].name, velocity_[i]);
  }
  return list;
}

void save_checkpoint(const fs::path& path, const Checkpoint& meta, GlassSegNet& net, Sgd* optimizer) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + tmp.string());
    const std::string header = header_json(meta).dump();
    os.write(kCheckpointMagic, sizeof kCheckpointMagic);
    write_u64(os, header.size());
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    nn::write_state(os, net.state());
    const nn::StateList empty;
    nn::write_state(os, optimizer ? optimizer->buffers() : empty);
    os.flush();
    if (!os) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into " + path.string() + ": " + ec.message());
}

Checkpoint read_checkpoint_header(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  return read_header(is, path);
}

Checkpoint load_checkpoint(const fs::path& path, GlassSegNet& net, Sgd* optimizer) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  Checkpoint meta = read_header(is, path);
  nn::StateList model = net.state();
  nn::read_state(is, model, true, path.string());
  if (optimizer) {
    nn::StateList buffers = optimizer->buffers();
    nn::read_state(is, buffers, true, path.string());
  }
  return meta;
}

fs::path latest_checkpoint(const fs::path& dir) {
  std::ifstream is(dir / "latest");
  std::string name;
  if (!is || !std::getline(is, name) || trim(name).empty()) {
    throw IoError("no checkpoint marker in " + dir.string());
  }
  return dir / trim(name);
}

TrainResult train(const TrainConfig& config, const fs::path& manifest, bool dry_run) {
  config.validate();
  const std::vector<SampleRecord> records = read_manifest(manifest);
  if (records.empty()) throw ValidationError("manifest " + manifest.string() + " lists no samples");
  const Corpus corpus = decode_corpus(records);
  const AugmentationConfig augmentation = config.effective_augmentation();
  const int per_step = config.batch_size;

  GlassSegNet net(config.network_config());
  Sgd optimizer(net.state(), config.momentum, config.weight_decay);
  Rng rng(mix_seed(config.seed, 0x7261696eULL));
  EpochSampler sampler(corpus.samples.size());

  TrainResult result;
  result.checkpoint.config = config;
  result.checkpoint.config_hash = config.hash();

  if (dry_run) {
    nn::NoGradGuard no_grad;
    std::vector<Sample> batch;
    for (int b = 0; b < std::min<int>(per_step, static_cast<int>(corpus.samples.size())); ++b) {
      batch.push_back(augment(corpus.samples[static_cast<std::size_t>(b)],
                              AugmentationConfig::identity(config.input_size), 0));
    }
    const Batch data = make_batch(batch, corpus.baselines);
    const NetworkOutput out = net.forward(data.image, false);
    const TotalLoss loss = batch_loss(out, data, config);
    if (!std::isfinite(loss.breakdown.total)) throw NumericError("dry run produced a non-finite loss");
    result.last_loss = loss.breakdown;
    result.dry_run = true;
    result.checkpoint.rng_state = rng.state();
    log_info(fmt::format("dry run ok: {} samples, {} baselines, loss {:.6f}", corpus.samples.size(),
                         corpus.baselines, loss.breakdown.total));
    return result;
  }

  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw IoError("cannot create " + config.out_dir.string() + ": " + ec.message());

  int start = 0;
  if (config.resume && fs::exists(config.out_dir / "latest")) {
    const fs::path path = latest_checkpoint(config.out_dir);
    const Checkpoint meta = load_checkpoint(path, net, &optimizer);
    if (meta.config_hash != config.hash()) {
      throw ConfigError("checkpoint " + path.string() + " was written with a different configuration");
    }
    const auto bar = meta.rng_state.find('|');
    if (bar == std::string::npos) throw DecodeError(path.string() + ": bad rng state");
    rng.set_state(meta.rng_state.substr(0, bar));
    restore_sampler(sampler, meta.rng_state.substr(bar + 1), corpus.samples.size());
    start = meta.iteration;
    log_info(fmt::format("resuming from {} at iteration {}", path.string(), start));
  }

  {
    std::string text;
    for (const auto& [k, v] : config.to_kv()) text += k + " = " + v + "\n";
    write_text_file(config.out_dir / "config.txt", text);
  }

  auto checkpoint = [&](int iter) {
    Checkpoint meta;
    meta.config = config;
    meta.iteration = iter;
    meta.rng_state = rng.state() + "|" + sampler_state(sampler);
    meta.config_hash = config.hash();
    const std::string name = fmt::format("ckpt_{}.bin", iter);
    meta.path = config.out_dir / name;
    save_checkpoint(meta.path, meta, net, &optimizer);
    write_text_file(config.out_dir / "latest", name + "\n");
    return meta;
  };

  const fs::path log_path = config.out_dir / "train_log.jsonl";
  std::ofstream log(log_path, start > 0 ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot write " + log_path.string());

  if (config.max_iters == 0 || start >= config.max_iters) {
    result.checkpoint = checkpoint(start);
    return result;
  }

  for (int iter = start; iter < config.max_iters; ++iter) {
    const double lr = poly_lr(iter, config);
    optimizer.zero_grad();
    LossBreakdown step;
    for (int micro = 0; micro < config.grad_accum; ++micro) {
      std::vector<Sample> samples;
      for (int b = 0; b < per_step; ++b) {
        const std::size_t idx = sampler.next(rng);
        samples.push_back(augment(corpus.samples[idx], augmentation, rng.next()));
      }
      const Batch data = make_batch(samples, corpus.baselines);
      const NetworkOutput out = net.forward(data.image, true);
      const TotalLoss loss = batch_loss(out, data, config);
      if (!std::isfinite(loss.breakdown.total)) {
        std::string stems;
        for (const auto& s : data.stems) stems += (stems.empty() ? "" : ", ") + s;
        log_error(fmt::format("non-finite loss at iteration {}; batch: {}", iter, stems));
        log.flush();
        throw NumericError(fmt::format("non-finite loss at iteration {} (batch: {})", iter, stems));
      }
      nn::affine(loss.total, 1.0 / config.grad_accum).backward();
      if (micro == 0) {
        step = loss.breakdown;
      } else {
        step.total += loss.breakdown.total;
        step.edge += loss.breakdown.edge;
        for (std::size_t i = 0; i < step.glass_per_scale.size(); ++i) {
          step.glass_per_scale[i] += loss.breakdown.glass_per_scale[i];
          step.fn_per_scale[i] += loss.breakdown.fn_per_scale[i];
          step.fp_per_scale[i] += loss.breakdown.fp_per_scale[i];
        }
      }
    }
    if (config.grad_accum > 1) {
      const double s = 1.0 / config.grad_accum;
      step.total *= s;
      step.edge *= s;
      for (std::size_t i = 0; i < step.glass_per_scale.size(); ++i) {
        step.glass_per_scale[i] *= s;
        step.fn_per_scale[i] *= s;
        step.fp_per_scale[i] *= s;
      }
    }
    optimizer.step(lr);

    json record = breakdown_json(step);
    record["iter"] = iter;
    record["lr"] = lr;
    log << record.dump() << '\n';
    log.flush();
    if (!log) throw IoError("write failed for " + log_path.string());
    result.last_loss = step;

    const int done = iter + 1;
    if (done == config.max_iters || (config.checkpoint_every > 0 && done % config.checkpoint_every == 0)) {
      result.checkpoint = checkpoint(done);
    }
  }
  return result;
}

PredictSummary predict(GlassSegNet& net, cv::Size input_size, const fs::path& image_dir,
                       const fs::path& out_dir) {
  PredictSummary summary;
  if (!fs::is_directory(image_dir)) throw IoError("not a directory: " + image_dir.string());
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  nn::NoGradGuard no_grad;
  for (const fs::path& path : list_images(image_dir)) {
    cv::Mat image;
    try {
      image = read_image(path);
    } catch (const DecodeError& e) {
      log_warning(fmt::format("skipping {}: {}", path.string(), e.what()));
      summary.skipped.emplace_back(path, e.what());
      continue;
    }
    cv::Mat resized;
    if (image.size() == input_size) resized = image;
    else cv::resize(image, resized, input_size, 0, 0, cv::INTER_LINEAR);
    Sample s;
    s.image = resized;
    const std::vector<Sample> one = {s};
    const NetworkOutput out = net.forward(image_batch(one), false);
    cv::Mat prob = tensor_plane(out.output, 0);
    if (prob.size() != image.size()) {
      cv::Mat up;
      cv::resize(prob, up, image.size(), 0, 0, cv::INTER_LINEAR);
      prob = up;
    }
    const fs::path target = out_dir / (path.stem().string() + ".png");
    write_map(target, prob);
    summary.written.push_back(target);
  }
  return summary;
}

PredictSummary predict(const fs::path& checkpoint, const fs::path& image_dir, const fs::path& out_dir) {
  const Checkpoint meta = read_checkpoint_header(checkpoint);
  NetworkConfig nc = meta.config.network_config();
  nc.backbone.pretrained_weights_path.reset();
  GlassSegNet net(nc);
  load_checkpoint(checkpoint, net, nullptr);
  return predict(net, meta.config.input_size, image_dir, out_dir);
}

}  // namespace glassseg
