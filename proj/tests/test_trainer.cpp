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
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "glassseg/errors.hpp"
#include "glassseg/synthbench.hpp"
#include "glassseg/trainer.hpp"
#include "test_util.hpp"

using namespace glassseg;

namespace {

TrainConfig tiny_config(const fs::path& out) {
  TrainConfig c;
  c.batch_size = 2;
  c.max_iters = 3;
  c.input_size = {32, 32};
  c.backbone.reduced_channels = 16;
  c.seed = 11;
  c.out_dir = out;
  return c;
}

fs::path tiny_corpus(const testutil::TempDir& dir, int n = 4) {
  SynthConfig s;
  s.n_images = n;
  s.size = {48, 48};
  s.seed = 5;
  return generate(s, dir / "data");
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::istringstream is(testutil::read_file(p));
  std::vector<std::string> out;
  for (std::string line; std::getline(is, line);) out.push_back(line);
  return out;
}

// Checkpoint bytes after the JSON header (which records out_dir).
std::string checkpoint_payload(const fs::path& p) {
  const std::string bytes = testutil::read_file(p);
  std::uint64_t n = 0;
  std::memcpy(&n, bytes.data() + 8, sizeof n);
  return bytes.substr(16 + n);
}

nn::Tensor probe_image(int size) {
  Rng rng(99);
  return testutil::random_tensor(nn::Shape{1, 3, size, size}, rng, -1.0, 1.0);
}

}  // namespace

TEST_CASE("poly learning rate") {
  TrainConfig c;
  c.max_iters = 2000;
  CHECK(poly_lr(0, c) == doctest::Approx(0.001).epsilon(1e-15));
  CHECK(poly_lr(2000, c) == 0.0);
  CHECK(std::abs(poly_lr(1000, c) - 0.001 * std::pow(0.5, 0.9)) < 1e-15);
  CHECK(std::abs(poly_lr(1000, c) - 5.359e-4) < 1e-7);
  for (int i = 1; i <= 2000; ++i) CHECK(poly_lr(i, c) < poly_lr(i - 1, c));
  CHECK(poly_lr(2500, c) == 0.0);
}

TEST_CASE("configuration keys") {
  TrainConfig c;
  c.set("lr0", "0.01");
  c.set("input_size", "64x96");
  c.set("lambda", "1,1,1,1");
  c.set("supervision", "native");
  CHECK(c.lr0 == 0.01);
  CHECK(c.input_size == cv::Size(96, 64));
  CHECK(c.loss.lambda_per_scale == std::vector<double>{1, 1, 1, 1});
  CHECK(c.supervision == SupervisionMode::kNative);
  CHECK_THROWS_AS(c.set("learning_rate", "0.1"), UsageError);
  CHECK_THROWS_AS(c.set("batch_size", "many"), ConfigError);
  CHECK_THROWS_AS(c.set("supervision", "sideways"), ConfigError);

  TrainConfig d;
  for (const auto& [k, v] : c.to_kv()) d.set(k, v);
  CHECK(d.hash() == c.hash());
  d.out_dir = "elsewhere";
  CHECK(d.hash() == c.hash());
  d.seed = 12345;
  CHECK(d.hash() != c.hash());

  TrainConfig bad;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  testutil::TempDir dir("cfg");
  std::ofstream(dir / "t.cfg") << "# comment\n[train]\nbatch_size = 3\nbackbone = \"tiny_random\"\n";
  TrainConfig f;
  apply_config_file(f, dir / "t.cfg");
  CHECK(f.batch_size == 3);
  apply_overrides(f, {"max_iters=7"});
  CHECK(f.max_iters == 7);
  CHECK_THROWS_AS(apply_overrides(f, {"max_iters"}), UsageError);
}

TEST_CASE("single SGD step without momentum or decay") {
  Rng rng(1);
  nn::Tensor w = testutil::random_tensor(nn::Shape{1, 1, 3, 3}, rng, -1, 1, true);
  const std::vector<double> before(w.data().begin(), w.data().end());
  nn::StateList s;
  s.add("w", w);
  Sgd sgd(s, 0.0, 0.0);
  sgd.zero_grad();
  nn::sum(nn::mul(w, w)).backward();
  const std::vector<double> g(w.grad().begin(), w.grad().end());
  sgd.step(0.05);
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(std::abs(w.data()[i] - (before[i] - 0.05 * g[i])) < 1e-7);
  }
}

TEST_CASE("SGD momentum and decay follow the scalar recurrence") {
  nn::Tensor w(nn::Shape{1, 1, 1, 2}, {0.5, -2.0}, true);
  nn::StateList s;
  s.add("w", w);
  Sgd sgd(s, 0.9, 0.1);
  double w0 = 0.5, buf = 0.0;
  for (int step = 0; step < 4; ++step) {
    sgd.zero_grad();
    nn::sum(nn::mul(w, w)).backward();
    sgd.step(0.01);
    buf = 0.9 * buf + (2 * w0 + 0.1 * w0);
    w0 -= 0.01 * buf;
    CHECK(std::abs(w.data()[0] - w0) < 1e-12);
  }
}

TEST_CASE("checkpoint round trip reproduces the forward pass") {
  testutil::TempDir dir("ckpt");
  TrainConfig c = tiny_config(dir.path());
  GlassSegNet a(c.network_config());
  Rng rng(3);
  for (auto& p : a.state().parameters) {
    for (double& v : p.tensor.data()) v += rng.uniform(-0.01, 0.01);
  }
  for (auto& b : a.state().buffers) {
    for (double& v : *b.values) v += rng.uniform(0.0, 0.1);
  }
  Sgd sgd(a.state(), c.momentum, c.weight_decay);
  Checkpoint meta;
  meta.config = c;
  meta.iteration = 17;
  meta.rng_state = "abc|0";
  meta.config_hash = c.hash();
  save_checkpoint(dir / "x.bin", meta, a, &sgd);

  TrainConfig other = c;
  other.seed = 1234;
  GlassSegNet b(other.network_config());
  const Checkpoint back = load_checkpoint(dir / "x.bin", b, nullptr);
  CHECK(back.iteration == 17);
  CHECK(back.rng_state == "abc|0");
  CHECK(back.config_hash == c.hash());
  CHECK(back.config.hash() == c.hash());

  const nn::Tensor x = probe_image(32);
  nn::NoGradGuard ng;
  const auto ya = a.forward(x, false).output;
  const auto yb = b.forward(x, false).output;
  CHECK(testutil::max_abs_diff(ya.data(), yb.data()) == 0.0);

  std::ofstream(dir / "junk.bin") << "not a checkpoint";
  CHECK_THROWS_AS(read_checkpoint_header(dir / "junk.bin"), DecodeError);
  CHECK_THROWS_AS(read_checkpoint_header(dir / "missing.bin"), IoError);
}

TEST_CASE("zero iterations returns the initial weights") {
  testutil::TempDir dir("zero");
  const fs::path manifest = tiny_corpus(dir);
  TrainConfig c = tiny_config(dir / "run");
  c.max_iters = 0;
  const TrainResult r = train(c, manifest);
  REQUIRE(fs::exists(r.checkpoint.path));
  CHECK(r.checkpoint.iteration == 0);
  CHECK(latest_checkpoint(c.out_dir) == r.checkpoint.path);

  GlassSegNet fresh(c.network_config());
  GlassSegNet loaded(c.network_config());
  for (auto& p : loaded.state().parameters) p.tensor.data()[0] += 1.0;
  load_checkpoint(r.checkpoint.path, loaded, nullptr);
  auto ps = fresh.state().parameters;
  auto qs = loaded.state().parameters;
  REQUIRE(ps.size() == qs.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    CHECK(testutil::max_abs_diff(ps[i].tensor.data(), qs[i].tensor.data()) == 0.0);
  }
}

TEST_CASE("training is deterministic and resumable") {
  testutil::TempDir dir("det");
  const fs::path manifest = tiny_corpus(dir);
  TrainConfig c = tiny_config(dir / "a");
  c.max_iters = 4;
  c.checkpoint_every = 2;
  const TrainResult ra = train(c, manifest);
  c.out_dir = dir / "b";
  const TrainResult rb = train(c, manifest);

  const auto log_a = lines_of(dir / "a/train_log.jsonl");
  REQUIRE(log_a.size() == 4u);
  CHECK(testutil::read_file(dir / "a/train_log.jsonl") == testutil::read_file(dir / "b/train_log.jsonl"));
  CHECK(checkpoint_payload(ra.checkpoint.path) == checkpoint_payload(rb.checkpoint.path));
  CHECK(fs::exists(dir / "a/ckpt_2.bin"));
  CHECK(fs::exists(dir / "a/config.txt"));
  for (const auto& line : log_a) {
    const auto j = nlohmann::json::parse(line);
    CHECK(std::isfinite(j["total"].get<double>()));
    CHECK(j.contains("lr"));
  }

  // Roll run b back to its mid-run checkpoint and resume.
  fs::remove(dir / "b/ckpt_4.bin");
  std::ofstream(dir / "b/latest", std::ios::trunc) << "ckpt_2.bin\n";
  {
    std::ofstream log(dir / "b/train_log.jsonl", std::ios::trunc);
    log << log_a[0] << '\n' << log_a[1] << '\n';
  }
  c.resume = true;
  const TrainResult rc = train(c, manifest);
  CHECK(rc.checkpoint.iteration == 4);
  CHECK(testutil::read_file(dir / "a/train_log.jsonl") == testutil::read_file(dir / "b/train_log.jsonl"));

  GlassSegNet na(c.network_config()), nc(c.network_config());
  load_checkpoint(ra.checkpoint.path, na, nullptr);
  load_checkpoint(rc.checkpoint.path, nc, nullptr);
  auto pa = na.state().parameters;
  auto pc = nc.state().parameters;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(testutil::max_abs_diff(pa[i].tensor.data(), pc[i].tensor.data()) == 0.0);
  }

  TrainConfig changed = c;
  changed.lr0 = 0.5;
  std::ofstream(dir / "b/latest", std::ios::trunc) << "ckpt_2.bin\n";
  CHECK_THROWS_AS(train(changed, manifest), ConfigError);
}

TEST_CASE("dry run validates without writing") {
  testutil::TempDir dir("dry");
  const fs::path manifest = tiny_corpus(dir, 2);
  TrainConfig c = tiny_config(dir / "run");
  const TrainResult r = train(c, manifest, true);
  CHECK(r.dry_run);
  CHECK(std::isfinite(r.last_loss.total));
  CHECK_FALSE(fs::exists(dir / "run"));

  std::ofstream(dir / "empty.jsonl") << "";
  CHECK_THROWS_AS(train(c, dir / "empty.jsonl", true), ValidationError);
}

TEST_CASE("prediction keeps the original resolution") {
  testutil::TempDir dir("pred");
  TrainConfig c = tiny_config(dir / "run");
  GlassSegNet net(c.network_config());
  fs::create_directories(dir / "images");
  Rng rng(4);
  cv::Mat img(64, 100, CV_8UC3);
  cv::randu(img, 0, 255);
  cv::imwrite((dir / "images/wide.png").string(), img);
  std::ofstream(dir / "images/broken.png") << "garbage";

  const PredictSummary s1 = predict(net, c.input_size, dir / "images", dir / "out1");
  const PredictSummary s2 = predict(net, c.input_size, dir / "images", dir / "out2");
  REQUIRE(s1.written.size() == 1u);
  REQUIRE(s1.skipped.size() == 1u);
  CHECK(s1.skipped[0].first.filename() == "broken.png");
  const cv::Mat out = cv::imread(s1.written[0].string(), cv::IMREAD_UNCHANGED);
  CHECK(out.size() == cv::Size(100, 64));
  CHECK(out.channels() == 1);
  CHECK(testutil::read_file(s1.written[0]) == testutil::read_file(s2.written[0]));

  fs::create_directories(dir / "none");
  CHECK(predict(net, c.input_size, dir / "none", dir / "out3").written.empty());
  CHECK_THROWS_AS(predict(net, c.input_size, dir / "missing", dir / "out4"), IoError);
}
