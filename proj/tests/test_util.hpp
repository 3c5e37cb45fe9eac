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
#ifndef GLASSSEG_TESTS_TEST_UTIL_HPP_
#define GLASSSEG_TESTS_TEST_UTIL_HPP_

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "glassseg/nn/random.hpp"
#include "glassseg/nn/tensor.hpp"

namespace testutil {

namespace fs = std::filesystem;
using glassseg::Rng;
using glassseg::nn::Shape;
using glassseg::nn::Tensor;

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = false) {
  std::vector<double> v(shape.numel());
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(shape, std::move(v), requires_grad);
}

inline Tensor binary_tensor(Shape shape, Rng& rng, double p = 0.5) {
  std::vector<double> v(shape.numel());
  for (double& x : v) x = rng.bernoulli(p) ? 1.0 : 0.0;
  return Tensor(shape, std::move(v));
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

struct GradCheck {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
};

/// Compares the autograd gradient of `loss()` with respect to `param` against
/// central differences. Entries whose analytic and numeric values are both
/// below `floor` in magnitude are compared absolutely.
inline GradCheck check_gradient(const std::function<Tensor()>& loss, Tensor& param,
                                double step = 1e-6, double floor = 1e-6,
                                std::size_t max_entries = 0) {
  param.zero_grad();
  loss().backward();
  const std::vector<double> analytic(param.grad().begin(), param.grad().end());
  GradCheck out;
  auto values = param.data();
  const std::size_t n = max_entries ? std::min(max_entries, values.size()) : values.size();
  const std::size_t stride = std::max<std::size_t>(1, values.size() / std::max<std::size_t>(1, n));
  for (std::size_t i = 0; i < values.size() && out.checked < n; i += stride) {
    const double saved = values[i];
    values[i] = saved + step;
    const double up = loss().item();
    values[i] = saved - step;
    const double down = loss().item();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double err = std::abs(numeric - analytic[i]);
    const double scale = std::max({std::abs(numeric), std::abs(analytic[i]), floor});
    out.max_abs_error = std::max(out.max_abs_error, err);
    out.max_rel_error = std::max(out.max_rel_error, err / scale);
    ++out.checked;
  }
  return out;
}

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "glassseg") {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            (tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::FILE* f = std::fopen(p.string().c_str(), "rb");
  if (!f) return {};
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
  std::fclose(f);
  return out;
}

}  // namespace testutil

#endif  // GLASSSEG_TESTS_TEST_UTIL_HPP_
