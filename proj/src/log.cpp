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
#include "glassseg/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace glassseg {

namespace {
std::atomic<LogLevel> g_level{LogLevel::kInfo};
std::mutex g_mutex;

void emit(LogLevel level, const char* tag, std::string_view message) {
  if (level < g_level.load()) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "[" << tag << "] " << message << '\n';
}
}  // namespace

void set_log_level(LogLevel level) { g_level.store(level); }

void log_info(std::string_view message) { emit(LogLevel::kInfo, "info", message); }
void log_warning(std::string_view message) { emit(LogLevel::kWarning, "warn", message); }
void log_error(std::string_view message) { emit(LogLevel::kError, "error", message); }

}  // namespace glassseg
