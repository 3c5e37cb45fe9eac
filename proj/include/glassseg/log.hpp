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
#ifndef GLASSSEG_LOG_HPP_
#define GLASSSEG_LOG_HPP_

#include <string_view>

namespace glassseg {

enum class LogLevel { kInfo, kWarning, kError, kSilent };

/// Messages below this level are dropped. Defaults to kInfo.
void set_log_level(LogLevel level);

void log_info(std::string_view message);
void log_warning(std::string_view message);
void log_error(std::string_view message);

}  // namespace glassseg

#endif  // GLASSSEG_LOG_HPP_
