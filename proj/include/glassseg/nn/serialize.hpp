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
#ifndef GLASSSEG_NN_SERIALIZE_HPP_
#define GLASSSEG_NN_SERIALIZE_HPP_

#include <filesystem>
#include <iosfwd>

#include "glassseg/nn/layers.hpp"

namespace glassseg::nn {

// Binary layout: "GSTENSOR", u32 version, u64 count, then per entry
// u32 name length, name bytes, u32 kind (0 parameter, 1 buffer),
// 4 x i32 shape, raw little-endian doubles.
void write_state(std::ostream& os, const StateList& state);

/// Reads entries into tensors of `state` with matching names and shapes.
/// With `strict`, every entry in `state` must be present in the stream.
void read_state(std::istream& is, StateList& state, bool strict, const std::string& source);

void save_state_file(const std::filesystem::path& path, const StateList& state);
void load_state_file(const std::filesystem::path& path, StateList& state, bool strict);

}  // namespace glassseg::nn

#endif  // GLASSSEG_NN_SERIALIZE_HPP_
