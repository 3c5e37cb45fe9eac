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
#include "glassseg/nn/serialize.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "glassseg/errors.hpp"

namespace glassseg::nn {

namespace {

constexpr char kMagic[8] = {'G', 'S', 'T', 'E', 'N', 'S', 'O', 'R'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& source) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw DecodeError("truncated tensor file: " + source);
  }
  return v;
}

struct Entry {
  std::uint32_t kind = 0;
  Shape shape;
  std::vector<double> values;
};

}  // namespace

void write_state(std::ostream& os, const StateList& state) {
  os.write(kMagic, sizeof(kMagic));
  put(os, kVersion);
  put(os, static_cast<std::uint64_t>(state.parameters.size() + state.buffers.size()));
  auto header = [&](const std::string& name, std::uint32_t kind, const Shape& s) {
    put(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put(os, kind);
    for (int d : {s.n, s.c, s.h, s.w}) put(os, static_cast<std::int32_t>(d));
  };
  for (const auto& p : state.parameters) {
    header(p.name, 0, p.tensor.shape());
    auto v = p.tensor.data();
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
  }
  for (const auto& b : state.buffers) {
    header(b.name, 1, Shape{static_cast<int>(b.values->size()), 1, 1, 1});
    os.write(reinterpret_cast<const char*>(b.values->data()),
             static_cast<std::streamsize>(b.values->size() * sizeof(double)));
  }
}

void read_state(std::istream& is, StateList& state, bool strict, const std::string& source) {
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DecodeError("not a tensor file: " + source);
  }
  if (get<std::uint32_t>(is, source) != kVersion) {
    throw DecodeError("unsupported tensor file version: " + source);
  }
  const auto count = get<std::uint64_t>(is, source);
  std::map<std::string, Entry> entries;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(is, source);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw DecodeError("truncated tensor file: " + source);
    Entry e;
    e.kind = get<std::uint32_t>(is, source);
    e.shape.n = get<std::int32_t>(is, source);
    e.shape.c = get<std::int32_t>(is, source);
    e.shape.h = get<std::int32_t>(is, source);
    e.shape.w = get<std::int32_t>(is, source);
    e.values.resize(e.shape.numel());
    if (!is.read(reinterpret_cast<char*>(e.values.data()),
                 static_cast<std::streamsize>(e.values.size() * sizeof(double)))) {
      throw DecodeError("truncated tensor file: " + source);
    }
    entries.emplace(std::move(name), std::move(e));
  }

  for (auto& p : state.parameters) {
    auto it = entries.find(p.name);
    if (it == entries.end()) {
      if (strict) throw DecodeError("tensor '" + p.name + "' missing from " + source);
      continue;
    }
    if (!(it->second.shape == p.tensor.shape())) {
      throw ShapeError("tensor '" + p.name + "' in " + source + " has shape " +
                       it->second.shape.str() + ", expected " + p.tensor.shape().str());
    }
    std::copy(it->second.values.begin(), it->second.values.end(), p.tensor.data().begin());
  }
  for (auto& b : state.buffers) {
    auto it = entries.find(b.name);
    if (it == entries.end()) {
      if (strict) throw DecodeError("buffer '" + b.name + "' missing from " + source);
      continue;
    }
    if (it->second.values.size() != b.values->size()) {
      throw ShapeError("buffer '" + b.name + "' in " + source + " has wrong size");
    }
    *b.values = it->second.values;
  }
}

void save_state_file(const std::filesystem::path& path, const StateList& state) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  write_state(os, state);
  if (!os.flush()) throw IoError("write failed: " + path.string());
}

void load_state_file(const std::filesystem::path& path, StateList& state, bool strict) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open weights file: " + path.string());
  read_state(is, state, strict, path.string());
}

}  // namespace glassseg::nn
