// Copyright 2026 The btap Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "btap/checkpoint.h"

#include <cstring>
#include <fstream>

#include "btap/common.h"

namespace btap {

namespace {

constexpr char kMagic[4] = {'B', 'T', 'A', 'P'};

// Fixed-width little-endian writers; byte-identical output on any host.
template <typename T>
void put(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  for (size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<unsigned char>((static_cast<uint64_t>(v) >> (8 * i)) &
                                        0xff);
  }
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

void put_f32(std::ostream& os, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put<uint32_t>(os, bits);
}

template <typename T>
T get(std::istream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  uint64_t v = 0;
  for (size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<uint64_t>(buf[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

float get_f32(std::istream& is) {
  uint32_t bits = get<uint32_t>(is);
  float v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace

void write_checkpoint(const std::string& path, const CheckpointMap& entries) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "cannot open checkpoint for writing: " + path);
  os.write(kMagic, 4);
  put<uint32_t>(os, kCheckpointVersion);
  put<uint32_t>(os, static_cast<uint32_t>(entries.size()));
  for (const auto& [name, e] : entries) {
    require(shape_numel(e.shape) == static_cast<int64_t>(e.data.size()),
            "checkpoint entry shape/data mismatch: " + name);
    put<uint32_t>(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<uint8_t>(os, 0);  // dtype tag: f32
    put<uint32_t>(os, static_cast<uint32_t>(e.shape.size()));
    for (int64_t d : e.shape) put<uint64_t>(os, static_cast<uint64_t>(d));
    for (double v : e.data) put_f32(os, static_cast<float>(v));
  }
  require(os.good(), "checkpoint write failed: " + path);
}

CheckpointMap read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), "cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  require(is.good() && std::memcmp(magic, kMagic, 4) == 0,
          "not a checkpoint file: " + path);
  uint32_t version = get<uint32_t>(is);
  require(version == kCheckpointVersion,
          "unsupported checkpoint version in " + path);
  uint32_t count = get<uint32_t>(is);
  CheckpointMap entries;
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t name_len = get<uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    uint8_t dtype = get<uint8_t>(is);
    require(dtype == 0, "unknown dtype tag in checkpoint: " + path);
    uint32_t rank = get<uint32_t>(is);
    CheckpointEntry e;
    for (uint32_t r = 0; r < rank; ++r) {
      e.shape.push_back(static_cast<int64_t>(get<uint64_t>(is)));
    }
    int64_t n = shape_numel(e.shape);
    e.data.resize(static_cast<size_t>(n));
    for (int64_t j = 0; j < n; ++j) e.data[j] = get_f32(is);
    require(is.good(), "truncated checkpoint: " + path);
    entries.emplace(std::move(name), std::move(e));
  }
  return entries;
}

void params_to_checkpoint(const ModelParams& params, const std::string& prefix,
                          CheckpointMap& out) {
  for (const auto& [name, t] : params.tensors) {
    out[prefix + name] = {t.shape(), t.data()};
  }
  const TrackerConfig& c = params.cfg;
  auto knob = [&](const std::string& name, double v) {
    out["config." + name] = {{1}, {v}};
  };
  knob("iterations", c.iterations);
  knob("temperature", c.temperature);
  knob("stride", c.stride);
  knob("feature_dim", c.feature_dim);
  knob("refine_hidden", c.refine_hidden);
  knob("patch", c.patch);
}

bool checkpoint_has_prefix(const CheckpointMap& entries,
                           const std::string& prefix) {
  for (const auto& [name, e] : entries) {
    if (name.rfind(prefix, 0) == 0) return true;
  }
  return false;
}

ModelParams params_from_checkpoint(const CheckpointMap& entries,
                                   const std::string& prefix) {
  TrackerConfig cfg;
  auto knob = [&](const std::string& name) {
    auto it = entries.find("config." + name);
    require(it != entries.end(), "checkpoint missing config." + name);
    return it->second.data[0];
  };
  cfg.iterations = static_cast<int>(knob("iterations"));
  cfg.temperature = knob("temperature");
  cfg.stride = static_cast<int>(knob("stride"));
  cfg.feature_dim = static_cast<int>(knob("feature_dim"));
  cfg.refine_hidden = static_cast<int>(knob("refine_hidden"));
  cfg.patch = static_cast<int>(knob("patch"));

  // Template from init gives the expected name set and shapes; values
  // are then replaced wholesale from the container.
  ModelParams params = init_params(0, cfg);
  for (auto& [name, t] : params.tensors) {
    auto it = entries.find(prefix + name);
    require(it != entries.end(),
            "checkpoint missing tensor: " + prefix + name);
    require(it->second.shape == t.shape(),
            "checkpoint shape mismatch for " + prefix + name);
    t.mutable_data() = it->second.data;
  }
  return params;
}

}  // namespace btap
