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

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <doctest.h>

using namespace btap;
namespace fs = std::filesystem;

namespace {

std::string temp_file(const std::string& tag) {
  return (fs::temp_directory_path() / ("btap_ckpt_" + tag + ".bin")).string();
}

}  // namespace

TEST_CASE("checkpoint round-trips raw entries") {
  CheckpointMap m;
  m["alpha"] = {{2, 3}, {1.0, -2.5, 0.0, 4.25, 1e-3, -7.0}};
  m["beta.w"] = {{1}, {0.5}};
  std::string path = temp_file("roundtrip");
  write_checkpoint(path, m);
  CheckpointMap back = read_checkpoint(path);
  REQUIRE(back.size() == 2);
  CHECK(back.at("alpha").shape == m.at("alpha").shape);
  // f32 storage: values representable in f32 survive exactly.
  for (size_t i = 0; i < 6; ++i) {
    CHECK(back.at("alpha").data[i] ==
          static_cast<double>(static_cast<float>(m.at("alpha").data[i])));
  }
  CHECK(back.at("beta.w").data[0] == 0.5);
  fs::remove(path);
}

TEST_CASE("model parameters survive a save/load cycle") {
  TrackerConfig cfg;
  cfg.iterations = 3;
  cfg.temperature = 0.25;
  ModelParams p = init_params(42, cfg);
  CheckpointMap m;
  params_to_checkpoint(p, "", m);
  params_to_checkpoint(p, "teacher.", m);
  std::string path = temp_file("model");
  write_checkpoint(path, m);

  CheckpointMap back = read_checkpoint(path);
  CHECK(checkpoint_has_prefix(back, "teacher."));
  CHECK(!checkpoint_has_prefix(back, "opt."));
  ModelParams student = params_from_checkpoint(back, "");
  ModelParams teacher = params_from_checkpoint(back, "teacher.");
  CHECK(student.cfg.iterations == 3);
  CHECK(student.cfg.temperature == doctest::Approx(0.25));
  REQUIRE(student.tensors.size() == p.tensors.size());
  for (const auto& [name, t] : p.tensors) {
    const Tensor& s = student.at(name);
    REQUIRE(s.numel() == t.numel());
    for (int64_t i = 0; i < t.numel(); ++i) {
      CHECK(s.at(i) ==
            static_cast<double>(static_cast<float>(t.at(i))));
      CHECK(teacher.at(name).at(i) == s.at(i));
    }
  }
  fs::remove(path);
}

TEST_CASE("corrupt or truncated checkpoints are rejected") {
  std::string path = temp_file("corrupt");
  {
    std::ofstream f(path, std::ios::binary);
    f << "not a checkpoint";
  }
  CHECK_THROWS_AS(read_checkpoint(path), Error);

  CheckpointMap m;
  m["x"] = {{4}, {1.0, 2.0, 3.0, 4.0}};
  write_checkpoint(path, m);
  // Truncate mid-payload.
  auto size = fs::file_size(path);
  fs::resize_file(path, size - 6);
  CHECK_THROWS_AS(read_checkpoint(path), Error);

  CHECK_THROWS_AS(read_checkpoint(temp_file("missing")), Error);
  fs::remove(path);
}
