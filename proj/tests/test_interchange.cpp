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

#include "btap/interchange.h"

#include <filesystem>

#include <doctest.h>

#include "btap/synthdata.h"

using namespace btap;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("btap_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("clip round-trips through the interchange format") {
  SceneConfig cfg;
  cfg.T = 5;
  cfg.H = 24;
  cfg.W = 20;
  cfg.seed = 4;
  cfg.min_radius = 4;
  cfg.max_radius = 6;
  Scene s = generate_scene(cfg);

  Clip clip;
  clip.video = s.video;
  clip.tracks = s.tracks;
  clip.has_tracks = true;
  clip.depth = s.depth;
  clip.has_depth = true;

  fs::path dir = temp_dir("roundtrip");
  write_clip((dir / "clip0").string(), clip);
  Clip back = read_clip((dir / "clip0").string());

  CHECK(back.video.T == 5);
  CHECK(back.video.H == 24);
  CHECK(back.video.W == 20);
  REQUIRE(back.has_tracks);
  REQUIRE(back.has_depth);
  REQUIRE(back.tracks.size() == clip.tracks.size());
  // RGB survives byte quantization exactly on a second round trip.
  for (size_t i = 0; i < clip.video.rgb.size(); ++i) {
    CHECK(back.video.rgb[i] ==
          byte_to_float(float_to_byte(clip.video.rgb[i])));
  }
  for (size_t i = 0; i < clip.tracks.size(); ++i) {
    for (int t = 0; t < cfg.T; ++t) {
      CHECK(back.tracks[i].p[t].x == clip.tracks[i].p[t].x);
      CHECK(back.tracks[i].p[t].y == clip.tracks[i].p[t].y);
      CHECK(back.tracks[i].o[t] == clip.tracks[i].o[t]);
    }
  }
  CHECK(back.depth == clip.depth);
  fs::remove_all(dir);
}

TEST_CASE("unlabeled clips omit tracks and depth") {
  Clip clip;
  clip.video = Video::zeros(2, 16, 16);
  fs::path dir = temp_dir("unlabeled");
  write_clip((dir / "c").string(), clip);
  CHECK(!fs::exists(dir / "c" / "tracks.json"));
  CHECK(!fs::exists(dir / "c" / "depth.f32"));
  Clip back = read_clip((dir / "c").string());
  CHECK(!back.has_tracks);
  CHECK(!back.has_depth);
  fs::remove_all(dir);
}

TEST_CASE("list_clip_dirs returns sorted clip directories only") {
  fs::path dir = temp_dir("list");
  Clip clip;
  clip.video = Video::zeros(1, 16, 16);
  write_clip((dir / "b_clip").string(), clip);
  write_clip((dir / "a_clip").string(), clip);
  fs::create_directories(dir / "not_a_clip");
  auto dirs = list_clip_dirs(dir.string());
  REQUIRE(dirs.size() == 2);
  CHECK(dirs[0] == (dir / "a_clip").string());
  CHECK(dirs[1] == (dir / "b_clip").string());
  fs::remove_all(dir);
}

TEST_CASE("corrupt metadata is rejected") {
  fs::path dir = temp_dir("corrupt");
  CHECK_THROWS_AS(read_clip((dir / "missing").string()), Error);
  fs::remove_all(dir);
}
