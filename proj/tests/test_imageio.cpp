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

#include "btap/imageio.h"

#include <filesystem>
#include <fstream>

#include <doctest.h>

using namespace btap;
namespace fs = std::filesystem;

TEST_CASE("png files carry the signature and declared dimensions") {
  const int W = 21, H = 13;
  std::vector<uint8_t> rgb(static_cast<size_t>(W) * H * 3, 0);
  for (size_t i = 0; i < rgb.size(); ++i) rgb[i] = static_cast<uint8_t>(i);
  fs::path path = fs::temp_directory_path() / "btap_io_sig.png";
  write_png(path.string(), W, H, rgb);

  std::ifstream f(path, std::ios::binary);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  REQUIRE(bytes.size() > 33);
  const uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  for (int i = 0; i < 8; ++i) CHECK(bytes[i] == sig[i]);
  // IHDR: width/height big-endian at offsets 16 and 20.
  auto be32 = [&](size_t off) {
    return (uint32_t{bytes[off]} << 24) | (uint32_t{bytes[off + 1]} << 16) |
           (uint32_t{bytes[off + 2]} << 8) | uint32_t{bytes[off + 3]};
  };
  CHECK(be32(16) == static_cast<uint32_t>(W));
  CHECK(be32(20) == static_cast<uint32_t>(H));
  CHECK(bytes[24] == 8);  // bit depth
  CHECK(bytes[25] == 2);  // color type RGB
  fs::remove(path);
}

TEST_CASE("frame_to_rgb8 quantizes and clamps") {
  Video v = Video::zeros(1, 2, 2);
  v.at(0, 0, 0, 0) = 1.0f;
  v.at(0, 0, 1, 1) = 0.5f;
  v.at(0, 1, 0, 2) = -0.25f;  // clamps to 0
  v.at(0, 1, 1, 0) = 2.0f;    // clamps to 255
  auto rgb = frame_to_rgb8(v, 0);
  REQUIRE(rgb.size() == 12);
  CHECK(rgb[0] == 255);
  CHECK(rgb[4] == 128);
  CHECK(rgb[8] == 0);
  CHECK(rgb[9] == 255);
}

TEST_CASE("overlay marks visible predictions with a filled block") {
  Video v = Video::zeros(2, 16, 16);
  PredictedTrack tr;
  // Distinct positions so the fading tail cannot overlap the marker.
  tr.p = {{5.2, 7.8}, {12.0, 3.0}};  // rounds to pixels (5, 8), (12, 3)
  tr.occ = {0, 1};
  Video out = render_overlay(v, {tr});
  CHECK(out.T == 2);
  CHECK(out.H == 16);
  CHECK(out.W == 16);

  auto painted = [&](int t, int y, int x) {
    return out.at(t, y, x, 0) + out.at(t, y, x, 1) + out.at(t, y, x, 2) >
           0.0f;
  };
  // Visible frame: full 3x3 block around (x=5, y=8).
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      CHECK(painted(0, 8 + dy, 5 + dx));
    }
  }
  // Occluded frame: hollow outline, center untouched.
  CHECK(!painted(1, 3, 12));
  CHECK(painted(1, 2, 11));
  CHECK(painted(1, 4, 13));
  // Far corner stays black.
  CHECK(!painted(0, 15, 15));
  // The input video is not mutated.
  CHECK(v.at(0, 8, 5, 0) == 0.0f);
}

TEST_CASE("overlay clips markers at the frame border") {
  Video v = Video::zeros(1, 8, 8);
  PredictedTrack tr;
  tr.p = {{0.0, 0.0}};
  tr.occ = {0};
  Video out = render_overlay(v, {tr});  // must not crash or write OOB
  CHECK(out.at(0, 0, 0, 0) + out.at(0, 0, 0, 1) + out.at(0, 0, 0, 2) > 0.0f);
}
