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

#ifndef BTAP_INTERCHANGE_H_
#define BTAP_INTERCHANGE_H_

#include <optional>
#include <string>
#include <vector>

#include "btap/types.h"

namespace btap {

// Clip interchange format, one directory per clip:
//   meta.json    {"T":..,"H":..,"W":..,"format_version":1}
//   frames.rgb8  raw interleaved RGB bytes, frame-major, row-major
//   tracks.json  {"points":[[[x,y],..per frame]..per track],
//                 "occluded":[[0/1,..]..]}            (optional)
//   depth.f32    raw little-endian 32-bit floats, same ordering as
//                frames but single channel                (optional)
// All coordinates use the pixel-center convention.
struct Clip {
  Video video;
  std::vector<GroundTruthTrack> tracks;  // empty if unlabeled
  std::vector<float> depth;              // empty if absent; T*H*W
  bool has_tracks = false;
  bool has_depth = false;
};

constexpr int kInterchangeFormatVersion = 1;

void write_clip(const std::string& dir, const Clip& clip);
Clip read_clip(const std::string& dir);

// Lists clip subdirectories of a dataset directory, sorted by name.
std::vector<std::string> list_clip_dirs(const std::string& dataset_dir);

// Quantizes [0,1] floats to RGB8 and back (round-trip used by the
// writer/reader pair).
uint8_t float_to_byte(float v);
float byte_to_float(uint8_t b);

}  // namespace btap

#endif  // BTAP_INTERCHANGE_H_
