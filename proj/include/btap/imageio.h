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

#ifndef BTAP_IMAGEIO_H_
#define BTAP_IMAGEIO_H_

#include <cstdint>
#include <string>
#include <vector>

#include "btap/evaltap.h"
#include "btap/types.h"

namespace btap {

// Minimal PNG writer: 8-bit RGB, single IDAT with stored (uncompressed)
// deflate blocks.  Lossless and dependency-free; size is not a goal.
void write_png(const std::string& path, int W, int H,
               const std::vector<uint8_t>& rgb);

// Track overlay for visual inspection: per-track rainbow hue, filled
// 3x3 marker when predicted visible, 1-px hollow outline when occluded,
// fading tail over the preceding frames.  The marker center sits at the
// rounded predicted pixel.
Video render_overlay(const Video& video,
                     const std::vector<PredictedTrack>& tracks,
                     int tail = 4);

std::vector<uint8_t> frame_to_rgb8(const Video& video, int t);

}  // namespace btap

#endif  // BTAP_IMAGEIO_H_
