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

#ifndef BTAP_TYPES_H_
#define BTAP_TYPES_H_

#include <cstdint>
#include <vector>

#include "btap/common.h"
#include "btap/tensor.h"

namespace btap {

// Dense T x H x W x 3 frame tensor, values in [0,1].  The unit every
// transform and the tracker consume.  Coordinates follow the repo-wide
// pixel-center convention (see common.h).
struct Video {
  int T = 0, H = 0, W = 0;
  std::vector<float> rgb;  // frame-major, row-major, interleaved RGB

  static Video zeros(int T, int H, int W) {
    Video v;
    v.T = T;
    v.H = H;
    v.W = W;
    v.rgb.assign(static_cast<size_t>(T) * H * W * 3, 0.0f);
    return v;
  }
  float& at(int t, int y, int x, int c) {
    return rgb[((static_cast<size_t>(t) * H + y) * W + x) * 3 + c];
  }
  float at(int t, int y, int x, int c) const {
    return rgb[((static_cast<size_t>(t) * H + y) * W + x) * 3 + c];
  }
  // Frame t as an [H,W,3] constant tensor (model input).
  Tensor frame_tensor(int t) const;
};

// Per-frame positions (pixels) and binary occlusion flags (1 = occluded).
struct GroundTruthTrack {
  std::vector<XY> p;
  std::vector<uint8_t> o;
  int frames() const { return static_cast<int>(p.size()); }
};

// A pixel coordinate plus the frame index it is given on.
struct QueryPoint {
  XY q;
  int t = 0;
};

}  // namespace btap

#endif  // BTAP_TYPES_H_
