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

#ifndef BTAP_SYNTHDATA_H_
#define BTAP_SYNTHDATA_H_

#include <cstdint>
#include <vector>

#include "btap/rng.h"
#include "btap/types.h"

namespace btap {

enum class TextureFamily { kChecker, kNoise, kGradient };

TextureFamily texture_family_from_string(const std::string& s);
std::string to_string(TextureFamily f);

// Layered 2.5D scenes: rigid textured sprites (ellipses and boxes) with
// constant per-sprite depth moving over a textured background with
// constant linear and angular velocity.  Ground truth is analytic
// throughout; nothing is ever estimated from pixels.
struct SceneConfig {
  int T = 16;
  int H = 64;
  int W = 64;
  int sprite_count = 3;
  TextureFamily texture_family = TextureFamily::kChecker;
  TextureFamily background_family = TextureFamily::kChecker;
  double max_speed = 1.5;      // pixels per frame, per axis
  double max_ang_vel = 0.05;   // radians per frame
  double min_radius = 5.0;     // sprite half-extent range, pixels
  double max_radius = 12.0;
  int tracks_per_scene = 24;   // default track set size
  double object_query_bias = 0.8;  // probability of sampling sprite pixels
  bool snap_queries = true;
  uint64_t seed = 0;
};

struct Sprite {
  XY center0;        // center at frame 0
  XY velocity;       // pixels per frame
  double theta0 = 0.0;
  double omega = 0.0;
  double rx = 0.0, ry = 0.0;  // half extents in local coords
  bool is_ellipse = true;     // otherwise axis-aligned box in local coords
  double depth = 0.0;         // smaller = nearer
  TextureFamily family = TextureFamily::kChecker;
  uint64_t tex_seed = 0;
  double color_a[3] = {0, 0, 0};
  double color_b[3] = {0, 0, 0};
  double tex_period = 4.0;

  XY center_at(int t) const {
    return {center0.x + velocity.x * t, center0.y + velocity.y * t};
  }
  double theta_at(int t) const { return theta0 + omega * t; }
};

struct Scene {
  SceneConfig cfg;
  Video video;
  std::vector<GroundTruthTrack> tracks;
  std::vector<float> depth;    // T*H*W, smaller = nearer
  std::vector<int16_t> seg;    // T*H*W, 0 = background, 1..N = sprite id
  std::vector<Sprite> sprites;
  double background_depth = 10.0;

  float depth_at(int t, int y, int x) const {
    return depth[(static_cast<size_t>(t) * cfg.H + y) * cfg.W + x];
  }
  int16_t seg_at(int t, int y, int x) const {
    return seg[(static_cast<size_t>(t) * cfg.H + y) * cfg.W + x];
  }
};

// Deterministic given cfg (including seed).  Rejects configs whose
// sprites cannot fit in the frame.
Scene generate_scene(const SceneConfig& cfg);

// The analytic ground-truth track of the material point at pixel
// (x, y) of frame t (the point rides the frontmost surface there).
GroundTruthTrack track_from_pixel(const Scene& scene, int x, int y, int t);

struct SampledQuery {
  QueryPoint query;
  GroundTruthTrack track;
};

// Query sampling biased toward sprite pixels, with the snap-to-occluder
// depth-boundary rules when `snap` is set:
//  (a) pixels with any 3x3 neighbor at depth < 95% of their own depth
//      ("back side" of a boundary) are never sampled;
//  (b) a sampled query with any 3x3 neighbor at depth > 105% of its own
//      depth ("front side") is, with probability 0.5, moved to one such
//      neighbor pixel while keeping the foreground track it was
//      sampled with.
std::vector<SampledQuery> sample_ground_truth_queries(const Scene& scene,
                                                      int n, bool snap,
                                                      Rng& rng);

}  // namespace btap

#endif  // BTAP_SYNTHDATA_H_
