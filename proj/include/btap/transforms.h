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

#ifndef BTAP_TRANSFORMS_H_
#define BTAP_TRANSFORMS_H_

#include <vector>

#include "btap/rng.h"
#include "btap/types.h"

namespace btap {

// Frame-wise axis-aligned affine family: frame t of the source is
// scaled to (h_t, w_t) pixels and placed with its top-left corner at
// (c_t^x, c_t^y) inside a zero (black) canvas of the source size.
// Endpoint dims/corners are sampled once for the first and last frame;
// per-frame parameters are their exact linear interpolations, so the
// virtual camera moves and zooms smoothly.
//
// On coordinates: phi_t(x, y) = (w_t/W * x + c_t^x, h_t/H * y + c_t^y).
// The same phi_t drives both point warping and pixel resampling, so
// points and pixels stay aligned (a half-pixel mismatch here silently
// corrupts every track; see the patch-consistency test).
struct AffineSequence {
  int T = 0;
  int H = 0, W = 0;                  // source dims
  std::vector<double> h, w;          // per-frame scaled dims, pixels
  std::vector<double> cx, cy;        // per-frame top-left corner, pixels

  static AffineSequence identity(int T, int H, int W);
  bool is_identity() const;
};

// Samples from the affine family: endpoint area A ~ U[0.6, 1.0],
// a1, a2 ~ U[A, 1], relative height (a1+a2)/2, relative width A/h,
// corner uniform subject to in-frame containment; both endpoints drawn
// independently, everything in between linearly interpolated.
AffineSequence sample_affine(int T, int H, int W, Rng& rng);

XY apply_point(const AffineSequence& seq, XY q, int t);
XY invert_point(const AffineSequence& seq, XY q_prime, int t);

// Inverse-map gather: every output pixel reads the bilinear sample of
// the source at phi_t^{-1} of its own (pixel-center) coordinates, with
// out-of-bounds reads returning 0.  This composes "scale then place on
// black" into one bilinear pass and is exactly pixel-aligned with
// apply_point.
Video resample_video(const Video& video, const AffineSequence& seq);

struct DegradationConfig {
  int jpeg_quality_lo = 10;
  int jpeg_quality_hi = 70;
  bool jpeg_enabled = true;
  bool affine_enabled = true;
  bool jpeg_per_frame = false;  // default: one quality per clip
};

// Codec-equivalent JPEG corruption: 8x8 blockwise DCT on full-range
// YCbCr, standard luminance/chrominance tables scaled by the usual
// quality rule, round-trip, clamp to [0,1].  No entropy coding and no
// chroma subsampling; bit-compatibility with real encoders is not a
// goal, texture destruction is.
void jpeg_degrade_frame(Video& video, int t, int quality);
Video jpeg_degrade(const Video& video, int quality);

struct StudentView {
  Video video;
  QueryPoint query;      // transformed query phi_{t2}(q2)
  AffineSequence seq;
  int jpeg_quality = 0;  // -1 when jpeg disabled
};

// Builds the student's degraded second view: JPEG first (student-only
// corruption), then the affine warp.  The query-less overload leaves
// `query` untouched for callers that warp many queries themselves.
StudentView make_student_view(const Video& video, Rng& rng,
                              const DegradationConfig& cfg);
StudentView make_student_view(const Video& video, QueryPoint q2, Rng& rng,
                              const DegradationConfig& cfg);

}  // namespace btap

#endif  // BTAP_TRANSFORMS_H_
