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

#include "btap/transforms.h"

#include <algorithm>
#include <array>
#include <cmath>

#include "btap/common.h"

namespace btap {

AffineSequence AffineSequence::identity(int T, int H, int W) {
  AffineSequence seq;
  seq.T = T;
  seq.H = H;
  seq.W = W;
  seq.h.assign(T, static_cast<double>(H));
  seq.w.assign(T, static_cast<double>(W));
  seq.cx.assign(T, 0.0);
  seq.cy.assign(T, 0.0);
  return seq;
}

bool AffineSequence::is_identity() const {
  for (int t = 0; t < T; ++t) {
    if (h[t] != H || w[t] != W || cx[t] != 0.0 || cy[t] != 0.0) return false;
  }
  return true;
}

AffineSequence sample_affine(int T, int H, int W, Rng& rng) {
  require(T >= 1 && H >= 1 && W >= 1, "sample_affine: bad dims");
  // Endpoint shapes: area A, then two draws in [A, 1] averaged for the
  // relative height; width = A / height so the area is exactly A.
  double hh[2], ww[2], ccx[2], ccy[2];
  for (int e = 0; e < 2; ++e) {
    double A = rng.uniform(0.6, 1.0);
    double a1 = rng.uniform(A, 1.0);
    double a2 = rng.uniform(A, 1.0);
    double rel_h = 0.5 * (a1 + a2);
    double rel_w = A / rel_h;
    hh[e] = rel_h * H;
    ww[e] = rel_w * W;
    ccx[e] = rng.uniform(0.0, W - ww[e]);
    ccy[e] = rng.uniform(0.0, H - hh[e]);
  }
  AffineSequence seq;
  seq.T = T;
  seq.H = H;
  seq.W = W;
  seq.h.resize(T);
  seq.w.resize(T);
  seq.cx.resize(T);
  seq.cy.resize(T);
  for (int t = 0; t < T; ++t) {
    double a = (T == 1) ? 0.0 : static_cast<double>(t) / (T - 1);
    seq.h[t] = (1 - a) * hh[0] + a * hh[1];
    seq.w[t] = (1 - a) * ww[0] + a * ww[1];
    seq.cx[t] = (1 - a) * ccx[0] + a * ccx[1];
    seq.cy[t] = (1 - a) * ccy[0] + a * ccy[1];
  }
  return seq;
}

XY apply_point(const AffineSequence& seq, XY q, int t) {
  require(t >= 0 && t < seq.T, "apply_point: frame out of range");
  return {seq.w[t] / seq.W * q.x + seq.cx[t],
          seq.h[t] / seq.H * q.y + seq.cy[t]};
}

XY invert_point(const AffineSequence& seq, XY q_prime, int t) {
  require(t >= 0 && t < seq.T, "invert_point: frame out of range");
  return {(q_prime.x - seq.cx[t]) * seq.W / seq.w[t],
          (q_prime.y - seq.cy[t]) * seq.H / seq.h[t]};
}

namespace {

// Bilinear read with out-of-bounds treated as black, matching the
// differentiable sampler's convention.
inline void sample_rgb(const Video& v, int t, double x, double y,
                       float out[3]) {
  out[0] = out[1] = out[2] = 0.0f;
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  double fx = x - x0, fy = y - y0;
  const double wts[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy,
                         fx * fy};
  const int dx[4] = {0, 1, 0, 1};
  const int dy[4] = {0, 0, 1, 1};
  for (int k = 0; k < 4; ++k) {
    int xi = x0 + dx[k], yi = y0 + dy[k];
    if (xi < 0 || xi >= v.W || yi < 0 || yi >= v.H) continue;
    size_t base =
        ((static_cast<size_t>(t) * v.H + yi) * v.W + xi) * 3;
    for (int c = 0; c < 3; ++c) {
      out[c] += static_cast<float>(wts[k] * v.rgb[base + c]);
    }
  }
}

}  // namespace

Video resample_video(const Video& video, const AffineSequence& seq) {
  require(video.T == seq.T && video.H == seq.H && video.W == seq.W,
          "resample_video: sequence/video mismatch");
  Video out = Video::zeros(video.T, video.H, video.W);
  for (int t = 0; t < video.T; ++t) {
    for (int y = 0; y < video.H; ++y) {
      for (int x = 0; x < video.W; ++x) {
        XY src = invert_point(seq, {static_cast<double>(x),
                                    static_cast<double>(y)}, t);
        float px[3];
        sample_rgb(video, t, src.x, src.y, px);
        size_t base =
            ((static_cast<size_t>(t) * video.H + y) * video.W + x) * 3;
        out.rgb[base + 0] = px[0];
        out.rgb[base + 1] = px[1];
        out.rgb[base + 2] = px[2];
      }
    }
  }
  return out;
}

namespace {

// Annex-K reference quantization tables.
constexpr int kLumaQ[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
constexpr int kChromaQ[64] = {
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

void scaled_table(const int* base, int quality, double* out) {
  quality = std::clamp(quality, 1, 100);
  int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  for (int i = 0; i < 64; ++i) {
    int q = (base[i] * scale + 50) / 100;
    out[i] = static_cast<double>(std::clamp(q, 1, 255));
  }
}

struct Dct8 {
  // c[u][x] = alpha(u) * cos((2x+1) u pi / 16)
  double c[8][8];
  Dct8() {
    const double pi = std::acos(-1.0);
    for (int u = 0; u < 8; ++u) {
      double alpha = (u == 0) ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int x = 0; x < 8; ++x) {
        c[u][x] = alpha * std::cos((2 * x + 1) * u * pi / 16.0);
      }
    }
  }
};

// Quantized DCT round-trip of one 8x8 block, in place.
void block_roundtrip(double* blk, const double* qtab, const Dct8& d) {
  double tmp[64], coef[64];
  // rows then columns, forward
  for (int y = 0; y < 8; ++y) {
    for (int u = 0; u < 8; ++u) {
      double s = 0;
      for (int x = 0; x < 8; ++x) s += blk[y * 8 + x] * d.c[u][x];
      tmp[y * 8 + u] = s;
    }
  }
  for (int u = 0; u < 8; ++u) {
    for (int v = 0; v < 8; ++v) {
      double s = 0;
      for (int y = 0; y < 8; ++y) s += tmp[y * 8 + u] * d.c[v][y];
      coef[v * 8 + u] = s;
    }
  }
  for (int i = 0; i < 64; ++i) {
    coef[i] = std::round(coef[i] / qtab[i]) * qtab[i];
  }
  // inverse
  for (int u = 0; u < 8; ++u) {
    for (int y = 0; y < 8; ++y) {
      double s = 0;
      for (int v = 0; v < 8; ++v) s += coef[v * 8 + u] * d.c[v][y];
      tmp[y * 8 + u] = s;
    }
  }
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      double s = 0;
      for (int u = 0; u < 8; ++u) s += tmp[y * 8 + u] * d.c[u][x];
      blk[y * 8 + x] = s;
    }
  }
}

// Round-trips one plane (values centered on 0, range roughly
// [-128, 127]); blocks past the image edge are padded by replication.
void plane_roundtrip(std::vector<double>& plane, int H, int W,
                     const double* qtab, const Dct8& d) {
  double blk[64];
  for (int by = 0; by < H; by += 8) {
    for (int bx = 0; bx < W; bx += 8) {
      for (int y = 0; y < 8; ++y) {
        int sy = std::min(by + y, H - 1);
        for (int x = 0; x < 8; ++x) {
          int sx = std::min(bx + x, W - 1);
          blk[y * 8 + x] = plane[static_cast<size_t>(sy) * W + sx];
        }
      }
      block_roundtrip(blk, qtab, d);
      for (int y = 0; y < 8 && by + y < H; ++y) {
        for (int x = 0; x < 8 && bx + x < W; ++x) {
          plane[static_cast<size_t>(by + y) * W + bx + x] = blk[y * 8 + x];
        }
      }
    }
  }
}

}  // namespace

void jpeg_degrade_frame(Video& video, int t, int quality) {
  require(t >= 0 && t < video.T, "jpeg_degrade_frame: frame out of range");
  static const Dct8 dct;
  double lq[64], cq[64];
  scaled_table(kLumaQ, quality, lq);
  scaled_table(kChromaQ, quality, cq);

  const int H = video.H, W = video.W;
  const size_t npix = static_cast<size_t>(H) * W;
  std::vector<double> Y(npix), Cb(npix), Cr(npix);
  size_t base = static_cast<size_t>(t) * npix * 3;
  for (size_t i = 0; i < npix; ++i) {
    double r = video.rgb[base + i * 3 + 0] * 255.0;
    double g = video.rgb[base + i * 3 + 1] * 255.0;
    double b = video.rgb[base + i * 3 + 2] * 255.0;
    Y[i] = 0.299 * r + 0.587 * g + 0.114 * b - 128.0;
    Cb[i] = -0.168736 * r - 0.331264 * g + 0.5 * b;
    Cr[i] = 0.5 * r - 0.418688 * g - 0.081312 * b;
  }
  plane_roundtrip(Y, H, W, lq, dct);
  plane_roundtrip(Cb, H, W, cq, dct);
  plane_roundtrip(Cr, H, W, cq, dct);
  for (size_t i = 0; i < npix; ++i) {
    double y = Y[i] + 128.0, cb = Cb[i], cr = Cr[i];
    double r = y + 1.402 * cr;
    double g = y - 0.344136 * cb - 0.714136 * cr;
    double b = y + 1.772 * cb;
    video.rgb[base + i * 3 + 0] =
        static_cast<float>(std::clamp(r / 255.0, 0.0, 1.0));
    video.rgb[base + i * 3 + 1] =
        static_cast<float>(std::clamp(g / 255.0, 0.0, 1.0));
    video.rgb[base + i * 3 + 2] =
        static_cast<float>(std::clamp(b / 255.0, 0.0, 1.0));
  }
}

Video jpeg_degrade(const Video& video, int quality) {
  Video out = video;
  for (int t = 0; t < video.T; ++t) jpeg_degrade_frame(out, t, quality);
  return out;
}

StudentView make_student_view(const Video& video, QueryPoint q2, Rng& rng,
                              const DegradationConfig& cfg) {
  StudentView view = make_student_view(video, rng, cfg);
  view.query.t = q2.t;
  view.query.q = apply_point(view.seq, q2.q, q2.t);
  return view;
}

StudentView make_student_view(const Video& video, Rng& rng,
                              const DegradationConfig& cfg) {
  StudentView view;
  view.jpeg_quality = -1;
  view.video = video;
  if (cfg.jpeg_enabled) {
    if (cfg.jpeg_per_frame) {
      for (int t = 0; t < video.T; ++t) {
        int q = cfg.jpeg_quality_lo +
                static_cast<int>(rng.uniform_int(
                    cfg.jpeg_quality_hi - cfg.jpeg_quality_lo + 1));
        jpeg_degrade_frame(view.video, t, q);
      }
    } else {
      view.jpeg_quality =
          cfg.jpeg_quality_lo +
          static_cast<int>(rng.uniform_int(
              cfg.jpeg_quality_hi - cfg.jpeg_quality_lo + 1));
      for (int t = 0; t < video.T; ++t) {
        jpeg_degrade_frame(view.video, t, view.jpeg_quality);
      }
    }
  }
  view.seq = cfg.affine_enabled
                 ? sample_affine(video.T, video.H, video.W, rng)
                 : AffineSequence::identity(video.T, video.H, video.W);
  if (cfg.affine_enabled) {
    view.video = resample_video(view.video, view.seq);
  }
  return view;
}

}  // namespace btap
