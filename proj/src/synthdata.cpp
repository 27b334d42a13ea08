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

#include "btap/synthdata.h"

#include <algorithm>
#include <cmath>

namespace btap {
namespace {

uint64_t hash2(uint64_t seed, int64_t a, int64_t b) {
  uint64_t z = seed ^ (static_cast<uint64_t>(a) * 0x9e3779b97f4a7c15ULL) ^
               (static_cast<uint64_t>(b) * 0xbf58476d1ce4e5b9ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double lattice_value(uint64_t seed, int64_t ix, int64_t iy, int channel) {
  return static_cast<double>(
             (hash2(seed + static_cast<uint64_t>(channel) * 0x51ULL, ix, iy) >>
              11)) *
         0x1.0p-53;
}

// Smooth value noise: bilinear interpolation of hashed lattice values.
void noise_color(uint64_t seed, double u, double v, double period,
                 const double* ca, const double* cb, double* out) {
  double su = u / period, sv = v / period;
  int64_t iu = static_cast<int64_t>(std::floor(su));
  int64_t iv = static_cast<int64_t>(std::floor(sv));
  double fu = su - iu, fv = sv - iv;
  double n00 = lattice_value(seed, iu, iv, 0);
  double n01 = lattice_value(seed, iu + 1, iv, 0);
  double n10 = lattice_value(seed, iu, iv + 1, 0);
  double n11 = lattice_value(seed, iu + 1, iv + 1, 0);
  double n = (1 - fv) * ((1 - fu) * n00 + fu * n01) +
             fv * ((1 - fu) * n10 + fu * n11);
  for (int c = 0; c < 3; ++c) out[c] = ca[c] + (cb[c] - ca[c]) * n;
}

void checker_color(double u, double v, double period, const double* ca,
                   const double* cb, double* out) {
  int64_t cu = static_cast<int64_t>(std::floor(u / period));
  int64_t cv = static_cast<int64_t>(std::floor(v / period));
  const double* col = (((cu + cv) % 2 + 2) % 2 == 0) ? ca : cb;
  for (int c = 0; c < 3; ++c) out[c] = col[c];
}

void gradient_color(uint64_t seed, double u, double v, double period,
                    const double* ca, const double* cb, double* out) {
  // Linear ramp plus a perpendicular stripe so the texture is
  // trackable along both axes.
  double ang = static_cast<double>(hash2(seed, 7, 7) >> 11) * 0x1.0p-53 *
               6.283185307179586;
  double gx = std::cos(ang), gy = std::sin(ang);
  double s = (u * gx + v * gy) / (8.0 * period);
  double ramp = 0.5 + 0.5 * std::sin(s * 6.283185307179586);
  double stripe =
      0.5 + 0.5 * std::sin((u * -gy + v * gx) / period * 6.283185307179586);
  double m = 0.7 * ramp + 0.3 * stripe;
  for (int c = 0; c < 3; ++c) out[c] = ca[c] + (cb[c] - ca[c]) * m;
}

void texture_color(TextureFamily family, uint64_t seed, double u, double v,
                   double period, const double* ca, const double* cb,
                   double* out) {
  switch (family) {
    case TextureFamily::kChecker:
      checker_color(u, v, period, ca, cb, out);
      break;
    case TextureFamily::kNoise:
      noise_color(seed, u, v, period, ca, cb, out);
      break;
    case TextureFamily::kGradient:
      gradient_color(seed, u, v, period, ca, cb, out);
      break;
  }
}

void sample_colors(Rng& rng, double* ca, double* cb) {
  // Rejection-sample until the pair has enough contrast.
  for (;;) {
    double dist = 0.0;
    for (int c = 0; c < 3; ++c) {
      ca[c] = rng.uniform(0.05, 0.95);
      cb[c] = rng.uniform(0.05, 0.95);
      dist += std::abs(ca[c] - cb[c]);
    }
    if (dist >= 0.8) return;
  }
}

// Local coordinates of world point p in sprite frame at time t.
XY to_local(const Sprite& s, XY p, int t) {
  XY c = s.center_at(t);
  double th = s.theta_at(t);
  double dx = p.x - c.x, dy = p.y - c.y;
  double ct = std::cos(th), st = std::sin(th);
  return {ct * dx + st * dy, -st * dx + ct * dy};
}

XY to_world(const Sprite& s, XY local, int t) {
  XY c = s.center_at(t);
  double th = s.theta_at(t);
  double ct = std::cos(th), st = std::sin(th);
  return {c.x + ct * local.x - st * local.y,
          c.y + st * local.x + ct * local.y};
}

bool contains_local(const Sprite& s, XY local) {
  if (s.is_ellipse) {
    double nx = local.x / s.rx, ny = local.y / s.ry;
    return nx * nx + ny * ny <= 1.0;
  }
  return std::abs(local.x) <= s.rx && std::abs(local.y) <= s.ry;
}

// Frontmost sprite id at integer pixel (x, y), 0 for background.
// Same predicate the renderer uses, evaluated analytically.
int frontmost(const std::vector<Sprite>& sprites_by_depth, XY p, int t) {
  for (size_t i = 0; i < sprites_by_depth.size(); ++i) {
    const Sprite& spr = sprites_by_depth[i];
    if (contains_local(spr, to_local(spr, p, t))) {
      return static_cast<int>(i) + 1;
    }
  }
  return 0;
}

}  // namespace

TextureFamily texture_family_from_string(const std::string& s) {
  if (s == "checker") return TextureFamily::kChecker;
  if (s == "noise") return TextureFamily::kNoise;
  if (s == "gradient") return TextureFamily::kGradient;
  fail("unknown texture family: " + s);
}

std::string to_string(TextureFamily f) {
  switch (f) {
    case TextureFamily::kChecker:
      return "checker";
    case TextureFamily::kNoise:
      return "noise";
    case TextureFamily::kGradient:
      return "gradient";
  }
  return "?";
}

Scene generate_scene(const SceneConfig& cfg) {
  require(cfg.T >= 2, "SceneConfig: T must be >= 2");
  require(cfg.H >= 16 && cfg.W >= 16, "SceneConfig: H, W must be >= 16");
  require(cfg.sprite_count >= 1, "SceneConfig: sprite_count must be >= 1");
  require(2.0 * cfg.max_radius < std::min(cfg.H, cfg.W),
          "SceneConfig: sprite larger than frame");

  Scene scene;
  scene.cfg = cfg;
  Rng root(cfg.seed);

  // Sprites, ordered nearest first so painter's order is a plain scan.
  Rng sprite_rng = root.split("sprites");
  for (int i = 0; i < cfg.sprite_count; ++i) {
    Sprite s;
    s.rx = sprite_rng.uniform(cfg.min_radius, cfg.max_radius);
    s.ry = sprite_rng.uniform(cfg.min_radius, cfg.max_radius);
    s.is_ellipse = sprite_rng.uniform() < 0.5;
    s.center0 = {sprite_rng.uniform(s.rx, cfg.W - 1 - s.rx),
                 sprite_rng.uniform(s.ry, cfg.H - 1 - s.ry)};
    s.velocity = {sprite_rng.uniform(-cfg.max_speed, cfg.max_speed),
                  sprite_rng.uniform(-cfg.max_speed, cfg.max_speed)};
    s.theta0 = sprite_rng.uniform(0.0, 6.283185307179586);
    s.omega = sprite_rng.uniform(-cfg.max_ang_vel, cfg.max_ang_vel);
    s.depth = 2.0 + 0.5 * i;
    s.family = cfg.texture_family;
    s.tex_seed = sprite_rng.next_u64();
    s.tex_period = sprite_rng.uniform(3.0, 6.0);
    sample_colors(sprite_rng, s.color_a, s.color_b);
    scene.sprites.push_back(s);
  }

  Rng bg_rng = root.split("background");
  uint64_t bg_seed = bg_rng.next_u64();
  double bg_period = bg_rng.uniform(4.0, 8.0);
  double bg_a[3], bg_b[3];
  sample_colors(bg_rng, bg_a, bg_b);

  scene.video = Video::zeros(cfg.T, cfg.H, cfg.W);
  scene.depth.assign(static_cast<size_t>(cfg.T) * cfg.H * cfg.W, 0.0f);
  scene.seg.assign(static_cast<size_t>(cfg.T) * cfg.H * cfg.W, 0);

  for (int t = 0; t < cfg.T; ++t) {
    for (int y = 0; y < cfg.H; ++y) {
      for (int x = 0; x < cfg.W; ++x) {
        XY p{static_cast<double>(x), static_cast<double>(y)};
        double col[3];
        int id = frontmost(scene.sprites, p, t);
        size_t idx = (static_cast<size_t>(t) * cfg.H + y) * cfg.W + x;
        if (id > 0) {
          const Sprite& spr = scene.sprites[id - 1];
          XY local = to_local(spr, p, t);
          texture_color(spr.family, spr.tex_seed, local.x, local.y,
                        spr.tex_period, spr.color_a, spr.color_b, col);
          scene.depth[idx] = static_cast<float>(spr.depth);
        } else {
          texture_color(cfg.background_family, bg_seed, p.x, p.y, bg_period,
                        bg_a, bg_b, col);
          scene.depth[idx] = static_cast<float>(scene.background_depth);
        }
        scene.seg[idx] = static_cast<int16_t>(id);
        for (int c = 0; c < 3; ++c) {
          scene.video.at(t, y, x, c) =
              static_cast<float>(std::min(std::max(col[c], 0.0), 1.0));
        }
      }
    }
  }

  Rng track_rng = root.split("tracks");
  auto sampled = sample_ground_truth_queries(scene, cfg.tracks_per_scene,
                                             cfg.snap_queries, track_rng);
  for (auto& sq : sampled) scene.tracks.push_back(std::move(sq.track));
  return scene;
}

GroundTruthTrack track_from_pixel(const Scene& scene, int x, int y, int t) {
  const SceneConfig& cfg = scene.cfg;
  require(x >= 0 && x < cfg.W && y >= 0 && y < cfg.H && t >= 0 && t < cfg.T,
          "track_from_pixel: pixel out of range");
  int owner = scene.seg_at(t, y, x);
  GroundTruthTrack track;
  track.p.resize(cfg.T);
  track.o.resize(cfg.T);
  XY p0{static_cast<double>(x), static_cast<double>(y)};
  XY local{0, 0};
  if (owner > 0) local = to_local(scene.sprites[owner - 1], p0, t);
  for (int f = 0; f < cfg.T; ++f) {
    XY p = owner > 0 ? to_world(scene.sprites[owner - 1], local, f) : p0;
    track.p[f] = p;
    int rx = static_cast<int>(std::lround(p.x));
    int ry = static_cast<int>(std::lround(p.y));
    bool occluded;
    if (rx < 0 || rx >= cfg.W || ry < 0 || ry >= cfg.H) {
      occluded = true;
    } else {
      occluded = scene.seg_at(f, ry, rx) != owner;
    }
    track.o[f] = occluded ? 1 : 0;
  }
  return track;
}

std::vector<SampledQuery> sample_ground_truth_queries(const Scene& scene,
                                                      int n, bool snap,
                                                      Rng& rng) {
  require(n >= 1, "sample_ground_truth_queries: n must be >= 1");
  const SceneConfig& cfg = scene.cfg;
  require(!scene.depth.empty(), "sample_ground_truth_queries: scene has no depth");

  auto neighbor_scan = [&](int t, int x, int y, bool want_greater,
                           std::vector<std::pair<int, int>>* hits) {
    double own = scene.depth_at(t, y, x);
    bool any = false;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        int nx = x + dx, ny = y + dy;
        if (nx < 0 || nx >= cfg.W || ny < 0 || ny >= cfg.H) continue;
        double nd = scene.depth_at(t, ny, nx);
        bool hit = want_greater ? (nd > 1.05 * own) : (nd < 0.95 * own);
        if (hit) {
          any = true;
          if (hits) hits->emplace_back(nx, ny);
        }
      }
    }
    return any;
  };

  std::vector<SampledQuery> out;
  for (int i = 0; i < n; ++i) {
    int t, x = 0, y = 0;
    bool found = false;
    // Rejection sampling of the query pixel; the cap only guards
    // against pathological configs where nothing qualifies.
    for (int attempt = 0; attempt < 10000 && !found; ++attempt) {
      t = static_cast<int>(rng.uniform_int(cfg.T));
      bool want_sprite = rng.uniform() < cfg.object_query_bias;
      x = static_cast<int>(rng.uniform_int(cfg.W));
      y = static_cast<int>(rng.uniform_int(cfg.H));
      bool on_sprite = scene.seg_at(t, y, x) > 0;
      if (on_sprite != want_sprite) continue;
      if (snap && neighbor_scan(t, x, y, false, nullptr)) {
        continue;  // back side of an occlusion boundary
      }
      found = true;
    }
    if (!found) {
      fail("sample_ground_truth_queries: no admissible query pixel found");
    }

    SampledQuery sq;
    sq.track = track_from_pixel(scene, x, y, t);
    sq.query = {{static_cast<double>(x), static_cast<double>(y)}, t};

    if (snap) {
      std::vector<std::pair<int, int>> fronts;
      neighbor_scan(t, x, y, true, &fronts);
      if (!fronts.empty() && rng.uniform() < 0.5) {
        // Move the query onto a background-side neighbor while keeping
        // the foreground track, biasing training toward foreground.
        auto [nx, ny] = fronts[rng.uniform_int(fronts.size())];
        sq.query.q = {static_cast<double>(nx), static_cast<double>(ny)};
      }
    }
    out.push_back(std::move(sq));
  }
  return out;
}

}  // namespace btap
