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

#include <algorithm>
#include <cmath>
#include <fstream>

#include "btap/common.h"
#include "btap/interchange.h"

namespace btap {

namespace {

uint32_t crc32_table_entry(uint32_t n) {
  for (int k = 0; k < 8; ++k) n = (n & 1) ? 0xEDB88320u ^ (n >> 1) : n >> 1;
  return n;
}

uint32_t crc32(const uint8_t* data, size_t len, uint32_t crc = 0xFFFFFFFFu) {
  static uint32_t table[256];
  static bool init = [] {
    for (uint32_t i = 0; i < 256; ++i) table[i] = crc32_table_entry(i);
    return true;
  }();
  (void)init;
  for (size_t i = 0; i < len; ++i) {
    crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
  }
  return crc;
}

void put_u32be(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back((v >> 24) & 0xFF);
  out.push_back((v >> 16) & 0xFF);
  out.push_back((v >> 8) & 0xFF);
  out.push_back(v & 0xFF);
}

void write_chunk(std::ostream& os, const char type[4],
                 const std::vector<uint8_t>& payload) {
  std::vector<uint8_t> head;
  put_u32be(head, static_cast<uint32_t>(payload.size()));
  os.write(reinterpret_cast<const char*>(head.data()), 4);
  std::vector<uint8_t> body(type, type + 4);
  body.insert(body.end(), payload.begin(), payload.end());
  os.write(reinterpret_cast<const char*>(body.data()),
           static_cast<std::streamsize>(body.size()));
  std::vector<uint8_t> tail;
  put_u32be(tail, crc32(body.data(), body.size()) ^ 0xFFFFFFFFu);
  os.write(reinterpret_cast<const char*>(tail.data()), 4);
}

// Raw scanline stream wrapped in zlib framing with stored deflate
// blocks (max 65535 bytes each).
std::vector<uint8_t> zlib_stored(const std::vector<uint8_t>& raw) {
  std::vector<uint8_t> out;
  out.push_back(0x78);
  out.push_back(0x01);
  size_t pos = 0;
  do {
    size_t n = std::min<size_t>(raw.size() - pos, 65535);
    bool last = pos + n == raw.size();
    out.push_back(last ? 1 : 0);
    out.push_back(n & 0xFF);
    out.push_back((n >> 8) & 0xFF);
    out.push_back(~n & 0xFF);
    out.push_back((~n >> 8) & 0xFF);
    out.insert(out.end(), raw.begin() + pos, raw.begin() + pos + n);
    pos += n;
  } while (pos < raw.size());
  uint32_t a = 1, b = 0;
  for (uint8_t c : raw) {
    a = (a + c) % 65521;
    b = (b + a) % 65521;
  }
  put_u32be(out, (b << 16) | a);
  return out;
}

}  // namespace

void write_png(const std::string& path, int W, int H,
               const std::vector<uint8_t>& rgb) {
  require(rgb.size() == static_cast<size_t>(W) * H * 3,
          "write_png: buffer size mismatch");
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "cannot open for writing: " + path);
  static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  os.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<uint8_t> ihdr;
  put_u32be(ihdr, static_cast<uint32_t>(W));
  put_u32be(ihdr, static_cast<uint32_t>(H));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type: RGB
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // interlace
  write_chunk(os, "IHDR", ihdr);

  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(H) * (1 + static_cast<size_t>(W) * 3));
  for (int y = 0; y < H; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), rgb.begin() + static_cast<size_t>(y) * W * 3,
               rgb.begin() + static_cast<size_t>(y + 1) * W * 3);
  }
  write_chunk(os, "IDAT", zlib_stored(raw));
  write_chunk(os, "IEND", {});
  require(os.good(), "write failed: " + path);
}

std::vector<uint8_t> frame_to_rgb8(const Video& video, int t) {
  require(t >= 0 && t < video.T, "frame_to_rgb8: frame out of range");
  std::vector<uint8_t> out(static_cast<size_t>(video.H) * video.W * 3);
  size_t base = static_cast<size_t>(t) * out.size();
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = float_to_byte(video.rgb[base + i]);
  }
  return out;
}

namespace {

void hue_rgb(double h, float rgb[3]) {
  double r = std::fabs(h * 6.0 - 3.0) - 1.0;
  double g = 2.0 - std::fabs(h * 6.0 - 2.0);
  double b = 2.0 - std::fabs(h * 6.0 - 4.0);
  rgb[0] = static_cast<float>(std::clamp(r, 0.0, 1.0));
  rgb[1] = static_cast<float>(std::clamp(g, 0.0, 1.0));
  rgb[2] = static_cast<float>(std::clamp(b, 0.0, 1.0));
}

void put_px(Video& v, int t, int x, int y, const float c[3], double w) {
  if (x < 0 || x >= v.W || y < 0 || y >= v.H) return;
  for (int ch = 0; ch < 3; ++ch) {
    float& dst = v.at(t, y, x, ch);
    dst = static_cast<float>((1.0 - w) * dst + w * c[ch]);
  }
}

}  // namespace

Video render_overlay(const Video& video,
                     const std::vector<PredictedTrack>& tracks, int tail) {
  Video out = video;
  const int n = static_cast<int>(tracks.size());
  for (int i = 0; i < n; ++i) {
    const PredictedTrack& tr = tracks[i];
    require(tr.frames() == video.T, "render_overlay: track length mismatch");
    float color[3];
    hue_rgb(n > 0 ? static_cast<double>(i) / n : 0.0, color);
    for (int t = 0; t < video.T; ++t) {
      // Fading tail of earlier positions.
      for (int dt = tail; dt >= 1; --dt) {
        int ts = t - dt;
        if (ts < 0 || tr.occ[ts]) continue;
        double w = 0.5 * (1.0 - static_cast<double>(dt) / (tail + 1));
        put_px(out, t, static_cast<int>(std::lround(tr.p[ts].x)),
               static_cast<int>(std::lround(tr.p[ts].y)), color, w);
      }
      int cx = static_cast<int>(std::lround(tr.p[t].x));
      int cy = static_cast<int>(std::lround(tr.p[t].y));
      if (tr.occ[t]) {
        // Hollow outline for occluded predictions.
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            put_px(out, t, cx + dx, cy + dy, color, 1.0);
          }
        }
      } else {
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            put_px(out, t, cx + dx, cy + dy, color, 1.0);
          }
        }
      }
    }
  }
  return out;
}

}  // namespace btap
