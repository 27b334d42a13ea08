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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace btap {

namespace fs = std::filesystem;
using nlohmann::json;

Tensor Video::frame_tensor(int t) const {
  require(t >= 0 && t < T, "frame_tensor: frame index out of range");
  std::vector<double> data(static_cast<size_t>(H) * W * 3);
  size_t base = static_cast<size_t>(t) * H * W * 3;
  for (size_t i = 0; i < data.size(); ++i) {
    data[i] = static_cast<double>(rgb[base + i]);
  }
  return Tensor::from({H, W, 3}, std::move(data));
}

uint8_t float_to_byte(float v) {
  float c = std::min(std::max(v, 0.0f), 1.0f);
  return static_cast<uint8_t>(std::lround(c * 255.0f));
}

float byte_to_float(uint8_t b) { return static_cast<float>(b) / 255.0f; }

namespace {

void write_file(const fs::path& path, const void* data, size_t size) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), "cannot open for writing: " + path.string());
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  require(os.good(), "write failed: " + path.string());
}

std::vector<char> read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  require(is.good(), "cannot open: " + path.string());
  auto size = is.tellg();
  is.seekg(0);
  std::vector<char> buf(static_cast<size_t>(size));
  is.read(buf.data(), size);
  require(is.good(), "read failed: " + path.string());
  return buf;
}

}  // namespace

void write_clip(const std::string& dir, const Clip& clip) {
  const Video& v = clip.video;
  require(v.T >= 1 && v.H >= 1 && v.W >= 1, "write_clip: empty video");
  fs::create_directories(dir);

  json meta = {{"T", v.T}, {"H", v.H}, {"W", v.W},
               {"format_version", kInterchangeFormatVersion}};
  std::ofstream ms(fs::path(dir) / "meta.json");
  require(ms.good(), "cannot write meta.json in " + dir);
  ms << meta.dump(2) << "\n";

  std::vector<uint8_t> bytes(v.rgb.size());
  for (size_t i = 0; i < v.rgb.size(); ++i) bytes[i] = float_to_byte(v.rgb[i]);
  write_file(fs::path(dir) / "frames.rgb8", bytes.data(), bytes.size());

  if (clip.has_tracks) {
    json points = json::array();
    json occluded = json::array();
    for (const auto& tr : clip.tracks) {
      require(tr.p.size() == tr.o.size() &&
                  tr.frames() == v.T,
              "write_clip: track length mismatch");
      json pts = json::array();
      json occ = json::array();
      for (int t = 0; t < v.T; ++t) {
        pts.push_back({tr.p[t].x, tr.p[t].y});
        occ.push_back(static_cast<int>(tr.o[t]));
      }
      points.push_back(std::move(pts));
      occluded.push_back(std::move(occ));
    }
    json tracks = {{"points", std::move(points)},
                   {"occluded", std::move(occluded)}};
    std::ofstream ts(fs::path(dir) / "tracks.json");
    require(ts.good(), "cannot write tracks.json in " + dir);
    ts << tracks.dump() << "\n";
  }

  if (clip.has_depth) {
    require(clip.depth.size() == static_cast<size_t>(v.T) * v.H * v.W,
            "write_clip: depth size mismatch");
    write_file(fs::path(dir) / "depth.f32", clip.depth.data(),
               clip.depth.size() * sizeof(float));
  }
}

Clip read_clip(const std::string& dir) {
  Clip clip;
  json meta;
  {
    std::ifstream ms(fs::path(dir) / "meta.json");
    require(ms.good(), "missing meta.json in " + dir);
    ms >> meta;
  }
  require(meta.value("format_version", -1) == kInterchangeFormatVersion,
          "unsupported clip format version in " + dir);
  int T = meta.at("T"), H = meta.at("H"), W = meta.at("W");
  require(T >= 1 && H >= 1 && W >= 1, "bad dims in meta.json: " + dir);
  clip.video = Video::zeros(T, H, W);

  auto bytes = read_file(fs::path(dir) / "frames.rgb8");
  require(bytes.size() == clip.video.rgb.size(),
          "frames.rgb8 size mismatch in " + dir);
  for (size_t i = 0; i < bytes.size(); ++i) {
    clip.video.rgb[i] = byte_to_float(static_cast<uint8_t>(bytes[i]));
  }

  fs::path tracks_path = fs::path(dir) / "tracks.json";
  if (fs::exists(tracks_path)) {
    json tracks;
    std::ifstream ts(tracks_path);
    ts >> tracks;
    const auto& points = tracks.at("points");
    const auto& occluded = tracks.at("occluded");
    require(points.size() == occluded.size(),
            "tracks.json: points/occluded length mismatch in " + dir);
    for (size_t i = 0; i < points.size(); ++i) {
      GroundTruthTrack tr;
      require(points[i].size() == static_cast<size_t>(T),
              "tracks.json: track frame count mismatch in " + dir);
      for (int t = 0; t < T; ++t) {
        tr.p.push_back({points[i][t][0].get<double>(),
                        points[i][t][1].get<double>()});
        int ov = occluded[i][t].get<int>();
        require(ov == 0 || ov == 1, "tracks.json: occlusion flag not 0/1");
        tr.o.push_back(static_cast<uint8_t>(ov));
      }
      clip.tracks.push_back(std::move(tr));
    }
    clip.has_tracks = true;
  }

  fs::path depth_path = fs::path(dir) / "depth.f32";
  if (fs::exists(depth_path)) {
    auto raw = read_file(depth_path);
    require(raw.size() == static_cast<size_t>(T) * H * W * sizeof(float),
            "depth.f32 size mismatch in " + dir);
    clip.depth.resize(static_cast<size_t>(T) * H * W);
    std::memcpy(clip.depth.data(), raw.data(), raw.size());
    clip.has_depth = true;
  }
  return clip;
}

std::vector<std::string> list_clip_dirs(const std::string& dataset_dir) {
  std::vector<std::string> dirs;
  require(fs::is_directory(dataset_dir),
          "dataset directory not found: " + dataset_dir);
  for (const auto& e : fs::directory_iterator(dataset_dir)) {
    if (e.is_directory() && fs::exists(e.path() / "meta.json")) {
      dirs.push_back(e.path().string());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace btap
