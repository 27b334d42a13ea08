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

#include "btap/tracker.h"

#include <algorithm>
#include <cmath>

#include "btap/common.h"

namespace btap {

Tensor& ModelParams::at(const std::string& name) {
  auto it = tensors.find(name);
  require(it != tensors.end(), "unknown parameter: " + name);
  return it->second;
}

const Tensor& ModelParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  require(it != tensors.end(), "unknown parameter: " + name);
  return it->second;
}

int64_t ModelParams::param_count() const {
  int64_t n = 0;
  for (const auto& [name, t] : tensors) n += t.numel();
  return n;
}

namespace {

Tensor he_init(const Shape& shape, int64_t fan_in, Rng& rng) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  double s = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& x : v) x = s * rng.normal();
  return Tensor::from(shape, std::move(v), /*requires_grad=*/true);
}

}  // namespace

ModelParams init_params(uint64_t seed, const TrackerConfig& cfg) {
  require(cfg.iterations >= 2, "init_params: iterations must be >= 2");
  require(cfg.stride == 2 || cfg.stride == 4, "init_params: stride in {2,4}");
  require(cfg.feature_dim >= 32 && cfg.feature_dim <= 64,
          "init_params: feature_dim in [32,64]");
  require(cfg.patch % 2 == 1 && cfg.patch >= 3, "init_params: patch odd, >=3");
  require(cfg.temperature > 0, "init_params: temperature must be positive");

  ModelParams p;
  p.cfg = cfg;
  Rng rng(seed);
  const int d = cfg.feature_dim;
  const int mid = d / 2;
  const int rh = cfg.refine_hidden;
  const int rc = cfg.patch * cfg.patch + 2;  // local costs + (o, u) logits

  auto add = [&](const std::string& name, const Shape& shape,
                 int64_t fan_in) {
    Rng sub = rng.split(name);
    p.tensors.emplace(name, he_init(shape, fan_in, sub));
  };
  auto add_zero = [&](const std::string& name, const Shape& shape) {
    p.tensors.emplace(name, Tensor::zeros(shape, /*requires_grad=*/true));
  };

  add("backbone.conv1.w", {3, 3, 3, mid}, 3 * 3 * 3);
  add_zero("backbone.conv1.b", {mid});
  add("backbone.conv2.w", {3, 3, mid, d}, 3 * 3 * mid);
  add_zero("backbone.conv2.b", {d});
  add("backbone.conv3.w", {3, 3, d, d}, 3 * 3 * d);
  add_zero("backbone.conv3.b", {d});

  // Logit head over per-frame cost statistics (max, mean, value at the
  // soft-argmax); columns are (occlusion, uncertainty).
  {
    Rng sub = rng.split("head.w");
    std::vector<double> v(6);
    for (auto& x : v) x = 0.1 * sub.normal();
    p.tensors.emplace("head.w",
                      Tensor::from({3, 2}, std::move(v), true));
  }
  add_zero("head.b", {2});

  add("refine.conv1.w", {3, rc, rh}, 3 * rc);
  add_zero("refine.conv1.b", {rh});
  // Zero output projection: iteration 1 equals iteration 0 at init.
  add_zero("refine.conv2.w", {3, rh, 4});
  add_zero("refine.conv2.b", {4});
  return p;
}

VideoFeatures extract_features(const Video& video, const ModelParams& params) {
  const TrackerConfig& cfg = params.cfg;
  VideoFeatures out;
  out.T = video.T;
  out.H = video.H;
  out.W = video.W;
  out.stride = cfg.stride;
  for (int t = 0; t < video.T; ++t) {
    Tensor x = video.frame_tensor(t);
    Tensor h1 = relu(conv2d(x, params.at("backbone.conv1.w"), 2) +
                     params.at("backbone.conv1.b"));
    Tensor h2 = relu(conv2d(h1, params.at("backbone.conv2.w"), cfg.stride / 2) +
                     params.at("backbone.conv2.b"));
    Tensor f = conv2d(h2, params.at("backbone.conv3.w"), 1) +
               params.at("backbone.conv3.b");
    out.frames.push_back(f);
  }
  out.Hf = static_cast<int>(out.frames[0].dim(0));
  out.Wf = static_cast<int>(out.frames[0].dim(1));
  return out;
}

namespace {

// [1,3] per-frame cost statistics row.
Tensor stats_row(const Tensor& cost, const Tensor& cost3,
                 const Tensor& pos_feat) {
  Tensor mx = reshape(max_all(cost), {1, 1});
  Tensor mn = reshape(mean(cost), {1, 1});
  Tensor cv = reshape(bilinear_sample(cost3, pos_feat), {1, 1});
  return concat_cols({mx, mn, cv});
}

}  // namespace

TrajectoryPrediction forward_query(const VideoFeatures& feats,
                                   const QueryPoint& query,
                                   const ModelParams& params) {
  const TrackerConfig& cfg = params.cfg;
  require(query.t >= 0 && query.t < feats.T, "forward: query frame in range");
  require(query.q.x >= 0 && query.q.x <= feats.W - 1 && query.q.y >= 0 &&
              query.q.y <= feats.H - 1,
          "forward: query position out of frame");
  const int T = feats.T, Hf = feats.Hf, Wf = feats.Wf;
  const int d = cfg.feature_dim;
  const double inv_s = 1.0 / cfg.stride;

  // Query feature: bilinear read of the query frame's feature map at
  // the query position in feature-grid coordinates (pixels / stride;
  // feature cell (i,j) sits at pixel (stride*j, stride*i)).
  Tensor q_xy = Tensor::from(
      {1, 2}, {query.q.x * inv_s, query.q.y * inv_s});
  Tensor q_feat =
      reshape(bilinear_sample(feats.frames[query.t], q_xy), {d, 1});

  // Per-frame cost volumes, normalized by sqrt(d); reused across
  // refinement iterations.
  std::vector<Tensor> cost, cost3;
  for (int t = 0; t < T; ++t) {
    Tensor flat = reshape(feats.frames[t], {Hf * Wf, d});
    Tensor c = scale(reshape(matmul(flat, q_feat), {Hf, Wf}),
                     1.0 / std::sqrt(static_cast<double>(d)));
    cost.push_back(c);
    cost3.push_back(reshape(c, {Hf, Wf, 1}));
  }

  TrajectoryPrediction traj;

  // Iteration 0: soft-argmax restricted to a window centered on the
  // cost peak (the expectation over the full map is dominated by
  // background mass), plus pooled-statistics logits.
  const int Pw = std::min({cfg.patch, Hf, Wf});
  std::vector<Tensor> pos_rows, stat_rows;
  for (int t = 0; t < T; ++t) {
    // Plain argmax cell; gradients flow through the window values.
    int ax = 0, ay = 0;
    double best = cost[t].at(0);
    for (int i = 0; i < Hf; ++i) {
      for (int j = 0; j < Wf; ++j) {
        double v = cost[t].at(static_cast<int64_t>(i) * Wf + j);
        if (v > best) {
          best = v;
          ay = i;
          ax = j;
        }
      }
    }
    int x0 = std::clamp(ax - Pw / 2, 0, Wf - Pw);
    int y0 = std::clamp(ay - Pw / 2, 0, Hf - Pw);
    Tensor colslice = cols(cost[t], x0, Pw);  // [Hf, Pw]
    std::vector<Tensor> wrows;
    for (int i = 0; i < Pw; ++i) wrows.push_back(row(colslice, y0 + i));
    Tensor window = stack_rows(wrows);  // [Pw, Pw]

    std::vector<double> wx(static_cast<size_t>(Pw) * Pw),
        wy(static_cast<size_t>(Pw) * Pw);
    for (int i = 0; i < Pw; ++i) {
      for (int j = 0; j < Pw; ++j) {
        wx[static_cast<size_t>(i) * Pw + j] = x0 + j;
        wy[static_cast<size_t>(i) * Pw + j] = y0 + i;
      }
    }
    Tensor xgrid = Tensor::from({Pw, Pw}, std::move(wx));
    Tensor ygrid = Tensor::from({Pw, Pw}, std::move(wy));

    Tensor probs = softmax2d(scale(window, 1.0 / cfg.temperature));
    Tensor ex = reshape(sum(mul(probs, xgrid)), {1, 1});
    Tensor ey = reshape(sum(mul(probs, ygrid)), {1, 1});
    Tensor pf = concat_cols({ex, ey});  // [1,2] feature units
    pos_rows.push_back(scale(row(pf, 0), cfg.stride));
    stat_rows.push_back(row(stats_row(cost[t], cost3[t], pf), 0));
  }
  Tensor logits0 = matmul(stack_rows(stat_rows), params.at("head.w")) +
                   params.at("head.b");  // [T,2]
  Tensor p_cur = stack_rows(pos_rows);   // [T,2] pixels
  Tensor o_cur = cols(logits0, 0, 1);    // [T,1]
  Tensor u_cur = cols(logits0, 1, 1);
  traj.iters.push_back(
      {p_cur, reshape(o_cur, {T}), reshape(u_cur, {T})});

  // Constant offsets for the local cost patch, feature units.
  const int P = cfg.patch, hp = P / 2;
  std::vector<double> offs;
  offs.reserve(static_cast<size_t>(P) * P * 2);
  for (int dy = -hp; dy <= hp; ++dy) {
    for (int dx = -hp; dx <= hp; ++dx) {
      offs.push_back(dx);
      offs.push_back(dy);
    }
  }
  Tensor offsets = Tensor::from({P * P, 2}, std::move(offs));

  for (int k = 1; k < cfg.iterations; ++k) {
    std::vector<Tensor> in_rows;
    for (int t = 0; t < T; ++t) {
      Tensor pf = scale(reshape(row(p_cur, t), {1, 2}), inv_s);
      Tensor patch_xy = add(offsets, pf);  // [P*P,2]
      Tensor local = reshape(bilinear_sample(cost3[t], patch_xy), {1, P * P});
      Tensor ot = reshape(row(o_cur, t), {1, 1});
      Tensor ut = reshape(row(u_cur, t), {1, 1});
      in_rows.push_back(row(concat_cols({local, ot, ut}), 0));
    }
    Tensor X = stack_rows(in_rows);  // [T, P*P+2]
    Tensor h = relu(conv1d_edge(X, params.at("refine.conv1.w")) +
                    params.at("refine.conv1.b"));
    Tensor delta = conv1d_edge(h, params.at("refine.conv2.w")) +
                   params.at("refine.conv2.b");  // [T,4]
    p_cur = p_cur + scale(cols(delta, 0, 2), cfg.stride);
    o_cur = o_cur + cols(delta, 2, 1);
    u_cur = u_cur + cols(delta, 3, 1);
    traj.iters.push_back(
        {p_cur, reshape(o_cur, {T}), reshape(u_cur, {T})});
  }
  return traj;
}

std::vector<TrajectoryPrediction> forward(
    const Video& video, const std::vector<QueryPoint>& queries,
    const ModelParams& params) {
  VideoFeatures feats = extract_features(video, params);
  std::vector<TrajectoryPrediction> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    out.push_back(forward_query(feats, q, params));
  }
  return out;
}

}  // namespace btap
