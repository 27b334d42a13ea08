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

#include "btap/evaltap.h"

#include <array>
#include <cmath>

#include "btap/common.h"

namespace btap {

namespace {

constexpr std::array<int, 5> kThresholds = {1, 2, 4, 8, 16};

}  // namespace

PredictedTrack to_predicted(const TrajectoryPrediction& traj) {
  PredictedTrack out;
  const int T = traj.frames();
  out.p.resize(T);
  out.occ.resize(T);
  for (int t = 0; t < T; ++t) {
    out.p[t] = traj.pos(t);
    out.occ[t] = traj.occ_logit(t) > 0 ? 1 : 0;
  }
  return out;
}

std::vector<QueryPoint> extract_queries(const GroundTruthTrack& gt,
                                        QueryMode mode) {
  std::vector<QueryPoint> out;
  const int T = gt.frames();
  if (mode == QueryMode::kStrided) {
    for (int t = 0; t < T; t += 5) {
      if (!gt.o[t]) out.push_back({gt.p[t], t});
    }
  } else {
    for (int t = 0; t < T; ++t) {
      if (!gt.o[t]) {
        out.push_back({gt.p[t], t});
        break;
      }
    }
  }
  return out;
}

MetricsReport compute_metrics(const std::vector<PredictedTrack>& preds,
                              const std::vector<GroundTruthTrack>& gts,
                              const std::vector<int>& query_frames,
                              QueryMode mode, double working_resolution,
                              int64_t video_count) {
  require(preds.size() == gts.size() && preds.size() == query_frames.size(),
          "compute_metrics: input count mismatch");
  require(working_resolution > 0, "compute_metrics: bad resolution");

  int64_t tp[5] = {0}, fp[5] = {0}, fn[5] = {0};
  int64_t pos_hit[5] = {0};
  int64_t visible_frames = 0, occ_correct = 0, scored_frames = 0;

  for (size_t i = 0; i < preds.size(); ++i) {
    const PredictedTrack& pr = preds[i];
    const GroundTruthTrack& gt = gts[i];
    const int T = gt.frames();
    require(pr.frames() == T, "compute_metrics: track length mismatch");
    int t0 = mode == QueryMode::kQueryFirst ? query_frames[i] : 0;
    for (int t = t0; t < T; ++t) {
      ++scored_frames;
      bool gt_vis = !gt.o[t];
      bool pr_vis = !pr.occ[t];
      if (gt_vis == pr_vis) ++occ_correct;
      double d = std::hypot(pr.p[t].x - gt.p[t].x, pr.p[t].y - gt.p[t].y);
      if (gt_vis) ++visible_frames;
      for (int k = 0; k < 5; ++k) {
        double thr = kThresholds[k] * working_resolution / 256.0;
        bool within = d < thr;  // strict
        if (gt_vis && within) ++pos_hit[k];
        if (gt_vis && pr_vis && within) {
          ++tp[k];
        } else if (pr_vis) {
          ++fp[k];
        } else if (gt_vis) {
          ++fn[k];
        }
      }
    }
  }

  MetricsReport report;
  report.points = static_cast<int64_t>(preds.size());
  report.videos = video_count;
  double aj_sum = 0.0, acc_sum = 0.0;
  for (int k = 0; k < 5; ++k) {
    double acc = visible_frames ? static_cast<double>(pos_hit[k]) /
                                      static_cast<double>(visible_frames)
                                : 0.0;
    report.per_threshold[kThresholds[k]] = acc;
    acc_sum += acc;
    int64_t denom = tp[k] + fp[k] + fn[k];
    aj_sum += denom ? static_cast<double>(tp[k]) / static_cast<double>(denom)
                    : 1.0;
  }
  report.delta_avg = acc_sum / 5.0;
  report.aj = aj_sum / 5.0;
  report.oa = scored_frames ? static_cast<double>(occ_correct) /
                                  static_cast<double>(scored_frames)
                            : 0.0;
  return report;
}

}  // namespace btap
