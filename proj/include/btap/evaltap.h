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

#ifndef BTAP_EVALTAP_H_
#define BTAP_EVALTAP_H_

#include <map>
#include <vector>

#include "btap/tracker.h"
#include "btap/types.h"

namespace btap {

// Query extraction: strided takes every visible frame whose index is a
// multiple of 5 (strictly — no snapping to nearby visible frames);
// query-first takes only the first visible frame, and evaluation then
// scores only frames at or after the query.
enum class QueryMode { kStrided, kQueryFirst };

struct PredictedTrack {
  std::vector<XY> p;
  std::vector<uint8_t> occ;  // 1 = predicted occluded (logit > 0)
  int frames() const { return static_cast<int>(occ.size()); }
};

PredictedTrack to_predicted(const TrajectoryPrediction& traj);

std::vector<QueryPoint> extract_queries(const GroundTruthTrack& gt,
                                        QueryMode mode);

// Aggregate metrics over (prediction, ground truth, query frame)
// triples.  Thresholds {1,2,4,8,16} are specified at a 256-pixel
// reference and scaled by working_resolution/256; position matches use
// strict d < threshold.  Per threshold:
//   TP: gt visible, predicted visible, within threshold
//   FP: predicted visible but gt occluded or outside threshold
//   FN: gt visible, predicted occluded
// delta_avg averages position accuracy (visible-gt frames only); OA is
// binary occlusion accuracy over all scored frames; AJ averages
// TP/(TP+FP+FN) over thresholds with global accumulation.
struct MetricsReport {
  double aj = 0.0;
  double delta_avg = 0.0;
  double oa = 0.0;
  std::map<int, double> per_threshold;  // 256-scale threshold -> accuracy
  int64_t points = 0;
  int64_t videos = 0;
};

MetricsReport compute_metrics(const std::vector<PredictedTrack>& preds,
                              const std::vector<GroundTruthTrack>& gts,
                              const std::vector<int>& query_frames,
                              QueryMode mode, double working_resolution,
                              int64_t video_count = 1);

}  // namespace btap

#endif  // BTAP_EVALTAP_H_
