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

#ifndef BTAP_TRACKER_H_
#define BTAP_TRACKER_H_

#include <map>
#include <string>
#include <vector>

#include "btap/ops.h"
#include "btap/rng.h"
#include "btap/types.h"

namespace btap {

// Point tracker: a small per-frame conv backbone produces stride-4
// feature maps; each query is matched against every frame via a dot
// product cost volume; iteration 0 reads positions out with a spatial
// soft-argmax and occlusion/uncertainty logits from pooled cost
// statistics; subsequent iterations refine all three with a temporal
// conv block over local cost features.  Every query is tracked
// independently of the others.
struct TrackerConfig {
  int iterations = 2;        // K >= 2, counting the initial estimate
  double temperature = 0.5;  // soft-argmax temperature tau
  int stride = 4;            // backbone stride (product over layers)
  int feature_dim = 32;
  int refine_hidden = 32;
  int patch = 5;             // local cost patch side, odd
};

// Named parameter tensors plus the architecture knobs they assume.
// std::map keeps iteration order deterministic for optimizers, EMA, and
// checkpoints.
struct ModelParams {
  TrackerConfig cfg;
  std::map<std::string, Tensor> tensors;

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  int64_t param_count() const;
};

// Deterministic given seed; the refinement output projection is
// zero-initialized so iteration 1 equals iteration 0 before training.
ModelParams init_params(uint64_t seed, const TrackerConfig& cfg = {});

// Per refinement iteration: positions [T,2] in source pixels (x,y),
// occlusion logits [T] (>0 means occluded), uncertainty logits [T]
// (>0 means expected error beyond the loss threshold).
struct IterationPrediction {
  Tensor p;
  Tensor o;
  Tensor u;
};

struct TrajectoryPrediction {
  std::vector<IterationPrediction> iters;

  const IterationPrediction& final() const { return iters.back(); }
  XY pos(int t) const {
    return {final().p.at(2 * t), final().p.at(2 * t + 1)};
  }
  double occ_logit(int t) const { return final().o.at(t); }
  double unc_logit(int t) const { return final().u.at(t); }
  int frames() const { return static_cast<int>(final().o.numel()); }
};

// Feature maps for one video, shared across all of its queries.
struct VideoFeatures {
  std::vector<Tensor> frames;  // T tensors [Hf, Wf, d]
  int T = 0, H = 0, W = 0;     // source dims
  int Hf = 0, Wf = 0;
  int stride = 0;
};

VideoFeatures extract_features(const Video& video, const ModelParams& params);

TrajectoryPrediction forward_query(const VideoFeatures& feats,
                                   const QueryPoint& query,
                                   const ModelParams& params);

std::vector<TrajectoryPrediction> forward(
    const Video& video, const std::vector<QueryPoint>& queries,
    const ModelParams& params);

}  // namespace btap

#endif  // BTAP_TRACKER_H_
