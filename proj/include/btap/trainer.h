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

#ifndef BTAP_TRAINER_H_
#define BTAP_TRAINER_H_

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "btap/evaltap.h"
#include "btap/interchange.h"
#include "btap/losses.h"
#include "btap/tracker.h"
#include "btap/transforms.h"

namespace btap {

enum class SslFilter { kNone, kConfidence, kCycle };

SslFilter ssl_filter_from_string(const std::string& s);
std::string to_string(SslFilter f);

// One training step = one supervised update plus (when enabled) one
// self-supervised update, both with gradients taken at the same
// parameters and applied back to back through task-private Adam states;
// the EMA teacher then tracks the student.
struct TrainConfig {
  int steps = 400;
  int b_sup = 8;   // supervised trajectories per step
  int b_ssl = 4;   // unlabeled videos per step (half the batch)
  int n_q = 8;     // teacher queries per unlabeled video
  double peak_lr = 2e-3;
  int warmup_steps = 40;
  double ema_decay = 0.99;
  double q1_equals_q2_prob = 0.5;
  bool use_affine = true;
  bool use_jpeg = true;
  SslFilter filter = SslFilter::kCycle;
  bool siamese_mode = false;
  bool ssl_enabled = true;
  uint64_t seed = 0;
  int clip_frames = 0;         // 0 = full unlabeled clips
  double data_fraction = 1.0;  // applied by the caller when loading data
  int eval_interval = 100;
  int threads = 1;
  // Optional LR reduction for the refinement block's parameter group.
  double refine_lr_mult = 1.0;
  double max_skip_rate = 0.01;
  LossConfig loss;
  TrackerConfig tracker;
};

// Task-private Adam moments, keyed by parameter name.
struct AdamState {
  std::map<std::string, std::vector<double>> m, v;
  int64_t step = 0;
};

using NamedGrads = std::map<std::string, std::vector<double>>;

// Cosine schedule with linear warmup: 0 at step 0, peak at warmup end.
double lr_at(const TrainConfig& cfg, int step);

void adam_apply(ModelParams& params, const NamedGrads& grads, AdamState& state,
                double lr, double refine_lr_mult = 1.0);

// xi' = decay*xi + (1-decay)*theta, elementwise.
void ema_update(ModelParams& teacher, const ModelParams& student,
                double decay);

ModelParams clone_params(const ModelParams& src, bool requires_grad);

// Uniform over [0,W) x [0,H) x {0..T-1}.
std::vector<QueryPoint> sample_teacher_queries(int T, int H, int W, int n,
                                               Rng& rng);

// With probability prob returns q1; otherwise uniform over the pseudo-
// visible points of other frames; falls back to q1 when none exist.
QueryPoint sample_student_query(const PseudoLabels& labels,
                                const QueryPoint& q1, double prob, Rng& rng);

// Differentiable per-frame inverse warp of positions [T,2] back to
// source coordinates.
Tensor invert_points_tensor(const AffineSequence& seq, const Tensor& p);

struct TrainResult {
  ModelParams student;
  ModelParams teacher;
  AdamState opt_sup, opt_ssl;
  int skipped_steps = 0;
  double last_sup_loss = 0.0;
  double last_ssl_loss = 0.0;
  std::vector<std::string> log_lines;  // one JSON object per eval interval
};

// Runs the full loop.  `initial` (when set) seeds both student and
// teacher; labeled clips must carry tracks.  Deterministic given cfg
// (including threads=1; with more workers the gradient reduction order
// is still fixed, so results stay reproducible on the same build).
TrainResult train(const TrainConfig& cfg, const std::vector<Clip>& labeled,
                  const std::vector<Clip>& unlabeled,
                  const std::vector<Clip>& eval_clips,
                  const std::optional<ModelParams>& initial = std::nullopt,
                  std::ostream* log = nullptr);

// Strided-query evaluation of a parameter set over labeled clips.
MetricsReport evaluate_clips(const ModelParams& params,
                             const std::vector<Clip>& clips, QueryMode mode,
                             int threads = 1);

}  // namespace btap

#endif  // BTAP_TRAINER_H_
