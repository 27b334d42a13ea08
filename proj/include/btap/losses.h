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

#ifndef BTAP_LOSSES_H_
#define BTAP_LOSSES_H_

#include <vector>

#include "btap/tracker.h"
#include "btap/types.h"

namespace btap {

// Loss thresholds are specified at a 256-pixel reference resolution and
// scale linearly with the working resolution; the Huber knee stays in
// absolute pixels.
struct LossConfig {
  double delta = 6.0;         // uncertainty distance threshold, 256-scale
  double delta_cycle = 4.0;   // cycle threshold, 256-scale
  double huber_knee = 1.0;    // pixels, unscaled
  double scale_reference = 256.0;
  double confidence_threshold = 0.6;
  double working_resolution = 256.0;

  double eff_delta() const {
    return delta * working_resolution / scale_reference;
  }
  double eff_delta_cycle() const {
    return delta_cycle * working_resolution / scale_reference;
  }
};

// Teacher outputs binarized and frozen as student targets; plain values
// by construction, so no gradient can reach the teacher through them.
struct PseudoLabels {
  std::vector<XY> p;       // T positions
  std::vector<uint8_t> o;  // T, 1 = occluded
  std::vector<uint8_t> u;  // T, 1 = teacher/student disagreement > delta
  int frames() const { return static_cast<int>(o.size()); }
};

// Supervised tracking loss for one trajectory, averaged over refinement
// iterations: per frame, Huber position error (visible frames only) +
// occlusion BCE + uncertainty BCE (visible frames only), summed over
// frames and divided by T.  The uncertainty target is the indicator
// that the (detached) predicted position of that iteration is more than
// delta from ground truth.
Tensor tapir_loss(const TrajectoryPrediction& pred,
                  const GroundTruthTrack& gt, const LossConfig& cfg);

// Binarizes the teacher's final-iteration outputs: positions copied,
// occlusion by logit sign, uncertainty by teacher-vs-student final
// position distance exceeding delta (strict).
PseudoLabels derive_pseudo_labels(const IterationPrediction& teacher_final,
                                  const IterationPrediction& student_final,
                                  const LossConfig& cfg);

// Same structure as tapir_loss with pseudo-labels as targets and the
// uncertainty target fixed to labels.u.  When confidence_filter is set,
// frames where the teacher's occlusion confidence
// max(sigmoid(l), 1-sigmoid(l)) falls below the threshold have their
// occlusion BCE term zeroed.
Tensor ssl_loss(const TrajectoryPrediction& student, const PseudoLabels& labels,
                const std::vector<double>& teacher_occ_logits,
                const LossConfig& cfg, bool confidence_filter);

// Siamese variant: identical to ssl_loss except the position target is
// the teacher branch's live [T,2] tensor, so gradients flow through
// both branches (binarized occlusion/uncertainty targets stay frozen).
Tensor ssl_loss_siamese(const TrajectoryPrediction& student,
                        const Tensor& teacher_p_final,
                        const PseudoLabels& labels,
                        const std::vector<double>& teacher_occ_logits,
                        const LossConfig& cfg, bool confidence_filter);

// Cycle-consistency gate: 1 iff the student's final track passes
// strictly within delta_cycle of the teacher query at the query frame
// AND predicts visible there (logit <= 0).  Callers skip the gate when
// student and teacher queries coincide.
int cycle_mask(const IterationPrediction& student_final,
               const QueryPoint& q1, const LossConfig& cfg);

// Mean of the masked per-trajectory losses over the count of UNMASKED
// trajectories (not the total), so heavy early filtering does not
// shrink the effective learning rate.  Masked trajectories never enter
// the graph: zero loss and bitwise-zero gradient.  All-masked batches
// yield a plain zero.
Tensor total_ssl(const std::vector<Tensor>& per_traj_losses,
                 const std::vector<int>& masks);

}  // namespace btap

#endif  // BTAP_LOSSES_H_
