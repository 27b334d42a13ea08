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

#include "btap/losses.h"

#include <cmath>

#include "btap/common.h"
#include "btap/ops.h"

namespace btap {

namespace {

double dist(XY a, XY b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Shared skeleton of the supervised and SSL losses; they differ only in
// where the uncertainty target comes from and the optional per-frame
// occlusion weight.
// `p_target` may be a live tensor (siamese); its plain values are
// always used for the uncertainty indicator.
Tensor trajectory_loss(const TrajectoryPrediction& pred,
                       const Tensor& p_target,
                       const std::vector<uint8_t>& o_tgt,
                       const std::vector<uint8_t>* u_fixed,
                       const std::vector<double>* occ_weight,
                       const LossConfig& cfg) {
  const int T = pred.frames();
  require(p_target.rank() == 2 && p_target.dim(0) == T &&
              static_cast<int>(o_tgt.size()) == T,
          "trajectory_loss: target length mismatch");

  std::vector<XY> p_tgt(T);
  std::vector<double> o_flat(T), vis(T);
  for (int t = 0; t < T; ++t) {
    p_tgt[t] = {p_target.at(2 * t), p_target.at(2 * t + 1)};
    o_flat[t] = o_tgt[t];
    vis[t] = 1.0 - o_tgt[t];
  }
  Tensor o_target = Tensor::from({T}, o_flat);
  Tensor vis_mask = Tensor::from({T}, vis);
  Tensor occ_w = occ_weight ? Tensor::from({T}, *occ_weight)
                            : Tensor::full({T}, 1.0);

  Tensor acc = Tensor::scalar(0.0);
  for (const auto& it : pred.iters) {
    Tensor hub = sum(mul(huber_l2(it.p, p_target, cfg.huber_knee), vis_mask));
    Tensor occ = sum(mul(bce_logits(it.o, o_target), occ_w));

    std::vector<double> u(T);
    if (u_fixed) {
      for (int t = 0; t < T; ++t) u[t] = (*u_fixed)[t];
    } else {
      // Target from the detached prediction of THIS iteration.
      for (int t = 0; t < T; ++t) {
        XY ph{it.p.at(2 * t), it.p.at(2 * t + 1)};
        u[t] = dist(ph, p_tgt[t]) > cfg.eff_delta() ? 1.0 : 0.0;
      }
    }
    Tensor unc =
        sum(mul(bce_logits(it.u, Tensor::from({T}, u)), vis_mask));
    acc = acc + scale(hub + occ + unc, 1.0 / T);
  }
  return scale(acc, 1.0 / static_cast<double>(pred.iters.size()));
}

Tensor xy_tensor(const std::vector<XY>& p) {
  const int T = static_cast<int>(p.size());
  std::vector<double> flat(static_cast<size_t>(T) * 2);
  for (int t = 0; t < T; ++t) {
    flat[2 * t] = p[t].x;
    flat[2 * t + 1] = p[t].y;
  }
  return Tensor::from({T, 2}, std::move(flat));
}

}  // namespace

Tensor tapir_loss(const TrajectoryPrediction& pred,
                  const GroundTruthTrack& gt, const LossConfig& cfg) {
  return trajectory_loss(pred, xy_tensor(gt.p), gt.o, nullptr, nullptr, cfg);
}

PseudoLabels derive_pseudo_labels(const IterationPrediction& teacher_final,
                                  const IterationPrediction& student_final,
                                  const LossConfig& cfg) {
  const int T = static_cast<int>(teacher_final.o.numel());
  require(static_cast<int>(student_final.o.numel()) == T,
          "derive_pseudo_labels: teacher/student length mismatch");
  PseudoLabels labels;
  labels.p.resize(T);
  labels.o.resize(T);
  labels.u.resize(T);
  for (int t = 0; t < T; ++t) {
    XY pt{teacher_final.p.at(2 * t), teacher_final.p.at(2 * t + 1)};
    XY ps{student_final.p.at(2 * t), student_final.p.at(2 * t + 1)};
    labels.p[t] = pt;
    labels.o[t] = teacher_final.o.at(t) > 0 ? 1 : 0;
    labels.u[t] = dist(pt, ps) > cfg.eff_delta() ? 1 : 0;
  }
  return labels;
}

Tensor ssl_loss(const TrajectoryPrediction& student, const PseudoLabels& labels,
                const std::vector<double>& teacher_occ_logits,
                const LossConfig& cfg, bool confidence_filter) {
  const int T = student.frames();
  require(labels.frames() == T, "ssl_loss: label length mismatch");
  std::vector<double> occ_w(T, 1.0);
  if (confidence_filter) {
    require(static_cast<int>(teacher_occ_logits.size()) == T,
            "ssl_loss: teacher logits length mismatch");
    for (int t = 0; t < T; ++t) {
      double s = 1.0 / (1.0 + std::exp(-teacher_occ_logits[t]));
      if (std::max(s, 1.0 - s) < cfg.confidence_threshold) occ_w[t] = 0.0;
    }
  }
  return trajectory_loss(student, xy_tensor(labels.p), labels.o, &labels.u,
                         &occ_w, cfg);
}

Tensor ssl_loss_siamese(const TrajectoryPrediction& student,
                        const Tensor& teacher_p_final,
                        const PseudoLabels& labels,
                        const std::vector<double>& teacher_occ_logits,
                        const LossConfig& cfg, bool confidence_filter) {
  const int T = student.frames();
  require(labels.frames() == T, "ssl_loss_siamese: label length mismatch");
  std::vector<double> occ_w(T, 1.0);
  if (confidence_filter) {
    for (int t = 0; t < T; ++t) {
      double s = 1.0 / (1.0 + std::exp(-teacher_occ_logits[t]));
      if (std::max(s, 1.0 - s) < cfg.confidence_threshold) occ_w[t] = 0.0;
    }
  }
  return trajectory_loss(student, teacher_p_final, labels.o, &labels.u,
                         &occ_w, cfg);
}

int cycle_mask(const IterationPrediction& student_final,
               const QueryPoint& q1, const LossConfig& cfg) {
  XY p{student_final.p.at(2 * q1.t), student_final.p.at(2 * q1.t + 1)};
  bool close = dist(p, q1.q) < cfg.eff_delta_cycle();  // strict
  bool visible = student_final.o.at(q1.t) <= 0;
  return (close && visible) ? 1 : 0;
}

Tensor total_ssl(const std::vector<Tensor>& per_traj_losses,
                 const std::vector<int>& masks) {
  require(per_traj_losses.size() == masks.size(),
          "total_ssl: loss/mask count mismatch");
  Tensor acc;
  int kept = 0;
  for (size_t i = 0; i < per_traj_losses.size(); ++i) {
    if (!masks[i]) continue;
    acc = acc.defined() ? acc + per_traj_losses[i] : per_traj_losses[i];
    ++kept;
  }
  if (kept == 0) return Tensor::scalar(0.0);
  return scale(acc, 1.0 / kept);
}

}  // namespace btap
