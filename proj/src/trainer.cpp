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

#include "btap/trainer.h"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "btap/common.h"

namespace btap {

SslFilter ssl_filter_from_string(const std::string& s) {
  if (s == "none") return SslFilter::kNone;
  if (s == "confidence") return SslFilter::kConfidence;
  if (s == "cycle") return SslFilter::kCycle;
  fail("unknown ssl filter: " + s);
}

std::string to_string(SslFilter f) {
  switch (f) {
    case SslFilter::kNone: return "none";
    case SslFilter::kConfidence: return "confidence";
    case SslFilter::kCycle: return "cycle";
  }
  fail("bad filter enum");
}

double lr_at(const TrainConfig& cfg, int step) {
  if (cfg.warmup_steps > 0 && step < cfg.warmup_steps) {
    return cfg.peak_lr * step / cfg.warmup_steps;
  }
  int span = cfg.steps - cfg.warmup_steps;
  if (span <= 1) return cfg.peak_lr;
  double frac = static_cast<double>(step - cfg.warmup_steps) / span;
  const double pi = std::acos(-1.0);
  return cfg.peak_lr * 0.5 * (1.0 + std::cos(pi * frac));
}

void adam_apply(ModelParams& params, const NamedGrads& grads, AdamState& state,
                double lr, double refine_lr_mult) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++state.step;
  double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (auto& [name, t] : params.tensors) {
    auto& m = state.m[name];
    auto& v = state.v[name];
    size_t n = t.data().size();
    if (m.empty()) m.assign(n, 0.0);
    if (v.empty()) v.assign(n, 0.0);
    auto git = grads.find(name);
    const std::vector<double>* g = git == grads.end() ? nullptr : &git->second;
    double eff_lr = lr;
    if (name.rfind("refine.", 0) == 0) eff_lr *= refine_lr_mult;
    auto& val = t.mutable_data();
    for (size_t i = 0; i < n; ++i) {
      double gi = g ? (*g)[i] : 0.0;
      m[i] = b1 * m[i] + (1 - b1) * gi;
      v[i] = b2 * v[i] + (1 - b2) * gi * gi;
      val[i] -= eff_lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
}

void ema_update(ModelParams& teacher, const ModelParams& student,
                double decay) {
  require(teacher.tensors.size() == student.tensors.size(),
          "ema_update: parameter set mismatch");
  auto ti = teacher.tensors.begin();
  auto si = student.tensors.begin();
  for (; ti != teacher.tensors.end(); ++ti, ++si) {
    require(ti->first == si->first &&
                ti->second.shape() == si->second.shape(),
            "ema_update: shape mismatch at " + ti->first);
    auto& xv = ti->second.mutable_data();
    const auto& tv = si->second.data();
    for (size_t i = 0; i < xv.size(); ++i) {
      xv[i] = decay * xv[i] + (1.0 - decay) * tv[i];
    }
  }
}

ModelParams clone_params(const ModelParams& src, bool requires_grad) {
  ModelParams out;
  out.cfg = src.cfg;
  for (const auto& [name, t] : src.tensors) {
    out.tensors.emplace(name,
                        Tensor::from(t.shape(), t.data(), requires_grad));
  }
  return out;
}

std::vector<QueryPoint> sample_teacher_queries(int T, int H, int W, int n,
                                               Rng& rng) {
  std::vector<QueryPoint> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    QueryPoint q;
    q.q.x = rng.uniform(0.0, W);
    q.q.y = rng.uniform(0.0, H);
    q.t = static_cast<int>(rng.uniform_int(T));
    out.push_back(q);
  }
  return out;
}

QueryPoint sample_student_query(const PseudoLabels& labels,
                                const QueryPoint& q1, double prob, Rng& rng) {
  if (rng.uniform() < prob) return q1;
  std::vector<int> candidates;
  for (int t = 0; t < labels.frames(); ++t) {
    if (t != q1.t && !labels.o[t]) candidates.push_back(t);
  }
  if (candidates.empty()) return q1;
  int t = candidates[rng.uniform_int(candidates.size())];
  return {labels.p[t], t};
}

Tensor invert_points_tensor(const AffineSequence& seq, const Tensor& p) {
  const int T = static_cast<int>(p.dim(0));
  require(seq.T == T, "invert_points_tensor: frame count mismatch");
  std::vector<double> off(static_cast<size_t>(T) * 2),
      scl(static_cast<size_t>(T) * 2);
  for (int t = 0; t < T; ++t) {
    off[2 * t] = seq.cx[t];
    off[2 * t + 1] = seq.cy[t];
    scl[2 * t] = seq.W / seq.w[t];
    scl[2 * t + 1] = seq.H / seq.h[t];
  }
  return mul(sub(p, Tensor::from({T, 2}, off)), Tensor::from({T, 2}, scl));
}

namespace {

// Runs fn(0..n-1) on up to `threads` workers; the first exception (if
// any) is rethrown on the caller after all workers join.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  int k = std::min(threads, n);
  pool.reserve(k);
  for (int i = 0; i < k; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

void accumulate_named(const ModelParams& params, const GradMap& gm,
                      NamedGrads& out) {
  for (const auto& [name, t] : params.tensors) {
    const std::vector<double>* g = gm.find(t.raw());
    if (!g) continue;
    auto& acc = out[name];
    if (acc.empty()) acc.assign(g->size(), 0.0);
    for (size_t i = 0; i < g->size(); ++i) acc[i] += (*g)[i];
  }
}

void scale_named(NamedGrads& grads, double s) {
  for (auto& [name, g] : grads) {
    for (auto& v : g) v *= s;
  }
}

XY clamp_to_frame(XY p, int H, int W) {
  return {std::min(std::max(p.x, 0.0), static_cast<double>(W - 1)),
          std::min(std::max(p.y, 0.0), static_cast<double>(H - 1))};
}

Video crop_frames(const Video& v, int start, int n) {
  Video out = Video::zeros(n, v.H, v.W);
  size_t frame = static_cast<size_t>(v.H) * v.W * 3;
  std::copy(v.rgb.begin() + start * frame, v.rgb.begin() + (start + n) * frame,
            out.rgb.begin());
  return out;
}

struct StepStats {
  double loss = 0.0;
  int masks_total = 0;
  int masks_kept = 0;
};

// One supervised batch: gradients of the mean trajectory loss.
StepStats supervised_step(const TrainConfig& cfg, const LossConfig& lcfg,
                          const ModelParams& student,
                          const std::vector<Clip>& labeled, Rng rng,
                          NamedGrads& grads_out) {
  struct Sample {
    int track;
    int qframe;
  };
  // Group samples per clip so each clip's backbone runs once.
  std::map<int, std::vector<Sample>> by_clip;
  for (int i = 0; i < cfg.b_sup; ++i) {
    Rng r = rng.split(i);
    int ci = static_cast<int>(r.uniform_int(labeled.size()));
    const Clip& clip = labeled[ci];
    require(clip.has_tracks && !clip.tracks.empty(),
            "supervised clip without tracks");
    int ti = static_cast<int>(r.uniform_int(clip.tracks.size()));
    const GroundTruthTrack& tr = clip.tracks[ti];
    std::vector<int> vis;
    for (int t = 0; t < tr.frames(); ++t) {
      if (!tr.o[t]) vis.push_back(t);
    }
    require(!vis.empty(), "supervised track fully occluded");
    int qf = vis[r.uniform_int(vis.size())];
    by_clip[ci].push_back({ti, qf});
  }

  std::vector<int> clip_ids;
  for (const auto& [ci, samples] : by_clip) clip_ids.push_back(ci);
  std::vector<NamedGrads> partial(clip_ids.size());
  std::vector<double> losses(clip_ids.size(), 0.0);

  parallel_for(static_cast<int>(clip_ids.size()), cfg.threads, [&](int k) {
    int ci = clip_ids[k];
    const Clip& clip = labeled[ci];
    VideoFeatures feats = extract_features(clip.video, student);
    Tensor acc;
    for (const Sample& s : by_clip[ci]) {
      const GroundTruthTrack& tr = clip.tracks[s.track];
      QueryPoint q{clamp_to_frame(tr.p[s.qframe], clip.video.H, clip.video.W),
                   s.qframe};
      TrajectoryPrediction pred = forward_query(feats, q, student);
      Tensor l = tapir_loss(pred, tr, lcfg);
      acc = acc.defined() ? acc + l : l;
    }
    losses[k] = acc.item();
    GradMap gm = backward(acc);
    accumulate_named(student, gm, partial[k]);
  });

  StepStats stats;
  for (size_t k = 0; k < clip_ids.size(); ++k) {
    stats.loss += losses[k];
    for (auto& [name, g] : partial[k]) {
      auto& acc = grads_out[name];
      if (acc.empty()) acc.assign(g.size(), 0.0);
      for (size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
    }
  }
  scale_named(grads_out, 1.0 / cfg.b_sup);
  stats.loss /= cfg.b_sup;
  return stats;
}

// One self-supervised batch over unlabeled videos.
StepStats ssl_step(const TrainConfig& cfg, const LossConfig& lcfg,
                   const ModelParams& student, const ModelParams& teacher,
                   const std::vector<Clip>& unlabeled, Rng rng,
                   NamedGrads& grads_out) {
  std::vector<NamedGrads> partial(cfg.b_ssl);
  std::vector<double> losses(cfg.b_ssl, 0.0);
  std::vector<int> kept(cfg.b_ssl, 0), total(cfg.b_ssl, 0);

  parallel_for(cfg.b_ssl, cfg.threads, [&](int v) {
    Rng r = rng.split(v);
    const Clip& clip = unlabeled[r.uniform_int(unlabeled.size())];
    Video video = clip.video;
    if (cfg.clip_frames > 0 && cfg.clip_frames < video.T) {
      int start =
          static_cast<int>(r.uniform_int(video.T - cfg.clip_frames + 1));
      video = crop_frames(video, start, cfg.clip_frames);
    }
    const int T = video.T, H = video.H, W = video.W;

    // Teacher pass on the clean video.  In siamese mode the teacher IS
    // the student, and gradients flow through this branch too.
    const ModelParams& tparams = cfg.siamese_mode ? student : teacher;
    VideoFeatures tfeats = extract_features(video, tparams);

    Rng qrng = r.split("q1");
    std::vector<QueryPoint> q1s = sample_teacher_queries(T, H, W, cfg.n_q,
                                                         qrng);
    for (auto& q : q1s) q.q = clamp_to_frame(q.q, H, W);

    std::vector<TrajectoryPrediction> teacher_trajs;
    teacher_trajs.reserve(q1s.size());
    for (const auto& q : q1s) {
      teacher_trajs.push_back(forward_query(tfeats, q, tparams));
    }

    // Student view: clip-level degradation + warp shared by all queries.
    DegradationConfig dcfg;
    dcfg.jpeg_enabled = cfg.use_jpeg;
    dcfg.affine_enabled = cfg.use_affine;
    Rng vrng = r.split("view");
    StudentView view = make_student_view(video, vrng, dcfg);
    VideoFeatures sfeats = extract_features(view.video, student);

    Tensor acc;
    for (int i = 0; i < static_cast<int>(q1s.size()); ++i) {
      const TrajectoryPrediction& ttraj = teacher_trajs[i];
      const IterationPrediction& tfinal = ttraj.final();

      // Interim labels (occlusion + positions) drive query sampling.
      PseudoLabels labels;
      labels.p.resize(T);
      labels.o.resize(T);
      labels.u.assign(T, 0);
      std::vector<double> tocc(T);
      for (int t = 0; t < T; ++t) {
        labels.p[t] = {tfinal.p.at(2 * t), tfinal.p.at(2 * t + 1)};
        tocc[t] = tfinal.o.at(t);
        labels.o[t] = tocc[t] > 0 ? 1 : 0;
      }

      Rng srng = r.split("q2").split(i);
      QueryPoint q2 =
          sample_student_query(labels, q1s[i], cfg.q1_equals_q2_prob, srng);
      bool same_query = q2.t == q1s[i].t && q2.q.x == q1s[i].q.x &&
                        q2.q.y == q1s[i].q.y;

      QueryPoint sq{clamp_to_frame(apply_point(view.seq, q2.q, q2.t), H, W),
                    q2.t};
      TrajectoryPrediction straj = forward_query(sfeats, sq, student);

      // Map predictions back to source coordinates per frame.
      TrajectoryPrediction mapped;
      for (const auto& it : straj.iters) {
        mapped.iters.push_back(
            {invert_points_tensor(view.seq, it.p), it.o, it.u});
      }

      PseudoLabels full =
          derive_pseudo_labels(tfinal, mapped.final(), lcfg);

      int mask = 1;
      if (cfg.filter == SslFilter::kCycle && !same_query) {
        mask = cycle_mask(mapped.final(), q1s[i], lcfg);
      }
      ++total[v];
      if (!mask) continue;
      ++kept[v];

      bool conf = cfg.filter == SslFilter::kConfidence;
      Tensor l = cfg.siamese_mode
                     ? ssl_loss_siamese(mapped, tfinal.p, full, tocc, lcfg,
                                        conf)
                     : ssl_loss(mapped, full, tocc, lcfg, conf);
      acc = acc.defined() ? acc + l : l;
    }
    if (!acc.defined()) return;  // every trajectory masked
    Tensor video_loss = scale(acc, 1.0 / kept[v]);
    losses[v] = video_loss.item();
    GradMap gm = backward(video_loss);
    accumulate_named(student, gm, partial[v]);
  });

  StepStats stats;
  int contributing = 0;
  for (int v = 0; v < cfg.b_ssl; ++v) {
    stats.masks_total += total[v];
    stats.masks_kept += kept[v];
    if (kept[v] == 0) continue;
    ++contributing;
    stats.loss += losses[v];
    for (auto& [name, g] : partial[v]) {
      auto& acc = grads_out[name];
      if (acc.empty()) acc.assign(g.size(), 0.0);
      for (size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
    }
  }
  if (contributing > 0) {
    scale_named(grads_out, 1.0 / contributing);
    stats.loss /= contributing;
  }
  return stats;
}

}  // namespace

MetricsReport evaluate_clips(const ModelParams& params,
                             const std::vector<Clip>& clips, QueryMode mode,
                             int threads) {
  // Grad-free clone keeps the evaluation graphs lean.
  ModelParams frozen = clone_params(params, /*requires_grad=*/false);
  struct PerClip {
    std::vector<PredictedTrack> preds;
    std::vector<GroundTruthTrack> gts;
    std::vector<int> query_frames;
  };
  std::vector<PerClip> results(clips.size());
  parallel_for(static_cast<int>(clips.size()), threads, [&](int c) {
    const Clip& clip = clips[c];
    require(clip.has_tracks, "evaluate_clips: clip without tracks");
    VideoFeatures feats = extract_features(clip.video, frozen);
    for (const auto& tr : clip.tracks) {
      for (const auto& q : extract_queries(tr, mode)) {
        QueryPoint cq{clamp_to_frame(q.q, clip.video.H, clip.video.W), q.t};
        TrajectoryPrediction pred = forward_query(feats, cq, frozen);
        results[c].preds.push_back(to_predicted(pred));
        results[c].gts.push_back(tr);
        results[c].query_frames.push_back(q.t);
      }
    }
  });
  std::vector<PredictedTrack> preds;
  std::vector<GroundTruthTrack> gts;
  std::vector<int> query_frames;
  for (auto& rc : results) {
    preds.insert(preds.end(), rc.preds.begin(), rc.preds.end());
    gts.insert(gts.end(), rc.gts.begin(), rc.gts.end());
    query_frames.insert(query_frames.end(), rc.query_frames.begin(),
                        rc.query_frames.end());
  }
  double res = clips.empty() ? 256.0 : std::max(clips[0].video.H,
                                                clips[0].video.W);
  return compute_metrics(preds, gts, query_frames, mode, res,
                         static_cast<int64_t>(clips.size()));
}

TrainResult train(const TrainConfig& cfg, const std::vector<Clip>& labeled,
                  const std::vector<Clip>& unlabeled,
                  const std::vector<Clip>& eval_clips,
                  const std::optional<ModelParams>& initial,
                  std::ostream* log) {
  require(!labeled.empty(), "train: no labeled clips");
  require(!cfg.ssl_enabled || !unlabeled.empty(),
          "train: ssl enabled but no unlabeled clips");

  // Thresholds follow the working resolution of the training videos.
  LossConfig lcfg = cfg.loss;
  lcfg.working_resolution =
      std::max(labeled[0].video.H, labeled[0].video.W);

  TrainResult result;
  result.student = initial ? clone_params(*initial, true)
                           : init_params(cfg.seed, cfg.tracker);
  result.teacher = clone_params(result.student, /*requires_grad=*/false);

  Rng root(cfg.seed);
  for (int step = 0; step < cfg.steps; ++step) {
    Rng step_rng = root.split("step").split(static_cast<uint64_t>(step));
    double lr = lr_at(cfg, step);

    NamedGrads g_sup, g_ssl;
    StepStats sup_stats, ssl_stats;
    bool ok = true;
    try {
      sup_stats = supervised_step(cfg, lcfg, result.student, labeled,
                                  step_rng.split("sup"), g_sup);
      if (cfg.ssl_enabled) {
        ssl_stats = ssl_step(cfg, lcfg, result.student, result.teacher,
                             unlabeled, step_rng.split("ssl"), g_ssl);
      }
    } catch (const Error& e) {
      ++result.skipped_steps;
      ok = false;
      if (log) {
        *log << "{\"step\":" << step << ",\"skipped\":\"" << e.what()
             << "\"}\n";
      }
    }
    if (ok) {
      adam_apply(result.student, g_sup, result.opt_sup, lr,
                 cfg.refine_lr_mult);
      if (cfg.ssl_enabled) {
        // Half the batch, half the learning rate.
        adam_apply(result.student, g_ssl, result.opt_ssl, lr / 2.0,
                   cfg.refine_lr_mult);
      }
      ema_update(result.teacher, result.student, cfg.ema_decay);
      result.last_sup_loss = sup_stats.loss;
      result.last_ssl_loss = ssl_stats.loss;
    }

    bool last = step == cfg.steps - 1;
    if ((cfg.eval_interval > 0 && (step + 1) % cfg.eval_interval == 0) ||
        last) {
      std::ostringstream line;
      line << "{\"step\":" << step << ",\"lr\":" << lr
           << ",\"sup_loss\":" << sup_stats.loss
           << ",\"ssl_loss\":" << ssl_stats.loss << ",\"mask_rate\":"
           << (ssl_stats.masks_total
                   ? static_cast<double>(ssl_stats.masks_kept) /
                         ssl_stats.masks_total
                   : 0.0)
           << ",\"skipped\":" << result.skipped_steps;
      if (!eval_clips.empty()) {
        MetricsReport m = evaluate_clips(result.student, eval_clips,
                                         QueryMode::kStrided, cfg.threads);
        line << ",\"delta_avg\":" << m.delta_avg << ",\"aj\":" << m.aj
             << ",\"oa\":" << m.oa;
      }
      line << "}";
      result.log_lines.push_back(line.str());
      if (log) *log << line.str() << "\n";
    }
  }

  require(result.skipped_steps <=
              static_cast<int>(cfg.max_skip_rate * cfg.steps),
          "train: skip rate exceeded limit");
  return result;
}

}  // namespace btap
