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

#include <cmath>

#include <doctest.h>

#include "btap/synthdata.h"

using namespace btap;

namespace {

Clip make_labeled_clip(uint64_t seed, int T = 6, int HW = 32) {
  SceneConfig cfg;
  cfg.T = T;
  cfg.H = HW;
  cfg.W = HW;
  cfg.seed = seed;
  cfg.min_radius = 4;
  cfg.max_radius = 7;
  cfg.tracks_per_scene = 6;
  Scene s = generate_scene(cfg);
  Clip c;
  c.video = s.video;
  c.tracks = s.tracks;
  c.has_tracks = true;
  return c;
}

Clip make_unlabeled_clip(uint64_t seed, int T = 6, int HW = 32) {
  Clip c = make_labeled_clip(seed, T, HW);
  c.tracks.clear();
  c.has_tracks = false;
  return c;
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.steps = 2;
  cfg.b_sup = 2;
  cfg.b_ssl = 1;
  cfg.n_q = 2;
  cfg.warmup_steps = 1;
  cfg.eval_interval = 2;
  cfg.loss.working_resolution = 32.0;
  return cfg;
}

}  // namespace

TEST_CASE("learning rate schedule: warmup then cosine to zero") {
  TrainConfig cfg;
  cfg.peak_lr = 2e-3;
  cfg.warmup_steps = 40;
  cfg.steps = 400;
  CHECK(lr_at(cfg, 0) == doctest::Approx(0.0));
  CHECK(lr_at(cfg, 20) == doctest::Approx(1e-3));
  CHECK(lr_at(cfg, 40) == doctest::Approx(2e-3));
  // Cosine midpoint and endpoint.
  CHECK(lr_at(cfg, 220) == doctest::Approx(1e-3).epsilon(1e-9));
  CHECK(lr_at(cfg, 400) == doctest::Approx(0.0).epsilon(1e-12));
  for (int s = 41; s <= 400; ++s) CHECK(lr_at(cfg, s) <= lr_at(cfg, s - 1));
}

TEST_CASE("adam takes a signed unit-scaled first step") {
  TrackerConfig tcfg;
  ModelParams p = init_params(1, tcfg);
  ModelParams before = clone_params(p, false);
  NamedGrads g;
  for (const auto& [name, t] : p.tensors) {
    g[name].assign(static_cast<size_t>(t.numel()), 0.0);
  }
  g["head.b"] = {3.0, -7.0};  // magnitudes cancel in Adam's first step
  AdamState st;
  adam_apply(p, g, st, 0.01);
  double d0 = p.at("head.b").at(0) - before.at("head.b").at(0);
  double d1 = p.at("head.b").at(1) - before.at("head.b").at(1);
  CHECK(d0 == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(d1 == doctest::Approx(0.01).epsilon(1e-6));
  // Zero-gradient parameters stay put on the first step.
  CHECK(p.at("head.w").data() == before.at("head.w").data());
}

TEST_CASE("refine lr multiplier scales only the refinement block") {
  TrackerConfig tcfg;
  ModelParams p = init_params(1, tcfg);
  ModelParams q = clone_params(p, true);
  NamedGrads g;
  for (const auto& [name, t] : p.tensors) {
    g[name].assign(static_cast<size_t>(t.numel()), 1.0);
  }
  AdamState sa, sb;
  adam_apply(p, g, sa, 0.01, 1.0);
  adam_apply(q, g, sb, 0.01, 0.5);
  for (const auto& [name, t] : p.tensors) {
    double dp = std::fabs(t.at(0) - init_params(1, tcfg).at(name).at(0));
    double dq = std::fabs(q.at(name).at(0) - init_params(1, tcfg).at(name).at(0));
    if (name.rfind("refine.", 0) == 0) {
      CHECK(dq == doctest::Approx(0.5 * dp).epsilon(1e-9));
    } else {
      CHECK(dq == doctest::Approx(dp).epsilon(1e-12));
    }
  }
}

TEST_CASE("ema update follows the convex combination exactly") {
  TrackerConfig tcfg;
  ModelParams student = init_params(2, tcfg);
  ModelParams teacher = clone_params(init_params(3, tcfg), false);
  ModelParams t0 = clone_params(teacher, false);

  SUBCASE("decay 1 freezes the teacher") {
    ema_update(teacher, student, 1.0);
    for (const auto& [name, t] : teacher.tensors) {
      CHECK(t.data() == t0.at(name).data());
    }
  }
  SUBCASE("decay 0 copies the student") {
    ema_update(teacher, student, 0.0);
    for (const auto& [name, t] : teacher.tensors) {
      CHECK(t.data() == student.at(name).data());
    }
  }
  SUBCASE("repeated updates converge geometrically") {
    const double decay = 0.99;
    double gap0 =
        t0.at("backbone.conv1.w").at(0) - student.at("backbone.conv1.w").at(0);
    for (int i = 0; i < 100; ++i) ema_update(teacher, student, decay);
    double gap = teacher.at("backbone.conv1.w").at(0) -
                 student.at("backbone.conv1.w").at(0);
    CHECK(gap / gap0 == doctest::Approx(std::pow(decay, 100)).epsilon(1e-9));
    // Consecutive gap ratio equals the decay itself.
    double before = teacher.at("head.w").at(0) - student.at("head.w").at(0);
    ema_update(teacher, student, decay);
    double after = teacher.at("head.w").at(0) - student.at("head.w").at(0);
    CHECK(after / before == doctest::Approx(decay).epsilon(1e-9));
  }
}

TEST_CASE("teacher query sampling is uniform over the video volume") {
  Rng rng(11);
  auto qs = sample_teacher_queries(4, 32, 64, 20000, rng);
  REQUIRE(qs.size() == 20000);
  int frame_counts[4] = {0, 0, 0, 0};
  double sx = 0.0, sy = 0.0;
  for (const auto& q : qs) {
    REQUIRE(q.t >= 0);
    REQUIRE(q.t < 4);
    REQUIRE(q.q.x >= 0.0);
    REQUIRE(q.q.x < 64.0);
    REQUIRE(q.q.y >= 0.0);
    REQUIRE(q.q.y < 32.0);
    ++frame_counts[q.t];
    sx += q.q.x;
    sy += q.q.y;
  }
  // chi^2 over 4 frame bins, 3 dof, alpha ~ 1e-3 -> 16.27.
  double chi2 = 0.0;
  for (int c : frame_counts) {
    double e = 20000.0 / 4.0;
    chi2 += (c - e) * (c - e) / e;
  }
  CHECK(chi2 < 16.27);
  CHECK(sx / 20000 == doctest::Approx(32.0).epsilon(0.02));
  CHECK(sy / 20000 == doctest::Approx(16.0).epsilon(0.02));
}

TEST_CASE("student query reuse probability is honored") {
  PseudoLabels lab;
  lab.p = {{1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}, {4.0, 4.0}};
  lab.o = {0, 0, 1, 0};
  lab.u = {0, 0, 0, 0};
  QueryPoint q1{{1.0, 1.0}, 0};
  Rng rng(13);
  SUBCASE("prob 1 always returns q1") {
    for (int i = 0; i < 100; ++i) {
      QueryPoint q = sample_student_query(lab, q1, 1.0, rng);
      CHECK(q.t == 0);
    }
  }
  SUBCASE("prob 0 never returns q1 when alternatives exist") {
    for (int i = 0; i < 100; ++i) {
      QueryPoint q = sample_student_query(lab, q1, 0.0, rng);
      CHECK(q.t != 0);
      CHECK(q.t != 2);  // occluded frames are not pseudo-visible
      CHECK(q.q.x == doctest::Approx(lab.p[q.t].x));
    }
  }
  SUBCASE("prob one-half over many draws") {
    int same = 0;
    for (int i = 0; i < 10000; ++i) {
      if (sample_student_query(lab, q1, 0.5, rng).t == 0) ++same;
    }
    CHECK(same / 10000.0 == doctest::Approx(0.5).epsilon(0.04));
  }
  SUBCASE("all-occluded labels fall back to q1") {
    PseudoLabels occ = lab;
    occ.o = {1, 1, 1, 1};
    QueryPoint q = sample_student_query(occ, q1, 0.0, rng);
    CHECK(q.t == 0);
  }
}

TEST_CASE("invert_points_tensor undoes the per-frame affine map") {
  Rng rng(17);
  AffineSequence seq = sample_affine(4, 32, 32, rng);
  std::vector<double> pts;
  std::vector<XY> src;
  for (int t = 0; t < 4; ++t) {
    XY p{rng.uniform(2.0, 30.0), rng.uniform(2.0, 30.0)};
    src.push_back(p);
    XY w = apply_point(seq, p, t);
    pts.push_back(w.x);
    pts.push_back(w.y);
  }
  Tensor warped = Tensor::from({4, 2}, pts, true);
  Tensor back = invert_points_tensor(seq, warped);
  for (int t = 0; t < 4; ++t) {
    CHECK(back.at(2 * t) == doctest::Approx(src[t].x).epsilon(1e-9));
    CHECK(back.at(2 * t + 1) == doctest::Approx(src[t].y).epsilon(1e-9));
  }
  // Differentiable: gradient reaches the warped positions.
  GradMap g = backward(sum(back));
  CHECK(g.find(warped.raw()) != nullptr);
}

TEST_CASE("training is deterministic and advances both optimizers") {
  std::vector<Clip> labeled = {make_labeled_clip(1), make_labeled_clip(2)};
  std::vector<Clip> unlabeled = {make_unlabeled_clip(3)};
  std::vector<Clip> eval_clips = {make_labeled_clip(4)};
  TrainConfig cfg = tiny_config();
  TrainResult a = train(cfg, labeled, unlabeled, eval_clips);
  TrainResult b = train(cfg, labeled, unlabeled, eval_clips);
  CHECK(a.skipped_steps == 0);
  CHECK(a.opt_sup.step == 2);
  CHECK(a.opt_ssl.step == 2);
  for (const auto& [name, t] : a.student.tensors) {
    for (int64_t i = 0; i < t.numel(); ++i) {
      CHECK(std::fabs(t.at(i) - b.student.at(name).at(i)) < 1e-6);
    }
  }
  CHECK(a.last_sup_loss == doctest::Approx(b.last_sup_loss).epsilon(1e-9));
  CHECK(!a.log_lines.empty());
  // The teacher moved off its init but is not the student.
  bool teacher_differs = false;
  for (const auto& [name, t] : a.teacher.tensors) {
    for (int64_t i = 0; i < t.numel(); ++i) {
      if (t.at(i) != a.student.at(name).at(i)) teacher_differs = true;
    }
  }
  CHECK(teacher_differs);
}

TEST_CASE("disabling ssl leaves the ssl optimizer untouched") {
  std::vector<Clip> labeled = {make_labeled_clip(5)};
  std::vector<Clip> eval_clips = {make_labeled_clip(6)};
  TrainConfig cfg = tiny_config();
  cfg.ssl_enabled = false;
  TrainResult r = train(cfg, labeled, {}, eval_clips);
  CHECK(r.opt_sup.step == 2);
  CHECK(r.opt_ssl.step == 0);
}

TEST_CASE("multi-threaded training matches single-threaded bitwise") {
  std::vector<Clip> labeled = {make_labeled_clip(7), make_labeled_clip(8)};
  std::vector<Clip> unlabeled = {make_unlabeled_clip(9),
                                 make_unlabeled_clip(10)};
  std::vector<Clip> eval_clips = {make_labeled_clip(11)};
  TrainConfig cfg = tiny_config();
  cfg.b_ssl = 2;
  TrainResult a = train(cfg, labeled, unlabeled, eval_clips);
  cfg.threads = 4;
  TrainResult b = train(cfg, labeled, unlabeled, eval_clips);
  for (const auto& [name, t] : a.student.tensors) {
    CHECK(t.data() == b.student.at(name).data());
  }
}

TEST_CASE("siamese mode trains and keeps teacher equal to nothing stale") {
  std::vector<Clip> labeled = {make_labeled_clip(12)};
  std::vector<Clip> unlabeled = {make_unlabeled_clip(13)};
  std::vector<Clip> eval_clips = {make_labeled_clip(14)};
  TrainConfig cfg = tiny_config();
  cfg.siamese_mode = true;
  cfg.filter = SslFilter::kNone;
  TrainResult r = train(cfg, labeled, unlabeled, eval_clips);
  CHECK(r.skipped_steps == 0);
  CHECK(r.opt_ssl.step == 2);
}

TEST_CASE("filter names round-trip") {
  CHECK(ssl_filter_from_string("cycle") == SslFilter::kCycle);
  CHECK(ssl_filter_from_string("confidence") == SslFilter::kConfidence);
  CHECK(ssl_filter_from_string("none") == SslFilter::kNone);
  CHECK(to_string(SslFilter::kCycle) == "cycle");
  CHECK_THROWS_AS(ssl_filter_from_string("bogus"), Error);
}

TEST_CASE("evaluation runs on held-out clips and reports sane numbers") {
  std::vector<Clip> eval_clips = {make_labeled_clip(15)};
  TrackerConfig tcfg;
  ModelParams p = init_params(21, tcfg);
  MetricsReport r = evaluate_clips(p, eval_clips, QueryMode::kStrided);
  CHECK(r.points > 0);
  CHECK(r.aj >= 0.0);
  CHECK(r.aj <= 1.0);
  CHECK(r.oa >= 0.0);
  CHECK(r.oa <= 1.0);
  CHECK(r.delta_avg >= 0.0);
  CHECK(r.delta_avg <= 1.0);
  // Parallel evaluation agrees with serial.
  MetricsReport r4 = evaluate_clips(p, eval_clips, QueryMode::kStrided, 4);
  CHECK(r4.aj == doctest::Approx(r.aj).epsilon(1e-12));
}
