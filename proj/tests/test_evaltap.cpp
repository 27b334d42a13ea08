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

#include <cmath>

#include <doctest.h>

#include "btap/rng.h"

using namespace btap;

namespace {

GroundTruthTrack vis_track(int T, double x0 = 1.0, double y0 = 1.0) {
  GroundTruthTrack gt;
  for (int t = 0; t < T; ++t) {
    gt.p.push_back({x0 + t, y0});
    gt.o.push_back(0);
  }
  return gt;
}

PredictedTrack perfect(const GroundTruthTrack& gt) {
  PredictedTrack pr;
  pr.p = gt.p;
  pr.occ = gt.o;
  return pr;
}

// Independent re-derivation of the metrics, written as plain per-triple
// loops; compute_metrics must agree with it on random instances.
MetricsReport oracle_metrics(const std::vector<PredictedTrack>& preds,
                             const std::vector<GroundTruthTrack>& gts,
                             const std::vector<int>& qf, QueryMode mode,
                             double res) {
  const int thr[5] = {1, 2, 4, 8, 16};
  MetricsReport r;
  double jac_sum = 0.0, acc_sum = 0.0;
  long scored = 0, occ_ok = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    int T = gts[i].frames();
    for (int t = (mode == QueryMode::kQueryFirst ? qf[i] : 0); t < T; ++t) {
      ++scored;
      if ((gts[i].o[t] != 0) == (preds[i].occ[t] != 0)) ++occ_ok;
    }
  }
  for (int k = 0; k < 5; ++k) {
    long tp = 0, fp = 0, fn = 0, hit = 0, vis = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
      int T = gts[i].frames();
      for (int t = (mode == QueryMode::kQueryFirst ? qf[i] : 0); t < T; ++t) {
        bool gv = gts[i].o[t] == 0, pv = preds[i].occ[t] == 0;
        double d = std::hypot(preds[i].p[t].x - gts[i].p[t].x,
                              preds[i].p[t].y - gts[i].p[t].y);
        bool within = d < thr[k] * res / 256.0;
        if (gv) {
          ++vis;
          if (within) ++hit;
        }
        if (gv && pv && within) {
          ++tp;
        } else if (pv) {
          ++fp;
        } else if (gv) {
          ++fn;
        }
      }
    }
    double acc = vis ? static_cast<double>(hit) / vis : 0.0;
    r.per_threshold[thr[k]] = acc;
    acc_sum += acc;
    jac_sum += (tp + fp + fn) ? static_cast<double>(tp) / (tp + fp + fn) : 1.0;
  }
  r.delta_avg = acc_sum / 5.0;
  r.aj = jac_sum / 5.0;
  r.oa = scored ? static_cast<double>(occ_ok) / scored : 0.0;
  return r;
}

}  // namespace

TEST_CASE("strided queries take visible multiples of five only") {
  GroundTruthTrack gt = vis_track(12);
  auto q = extract_queries(gt, QueryMode::kStrided);
  REQUIRE(q.size() == 3);
  CHECK(q[0].t == 0);
  CHECK(q[1].t == 5);
  CHECK(q[2].t == 10);
  CHECK(q[1].q.x == doctest::Approx(6.0));

  gt.o[5] = 1;  // occluded stride frame is skipped, not snapped
  auto q2 = extract_queries(gt, QueryMode::kStrided);
  REQUIRE(q2.size() == 2);
  CHECK(q2[0].t == 0);
  CHECK(q2[1].t == 10);
}

TEST_CASE("query-first takes the first visible frame") {
  GroundTruthTrack gt = vis_track(8);
  gt.o[0] = gt.o[1] = gt.o[2] = 1;
  auto q = extract_queries(gt, QueryMode::kQueryFirst);
  REQUIRE(q.size() == 1);
  CHECK(q[0].t == 3);

  GroundTruthTrack only7 = vis_track(9);
  for (int t = 0; t < 9; ++t) only7.o[t] = t == 7 ? 0 : 1;
  CHECK(extract_queries(only7, QueryMode::kStrided).empty());
  auto qf = extract_queries(only7, QueryMode::kQueryFirst);
  REQUIRE(qf.size() == 1);
  CHECK(qf[0].t == 7);
}

TEST_CASE("perfect prediction scores 1.0 everywhere") {
  GroundTruthTrack gt = vis_track(6);
  gt.o[4] = 1;
  MetricsReport r = compute_metrics({perfect(gt)}, {gt}, {0},
                                    QueryMode::kStrided, 256.0);
  CHECK(r.aj == doctest::Approx(1.0));
  CHECK(r.delta_avg == doctest::Approx(1.0));
  CHECK(r.oa == doctest::Approx(1.0));
}

TEST_CASE("always-occluded prediction of a visible track scores zero") {
  GroundTruthTrack gt = vis_track(5);
  PredictedTrack pr = perfect(gt);
  for (auto& o : pr.occ) o = 1;
  for (auto& p : pr.p) p.x += 100.0;  // far away too
  MetricsReport r =
      compute_metrics({pr}, {gt}, {0}, QueryMode::kStrided, 256.0);
  CHECK(r.aj == doctest::Approx(0.0));
  CHECK(r.oa == doctest::Approx(0.0));
  CHECK(r.delta_avg == doctest::Approx(0.0));
}

TEST_CASE("empty Jaccard denominators count as perfect") {
  GroundTruthTrack gt = vis_track(3);
  for (auto& o : gt.o) o = 1;
  PredictedTrack pr = perfect(gt);
  MetricsReport r =
      compute_metrics({pr}, {gt}, {0}, QueryMode::kStrided, 256.0);
  CHECK(r.aj == doctest::Approx(1.0));
  CHECK(r.oa == doctest::Approx(1.0));
}

TEST_CASE("hand-scored case: errors 1,3,5,9 at reference resolution") {
  GroundTruthTrack gt = vis_track(4, 20.0, 20.0);
  PredictedTrack pr = perfect(gt);
  const double err[4] = {1.0, 3.0, 5.0, 9.0};
  for (int t = 0; t < 4; ++t) pr.p[t].y += err[t];
  MetricsReport r =
      compute_metrics({pr}, {gt}, {0}, QueryMode::kStrided, 256.0);
  // Strict inequality: error 1 misses threshold 1.
  CHECK(r.per_threshold.at(1) == doctest::Approx(0.0));
  CHECK(r.per_threshold.at(2) == doctest::Approx(0.25));
  CHECK(r.per_threshold.at(4) == doctest::Approx(0.5));
  CHECK(r.per_threshold.at(8) == doctest::Approx(0.75));
  CHECK(r.per_threshold.at(16) == doctest::Approx(1.0));
  CHECK(r.delta_avg == doctest::Approx(0.5));
  // All predictions visible: Jaccard@k = hits/4, so AJ = delta_avg.
  CHECK(r.aj == doctest::Approx(0.5));
  CHECK(r.oa == doctest::Approx(1.0));
}

TEST_CASE("query-first scores only frames at or after the query") {
  GroundTruthTrack gt = vis_track(6);
  PredictedTrack pr = perfect(gt);
  // Corrupt only the frames BEFORE the query: metrics stay perfect.
  pr.p[0].x += 50.0;
  pr.occ[1] = 1;
  MetricsReport r =
      compute_metrics({pr}, {gt}, {2}, QueryMode::kQueryFirst, 256.0);
  CHECK(r.aj == doctest::Approx(1.0));
  CHECK(r.oa == doctest::Approx(1.0));
  MetricsReport all =
      compute_metrics({pr}, {gt}, {2}, QueryMode::kStrided, 256.0);
  CHECK(all.oa < 1.0);
}

TEST_CASE("metrics are invariant to joint rescaling") {
  Rng rng(5);
  GroundTruthTrack gt = vis_track(7, 3.0, 4.0);
  PredictedTrack pr = perfect(gt);
  for (auto& p : pr.p) {
    p.x += rng.uniform(-6.0, 6.0);
    p.y += rng.uniform(-6.0, 6.0);
  }
  MetricsReport a =
      compute_metrics({pr}, {gt}, {0}, QueryMode::kStrided, 256.0);
  GroundTruthTrack gt2 = gt;
  PredictedTrack pr2 = pr;
  for (auto& p : gt2.p) p = {p.x * 2, p.y * 2};
  for (auto& p : pr2.p) p = {p.x * 2, p.y * 2};
  MetricsReport b =
      compute_metrics({pr2}, {gt2}, {0}, QueryMode::kStrided, 512.0);
  CHECK(std::fabs(a.aj - b.aj) < 1e-12);
  CHECK(std::fabs(a.delta_avg - b.delta_avg) < 1e-12);
  CHECK(std::fabs(a.oa - b.oa) < 1e-12);
}

TEST_CASE("per-threshold accuracy is monotone in the threshold") {
  Rng rng(9);
  GroundTruthTrack gt = vis_track(8);
  PredictedTrack pr = perfect(gt);
  for (auto& p : pr.p) p.x += rng.uniform(0.0, 20.0);
  MetricsReport r =
      compute_metrics({pr}, {gt}, {0}, QueryMode::kStrided, 256.0);
  double prev = -1.0;
  for (int thr : {1, 2, 4, 8, 16}) {
    CHECK(r.per_threshold.at(thr) >= prev);
    prev = r.per_threshold.at(thr);
  }
}

TEST_CASE("compute_metrics agrees with a brute-force oracle") {
  Rng rng(1234);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 1 + rng.uniform_int(4);
    int T = 2 + rng.uniform_int(7);
    std::vector<GroundTruthTrack> gts;
    std::vector<PredictedTrack> preds;
    std::vector<int> qf;
    for (int i = 0; i < n; ++i) {
      GroundTruthTrack gt;
      PredictedTrack pr;
      for (int t = 0; t < T; ++t) {
        gt.p.push_back({rng.uniform(0.0, 64.0), rng.uniform(0.0, 64.0)});
        gt.o.push_back(rng.uniform() < 0.3 ? 1 : 0);
        pr.p.push_back({gt.p[t].x + rng.uniform(-12.0, 12.0),
                        gt.p[t].y + rng.uniform(-12.0, 12.0)});
        pr.occ.push_back(rng.uniform() < 0.3 ? 1 : 0);
      }
      gts.push_back(gt);
      preds.push_back(pr);
      qf.push_back(rng.uniform_int(T));
    }
    QueryMode mode =
        trial % 2 ? QueryMode::kQueryFirst : QueryMode::kStrided;
    double res = trial % 3 ? 64.0 : 256.0;
    MetricsReport got = compute_metrics(preds, gts, qf, mode, res);
    MetricsReport want = oracle_metrics(preds, gts, qf, mode, res);
    CHECK(std::fabs(got.aj - want.aj) < 1e-12);
    CHECK(std::fabs(got.delta_avg - want.delta_avg) < 1e-12);
    CHECK(std::fabs(got.oa - want.oa) < 1e-12);
    for (int thr : {1, 2, 4, 8, 16}) {
      CHECK(std::fabs(got.per_threshold.at(thr) -
                      want.per_threshold.at(thr)) < 1e-12);
    }
  }
}
