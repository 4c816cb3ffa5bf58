// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "wildground/metrics.hpp"
#include "wildground/rng.hpp"

using namespace wg;

namespace {
std::vector<EvalRecord> records_from_ious(const std::vector<double>& ious) {
  std::vector<EvalRecord> out;
  for (std::size_t i = 0; i < ious.size(); ++i) {
    EvalRecord r;
    r.scene_id = static_cast<std::int64_t>(i);
    r.iou = ious[i];
    out.push_back(r);
  }
  return out;
}

Box3D random_box(Rng& rng) {
  return Box3D{rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-1, 1),
               rng.uniform(0.5, 2),  rng.uniform(0.5, 2), rng.uniform(0.5, 2),
               rng.uniform(-1.5, 1.5)};
}

// Exhaustive maximum-cardinality one-to-one matching at threshold thr.
int best_matching(const std::vector<Box3D>& preds, const std::vector<Box3D>& gts, double thr,
                  std::vector<char>& g_used, std::size_t pi = 0) {
  if (pi == preds.size()) return 0;
  int best = best_matching(preds, gts, thr, g_used, pi + 1);  // leave pred pi unmatched
  for (std::size_t gi = 0; gi < gts.size(); ++gi) {
    if (g_used[gi]) continue;
    if (rotated_iou_3d(preds[pi], gts[gi]) < thr) continue;
    g_used[gi] = 1;
    best = std::max(best, 1 + best_matching(preds, gts, thr, g_used, pi + 1));
    g_used[gi] = 0;
  }
  return best;
}
}  // namespace

TEST_CASE("accuracy counts hits at or above the threshold") {
  auto recs = records_from_ious({0.3, 0.6});
  CHECK(accuracy_at(recs, 0.5) == 0.5);
  CHECK(accuracy_at(records_from_ious({1.0, 1.0, 1.0}), 0.9) == 1.0);
  // equality counts as success
  CHECK(accuracy_at(records_from_ious({0.5}), 0.5) == 1.0);
  CHECK(accuracy_at(records_from_ious({0.4999}), 0.5) == 0.0);
  CHECK_THROWS_AS(accuracy_at({}, 0.5), ConfigError);
}

TEST_CASE("accuracy is non-increasing in the threshold") {
  Rng rng(3);
  std::vector<double> ious;
  for (int i = 0; i < 40; ++i) ious.push_back(rng.uniform(0, 1));
  auto recs = records_from_ious(ious);
  double prev = 1.0;
  for (double thr = 0.0; thr <= 1.0; thr += 0.05) {
    double acc = accuracy_at(recs, thr);
    CHECK(acc <= prev);
    prev = acc;
  }
}

TEST_CASE("mean iou matches hand values and a two-pass oracle") {
  CHECK(mean_iou(records_from_ious({0.2, 0.4})) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(mean_iou(records_from_ious({0.73})) == 0.73);
  CHECK_THROWS_AS(mean_iou({}), ConfigError);

  Rng rng(9);
  std::vector<double> ious;
  for (int i = 0; i < 257; ++i) ious.push_back(rng.uniform(0, 1));
  // two-pass compensated mean as the oracle
  double sum = 0;
  for (double v : ious) sum += v;
  const double m1 = sum / static_cast<double>(ious.size());
  double resid = 0;
  for (double v : ious) resid += v - m1;
  const double oracle = m1 + resid / static_cast<double>(ious.size());
  CHECK(mean_iou(records_from_ious(ious)) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("summaries are invariant to record order and keep acc monotone") {
  Rng rng(17);
  std::vector<double> ious;
  for (int i = 0; i < 30; ++i) ious.push_back(rng.uniform(0, 1));
  auto recs = records_from_ious(ious);
  for (auto& r : recs) {
    r.pred = random_box(rng);
    r.gt = r.pred;  // PR path needs concrete boxes; identical keeps it simple
  }
  EvalSummary a = summarize(recs);
  auto shuffled = recs;
  rng.shuffle(shuffled);
  EvalSummary b = summarize(shuffled);
  CHECK(a.acc_025 == b.acc_025);
  CHECK(a.acc_05 == b.acc_05);
  CHECK(a.miou == doctest::Approx(b.miou).epsilon(1e-12));
  CHECK(a.precision_025 == b.precision_025);
  CHECK(a.recall_05 == b.recall_05);
  CHECK(a.acc_05 <= a.acc_025);
  CHECK(a.n_samples == 30);
  CHECK(a.pr_valid);
}

TEST_CASE("detection precision and recall are perfect when preds equal gts") {
  Rng rng(5);
  std::vector<std::vector<Box3D>> scenes;
  for (int s = 0; s < 4; ++s) {
    std::vector<Box3D> boxes;
    for (int b = 0; b < s + 1; ++b) boxes.push_back(random_box(rng));
    scenes.push_back(boxes);
  }
  PrResult pr = detection_pr(scenes, scenes, 0.5);
  CHECK(pr.precision == 1.0);
  CHECK(pr.recall == 1.0);
  CHECK(pr.valid);
}

TEST_CASE("no predictions gives zero recall and a flagged precision") {
  std::vector<std::vector<Box3D>> preds = {{}, {}};
  std::vector<std::vector<Box3D>> gts = {{Box3D{0, 0, 0, 1, 1, 1, 0}},
                                         {Box3D{2, 2, 0, 1, 1, 1, 0}}};
  PrResult pr = detection_pr(preds, gts, 0.25);
  CHECK(pr.recall == 0.0);
  CHECK(pr.precision == 0.0);
  CHECK_FALSE(pr.valid);
  CHECK_THROWS_AS(detection_pr(preds, {{}}, 0.25), ShapeError);
}

TEST_CASE("greedy matching attains the optimal cardinality on small scenes") {
  Rng rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t np = 1 + rng.uniform_int(3);
    const std::size_t ng = 1 + rng.uniform_int(3);
    std::vector<Box3D> preds, gts;
    for (std::size_t i = 0; i < np; ++i) preds.push_back(random_box(rng));
    for (std::size_t i = 0; i < ng; ++i) gts.push_back(random_box(rng));
    // seed some deliberate overlaps so matches actually occur
    for (std::size_t i = 0; i < std::min(np, ng); ++i) {
      if (!rng.bernoulli(0.7)) continue;
      gts[i] = preds[i];
      gts[i].x += rng.uniform(-0.3, 0.3);
      gts[i].y += rng.uniform(-0.3, 0.3);
    }
    const double thr = 0.25;
    PrResult pr = detection_pr({preds}, {gts}, thr);
    std::vector<char> used(gts.size(), 0);
    const int optimal = best_matching(preds, gts, thr, used);
    const double matched = pr.precision * static_cast<double>(preds.size());
    CHECK(matched == doctest::Approx(static_cast<double>(optimal)).epsilon(1e-9));
  }
}
