// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "wildground/gradcheck.hpp"
#include "wildground/losses.hpp"
#include "wildground/ops.hpp"

using namespace wg;

namespace {
double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// A small hand-built prediction set: n queries, m words, spans with the
// terminal last. Box params double as the box list (theta 0).
Predictions make_preds(const std::vector<double>& box_values,
                       const std::vector<double>& span_logit_values,
                       const std::vector<double>& query_proj_values,
                       const std::vector<double>& word_proj_values, std::int64_t n,
                       std::int64_t m, std::int64_t d, std::vector<TokenSpan> spans) {
  Predictions p;
  p.box_params = Tensor::from({n, 6}, std::vector<double>(box_values));
  for (std::int64_t i = 0; i < n; ++i) {
    Box3D b;
    b.x = p.box_params.at(i, 0);
    b.y = p.box_params.at(i, 1);
    b.z = p.box_params.at(i, 2);
    b.l = p.box_params.at(i, 3);
    b.w = p.box_params.at(i, 4);
    b.h = p.box_params.at(i, 5);
    p.boxes.push_back(b);
  }
  p.span_logits = Tensor::from({n, m}, std::vector<double>(span_logit_values));
  p.query_proj = l2_normalize_rows(Tensor::from({n, d}, std::vector<double>(query_proj_values)));
  p.word_proj = l2_normalize_rows(Tensor::from({m, d}, std::vector<double>(word_proj_values)));
  p.spans = std::move(spans);
  return p;
}
}  // namespace

TEST_CASE("focal loss is tiny on saturated correct confidences") {
  std::vector<double> s = {logistic(15), logistic(15), logistic(-15), logistic(-15)};
  Tensor scores = Tensor::from({4, 1}, std::move(s));
  Tensor loss = focal_confidence_loss(scores, {true, true, false, false});
  CHECK(loss.item() >= 0.0);
  CHECK(loss.item() < 1e-5);
}

TEST_CASE("focal loss matches the closed form at one-half confidence") {
  const std::int64_t n = 6;
  Tensor scores = Tensor::full({n, 1}, 0.5);
  std::vector<bool> mask = {true, true, true, false, false, false};
  Tensor loss = focal_confidence_loss(scores, mask);
  // per positive seed: -0.25 * 0.5^2 * ln 0.5; per negative: -0.75 * 0.5^2 * ln 0.5
  const double expected = 0.5 * (0.25 * 0.25 * std::log(2.0)) + 0.5 * (0.75 * 0.25 * std::log(2.0));
  CHECK(loss.item() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("focal loss without modulation reduces to weighted binary cross-entropy") {
  Rng rng(21);
  const std::int64_t n = 16;
  Tensor scores = Tensor::uniform({n, 1}, rng, 0.1, 0.9);
  std::vector<bool> mask;
  for (std::int64_t i = 0; i < n; ++i) mask.push_back(rng.bernoulli(0.4));
  Tensor loss = focal_confidence_loss(scores, mask, /*gamma_f=*/0.0, /*alpha_f=*/0.25);
  double bce = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double p = scores.at(i, 0);
    bce -= mask[static_cast<std::size_t>(i)] ? 0.25 * std::log(p) : 0.75 * std::log(1.0 - p);
  }
  bce /= static_cast<double>(n);
  CHECK(loss.item() == doctest::Approx(bce).epsilon(1e-9));
}

TEST_CASE("focal loss accepts an all-negative mask and rejects bad shapes") {
  Tensor scores = Tensor::full({3, 1}, 0.2);
  Tensor loss = focal_confidence_loss(scores, {false, false, false});
  CHECK(loss.item() > 0.0);
  CHECK(std::isfinite(loss.item()));
  CHECK_THROWS_AS(focal_confidence_loss(scores, {true, false}), ShapeError);
}

TEST_CASE("focal loss surfaces non-finite confidences when checks are armed") {
  Tensor scores = Tensor::from({2, 1}, {0.5, std::numeric_limits<double>::quiet_NaN()});
  set_finite_checks(true);
  CHECK_THROWS_AS(focal_confidence_loss(scores, {true, false}), NumericError);
  set_finite_checks(false);
}

TEST_CASE("matcher picks an exact hit and breaks ties low") {
  // all span rows identical so the span term cannot tip the choice
  std::vector<double> logits = {0.3, -0.1, 0.3, -0.1, 0.3, -0.1};
  Box3D gt{1, 2, 0.5, 1, 1, 1, 0};
  Predictions p = make_preds({0, 0, 0, 2, 2, 2,          // far query
                              1, 2, 0.5, 1, 1, 1,        // exact hit
                              5, 5, 5, 1, 1, 1},         // far query
                             logits, {1, 0, 0, 1, 1, 1}, {1, 0, 0, 1}, 3, 2, 2,
                             {{0, 1}, {1, 2}});
  MatchResult m = match(p, gt, p.spans.front());
  CHECK(m.query == 1);
  CHECK(m.l1_cost == 0.0);
  CHECK(m.giou_cost == doctest::Approx(0.0));

  // duplicate the exact hit at a lower index: tie goes to the lower index
  Predictions q = make_preds({1, 2, 0.5, 1, 1, 1, 1, 2, 0.5, 1, 1, 1}, {0.3, -0.1, 0.3, -0.1},
                             {1, 0, 0, 1}, {1, 0, 0, 1}, 2, 2, 2, {{0, 1}, {1, 2}});
  CHECK(match(q, gt, q.spans.front()).query == 0);
}

TEST_CASE("matcher equals an independent exhaustive cost evaluation") {
  Rng rng(31);
  const LossWeights w;
  const double lambda_m = 2.0;
  for (int trial = 0; trial < 25; ++trial) {
    const std::int64_t n = 1 + static_cast<std::int64_t>(rng.uniform_int(6));
    const std::int64_t m = 3;
    std::vector<double> boxes, logits;
    for (std::int64_t i = 0; i < n; ++i) {
      for (int c = 0; c < 3; ++c) boxes.push_back(rng.uniform(-3, 3));
      for (int c = 0; c < 3; ++c) boxes.push_back(rng.uniform(0.5, 2.5));
      for (std::int64_t c = 0; c < m; ++c) logits.push_back(rng.uniform(-2, 2));
    }
    Predictions p = make_preds(boxes, logits, std::vector<double>(static_cast<std::size_t>(n * 2), 1.0),
                               {1, 0, 0, 1, 1, 1}, n, m, 2, {{0, 1}, {1, 2}, {2, 3}});
    Box3D gt{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3),
             rng.uniform(0.5, 2.5), rng.uniform(0.5, 2.5), rng.uniform(0.5, 2.5), 0};

    // independent cost assembly from first principles
    std::int64_t best = -1;
    double best_cost = 1e300;
    const TokenSpan gt_span = p.spans.front();
    for (std::int64_t i = 0; i < n; ++i) {
      const Box3D& b = p.boxes[static_cast<std::size_t>(i)];
      double l1 = (std::abs(b.x - gt.x) + std::abs(b.y - gt.y) + std::abs(b.z - gt.z) +
                   std::abs(b.l - gt.l) + std::abs(b.w - gt.w) + std::abs(b.h - gt.h)) /
                  6.0;
      double lse = 0, mx = -1e300;
      for (std::int64_t c = 0; c < m; ++c) mx = std::max(mx, p.span_logits.at(i, c));
      for (std::int64_t c = 0; c < m; ++c) lse += std::exp(p.span_logits.at(i, c) - mx);
      lse = mx + std::log(lse);
      double ce = 0;
      for (std::int64_t c = gt_span.begin; c < gt_span.end; ++c)
        ce -= (p.span_logits.at(i, c) - lse) / static_cast<double>(gt_span.end - gt_span.begin);
      const double cost = w.gamma * l1 + w.beta * (1.0 - aabb_giou(b, gt)) + lambda_m * ce;
      if (cost < best_cost) {
        best_cost = cost;
        best = i;
      }
    }
    MatchResult got = match(p, gt, gt_span, w, lambda_m);
    CHECK(got.query == best);
    CHECK(got.total_cost() == doctest::Approx(best_cost).epsilon(1e-9));
  }
}

TEST_CASE("box losses vanish on identical boxes") {
  Box3D gt{1, -2, 0.5, 1.5, 1.0, 2.0, 0};
  Tensor params = Tensor::from({1, 6}, {1, -2, 0.5, 1.5, 1.0, 2.0});
  auto [l_box, l_giou] = box_losses(params, 0, gt);
  CHECK(l_box.item() == 0.0);
  CHECK(l_giou.item() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("box losses on offset unit cubes match hand L1 and the geometry oracle") {
  Box3D gt{0, 0, 0, 1, 1, 1, 0};
  Tensor params = Tensor::from({1, 6}, {1, 0, 0, 1, 1, 1});
  auto [l_box, l_giou] = box_losses(params, 0, gt);
  CHECK(l_box.item() == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  Box3D pred{1, 0, 0, 1, 1, 1, 0};
  CHECK(l_giou.item() == doctest::Approx(1.0 - aabb_giou(pred, gt)).epsilon(1e-12));
}

TEST_CASE("box loss gradients flow to all six parameters and match finite differences") {
  Box3D gt{1.0, 0.5, 0.0, 1.0, 1.0, 1.0, 0};
  std::vector<double> vals = {0.7, 0.1, 0.4, 1.1, 0.8, 1.3,   // unmatched row
                              0.3, -0.2, 0.5, 1.4, 0.9, 1.2};  // matched row
  Tensor params = Tensor::from({2, 6}, std::vector<double>(vals));
  params.set_requires_grad(true);
  auto [l_box, l_giou] = box_losses(params, 1, gt);
  Tensor total = add(l_box, l_giou);
  total.backward();
  REQUIRE(params.has_grad());
  const std::vector<double>& grad = params.grad();

  // the unmatched row receives nothing
  for (int c = 0; c < 6; ++c) CHECK(grad[static_cast<std::size_t>(c)] == 0.0);

  const double h = 1e-5;
  for (int c = 0; c < 6; ++c) {
    auto eval = [&](double delta) {
      std::vector<double> v(vals);
      v[static_cast<std::size_t>(6 + c)] += delta;
      Tensor t = Tensor::from({2, 6}, std::move(v));
      auto [lb, lg] = box_losses(t, 1, gt);
      return lb.item() + lg.item();
    };
    const double fd = (eval(h) - eval(-h)) / (2 * h);
    const double an = grad[static_cast<std::size_t>(6 + c)];
    INFO("param ", c);
    CHECK(an == doctest::Approx(fd).epsilon(1e-6));
    CHECK(std::abs(an) > 1e-12);  // every parameter really participates
  }
}

TEST_CASE("contrastive loss is exactly zero for a lone positive pair") {
  Tensor q = Tensor::from({1, 2}, {1, 0});
  Tensor wp = Tensor::from({1, 2}, {1, 0});
  MatchResult m;
  m.query = 0;
  Tensor loss = contrastive_loss(q, wp, m, {{0, 1}}, 0.07);
  CHECK(loss.item() == 0.0);
}

TEST_CASE("contrastive loss punishes a query aligned with a negative span") {
  // words: target span word along x, terminal word along y; the single
  // (matched) query sits exactly on the negative direction
  Tensor wp = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor q = Tensor::from({1, 2}, {0, 1});
  MatchResult m;
  m.query = 0;
  Tensor loss = contrastive_loss(q, wp, m, {{0, 1}, {1, 2}}, 0.07);
  CHECK(loss.item() > std::log(2.0));
}

TEST_CASE("contrastive loss falls as the positive similarity rises") {
  Tensor wp = Tensor::from({2, 3}, {1, 0, 0, 0, 1, 0});
  MatchResult m;
  m.query = 0;
  double prev = 1e300;
  for (double p : {0.1, 0.3, 0.5, 0.7}) {
    // negative similarity pinned at 0.5 while the positive one grows
    Tensor q = Tensor::from({1, 3}, {p, 0.5, std::sqrt(0.75 - p * p)});
    double loss = contrastive_loss(q, wp, m, {{0, 1}, {1, 2}}, 0.07).item();
    CHECK(loss < prev);
    prev = loss;
  }
}

TEST_CASE("contrastive loss requires a span list") {
  Tensor q = Tensor::from({1, 2}, {1, 0});
  MatchResult m;
  CHECK_THROWS_AS(contrastive_loss(q, q, m, {}, 0.07), ConfigError);
}

TEST_CASE("soft token loss equals ln 4 on uniform logits over four words") {
  Tensor logits = Tensor::full({1, 4}, 0.0);
  MatchResult m;
  m.query = 0;
  Tensor loss = soft_token_loss(logits, m, {0, 1}, {{0, 1}, {3, 4}});
  CHECK(loss.item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("soft token loss is tiny on saturated one-hot logits") {
  Tensor logits = Tensor::from({1, 4}, {15, -15, -15, -15});
  MatchResult m;
  m.query = 0;
  Tensor loss = soft_token_loss(logits, m, {0, 1}, {{0, 1}, {3, 4}});
  CHECK(loss.item() >= 0.0);
  CHECK(loss.item() < 1e-5);
}

TEST_CASE("soft token loss bottoms out at the target entropy") {
  // two-word target span: log-target is (-ln 2, -ln 2, -inf); -40 stands in
  // for -inf without tripping finite checks
  Tensor logits = Tensor::from({1, 3}, {-std::log(2.0), -std::log(2.0), -40});
  MatchResult m;
  m.query = 0;
  Tensor loss = soft_token_loss(logits, m, {0, 2}, {{0, 2}, {2, 3}});
  CHECK(loss.item() == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("soft token loss averages matched and terminal rows") {
  // three queries, uniform logits over four words; every row's cross-entropy
  // is ln 4 whether its target is the two-word span or the terminal word
  Tensor logits = Tensor::full({3, 4}, 1.7);
  MatchResult m;
  m.query = 1;
  Tensor loss = soft_token_loss(logits, m, {0, 2}, {{0, 2}, {2, 3}, {3, 4}});
  CHECK(loss.item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("total loss applies the published weights exactly") {
  LossWeights w;
  Tensor zero = Tensor::full({1, 1}, 0.0);
  CHECK(total_loss(zero, zero, zero, zero, zero, w).item() == 0.0);

  Tensor one = Tensor::full({1, 1}, 1.0);
  CHECK(total_loss(one, one, one, one, one, w).item() == 15.01);

  // doubling alpha adds exactly one more L_s contribution
  Tensor l_s = Tensor::full({1, 1}, 0.37);
  LossWeights w2 = w;
  w2.alpha = 2 * w.alpha;
  const double base = total_loss(l_s, one, one, one, one, w).item();
  const double doubled = total_loss(l_s, one, one, one, one, w2).item();
  CHECK(doubled - base == doctest::Approx(w.alpha * 0.37).epsilon(1e-12));
}

TEST_CASE("gradient suite: loss scope within 1e-4") {
  auto reports = run_gradcheck("loss", 3, 1e-4, 5);
  CHECK(reports.size() >= 5);
  for (const auto& r : reports) {
    INFO(r.name, " max rel err ", r.max_rel_err);
    CHECK(r.pass);
  }
}

TEST_CASE("full objective is finite, non-negative, and invariant to unmatched relabeling") {
  // three queries; query 1 is the clear match, queries 0 and 2 are decoys
  std::vector<double> boxes = {4, 4, 4, 1, 1, 1, 1, 2, 0.5, 1, 1, 1, -4, 3, 2, 2, 1, 1};
  std::vector<double> logits = {0.2, -0.4, 0.9, 1.1, 0.3, -0.2, -0.8, 0.5, 0.1};
  std::vector<double> qp = {1, 0.2, 0.1, 0.9, -0.3, 0.4};
  std::vector<double> wp = {0.8, 0.1, -0.2, 0.9, 0.3, 0.3};
  Predictions p = make_preds(boxes, logits, qp, wp, 3, 3, 2, {{0, 1}, {1, 2}, {2, 3}});
  p.queries.scores = Tensor::from({4, 1}, {0.7, 0.2, 0.4, 0.9});
  p.seed_positions = {{1, 2, 0.5}, {5, 5, 5}, {1.2, 2.1, 0.4}, {-3, -3, 0}};
  Box3D gt{1, 2, 0.5, 1, 1, 1, 0.3};

  MatchResult m;
  LossBreakdown parts = compute_losses(p, gt, LossWeights{}, 0.07, &m);
  CHECK(m.query == 1);
  for (const Tensor* t : {&parts.l_s, &parts.l_giou, &parts.l_box, &parts.l_c, &parts.l_st}) {
    CHECK(t->item() >= 0.0);
    CHECK(std::isfinite(t->item()));
  }
  const double expected_total = 8 * parts.l_s.item() + parts.l_giou.item() +
                                5 * parts.l_box.item() + parts.l_c.item() +
                                0.01 * parts.l_st.item();
  CHECK(parts.total.item() == doctest::Approx(expected_total).epsilon(1e-12));

  // swap the two decoy queries (rows 0 and 2 everywhere query-indexed)
  auto swap_rows = [](std::vector<double>& v, std::int64_t cols) {
    for (std::int64_t c = 0; c < cols; ++c) std::swap(v[static_cast<std::size_t>(c)], v[static_cast<std::size_t>(2 * cols + c)]);
  };
  swap_rows(boxes, 6);
  swap_rows(logits, 3);
  swap_rows(qp, 2);
  Predictions p2 = make_preds(boxes, logits, qp, wp, 3, 3, 2, {{0, 1}, {1, 2}, {2, 3}});
  p2.queries.scores = p.queries.scores;
  p2.seed_positions = p.seed_positions;
  LossBreakdown parts2 = compute_losses(p2, gt, LossWeights{}, 0.07);
  CHECK(parts2.total.item() == doctest::Approx(parts.total.item()).epsilon(1e-12));
}
