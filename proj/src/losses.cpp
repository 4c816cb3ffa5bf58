// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#include "wildground/losses.hpp"

#include <algorithm>
#include <cmath>

#include "wildground/errors.hpp"
#include "wildground/ops.hpp"

namespace wg {

double MatchResult::total_cost() const { return l1_cost + giou_cost + span_cost; }

namespace {
// Smooth guard keeping probabilities away from exact 0/1 so logs stay finite;
// affine in p, so gradients keep flowing even at saturation.
Tensor guard_prob(const Tensor& p) {
  constexpr double kEps = 1e-12;
  return add_scalar(mul_scalar(p, 1.0 - 2.0 * kEps), kEps);
}

Tensor focal_modulation(const Tensor& p, double gamma_f) {
  if (gamma_f == 0.0) return Tensor::full(p.shape(), 1.0);
  if (gamma_f == 2.0) return mul(p, p);
  return exp_op(mul_scalar(log_op(p), gamma_f));
}
}  // namespace

Tensor focal_confidence_loss(const Tensor& scores, const std::vector<bool>& target_mask,
                             double gamma_f, double alpha_f) {
  const std::int64_t s = scores.size();
  if (static_cast<std::int64_t>(target_mask.size()) != s)
    throw ShapeError("focal loss: mask size must equal score count");
  std::vector<double> mask(static_cast<std::size_t>(s));
  for (std::int64_t i = 0; i < s; ++i) mask[static_cast<std::size_t>(i)] = target_mask[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  Tensor m = Tensor::from(scores.shape(), std::move(mask));
  Tensor pos_w = mul_scalar(m, alpha_f);
  Tensor neg_w = mul_scalar(sub(Tensor::full(scores.shape(), 1.0), m), 1.0 - alpha_f);

  Tensor p = guard_prob(scores);
  Tensor one_minus_p = sub(Tensor::full(p.shape(), 1.0), p);
  Tensor pos_term = mul(pos_w, mul(focal_modulation(one_minus_p, gamma_f), log_op(p)));
  Tensor neg_term = mul(neg_w, mul(focal_modulation(p, gamma_f), log_op(one_minus_p)));
  return mul_scalar(mean_all(add(pos_term, neg_term)), -1.0);
}

namespace {
// Plain-double span cross-entropy of one logits row against a uniform target
// over [span.begin, span.end). Used by the matcher, which makes a discrete
// decision and needs no gradients.
double span_ce_row(const Tensor& span_logits, std::int64_t row, const TokenSpan& span) {
  const std::int64_t m = span_logits.cols();
  double mx = -1e300;
  for (std::int64_t c = 0; c < m; ++c) mx = std::max(mx, span_logits.at(row, c));
  double lse = 0;
  for (std::int64_t c = 0; c < m; ++c) lse += std::exp(span_logits.at(row, c) - mx);
  lse = mx + std::log(lse);
  double ce = 0;
  const double inv = 1.0 / static_cast<double>(span.end - span.begin);
  for (std::int64_t c = span.begin; c < span.end; ++c)
    ce -= inv * (span_logits.at(row, c) - lse);
  return ce;
}
}  // namespace

MatchResult match(const Predictions& preds, const Box3D& gt, const TokenSpan& gt_span,
                  const LossWeights& w, double lambda_m) {
  const std::int64_t n = preds.box_params.rows();
  if (n == 0) throw ConfigError("match: no queries");
  MatchResult best;
  double best_cost = 1e300;
  for (std::int64_t i = 0; i < n; ++i) {
    Box3D b = preds.boxes[static_cast<std::size_t>(i)];
    const double l1 = (std::abs(b.x - gt.x) + std::abs(b.y - gt.y) + std::abs(b.z - gt.z) +
                       std::abs(b.l - gt.l) + std::abs(b.w - gt.w) + std::abs(b.h - gt.h)) /
                      6.0;
    const double giou_cost = 1.0 - aabb_giou(b, gt);
    const double span_ce = span_ce_row(preds.span_logits, i, gt_span);
    const double cost = w.gamma * l1 + w.beta * giou_cost + lambda_m * span_ce;
    if (cost < best_cost) {
      best_cost = cost;
      best.query = i;
      best.l1_cost = w.gamma * l1;
      best.giou_cost = w.beta * giou_cost;
      best.span_cost = lambda_m * span_ce;
    }
  }
  return best;
}

std::pair<Tensor, Tensor> box_losses(const Tensor& box_params, std::int64_t query,
                                     const Box3D& gt) {
  Tensor row = gather_rows(box_params, {query});  // 1×6
  Tensor gt_row = Tensor::from({1, 6}, {gt.x, gt.y, gt.z, gt.l, gt.w, gt.h});
  Tensor l_box = mean_all(abs_op(sub(row, gt_row)));
  // sum_all collapses the 1x1 GIoU to the scalar shape the other terms use
  Tensor giou = sum_all(aabb_giou_t(slice_cols(row, 0, 3), slice_cols(row, 3, 6), gt));
  Tensor l_giou = sub(Tensor::full({1}, 1.0), giou);
  return {l_box, l_giou};
}

Tensor contrastive_loss(const Tensor& query_proj, const Tensor& word_proj,
                        const MatchResult& matched, const std::vector<TokenSpan>& spans,
                        double temperature) {
  if (spans.empty()) throw ConfigError("contrastive loss: terminal span missing");
  const std::int64_t n = query_proj.rows();
  const auto k = static_cast<std::int64_t>(spans.size());
  const std::int64_t target_span = 0;
  const std::int64_t terminal_span = k - 1;

  std::vector<Tensor> reps;
  for (const auto& span : spans) {
    std::vector<std::int64_t> idx;
    for (std::int64_t i = span.begin; i < span.end; ++i) idx.push_back(i);
    reps.push_back(mean_rows(gather_rows(word_proj, idx)));
  }
  Tensor span_reps = l2_normalize_rows(concat_rows(reps));            // K×D
  Tensor logits = mul_scalar(matmul(query_proj, transpose(span_reps)),
                             1.0 / temperature);                      // N×K

  // positives: matched query -> target span; all others -> terminal span
  std::vector<double> pos(static_cast<std::size_t>(n * k), 0.0);
  std::vector<std::int64_t> assigned(static_cast<std::size_t>(n), terminal_span);
  assigned[static_cast<std::size_t>(matched.query)] = target_span;
  for (std::int64_t i = 0; i < n; ++i)
    pos[static_cast<std::size_t>(i * k + assigned[static_cast<std::size_t>(i)])] = 1.0;
  Tensor pos_mask = Tensor::from({n, k}, std::move(pos));
  Tensor ce_q = mul_scalar(sum_all(mul(pos_mask, log_softmax_rows(logits))),
                           -1.0 / static_cast<double>(n));

  // reverse direction: each span with assignees, softmax over queries,
  // multi-positive mean within the span's query set
  std::vector<std::int64_t> span_count(static_cast<std::size_t>(k), 0);
  for (std::int64_t i = 0; i < n; ++i) ++span_count[static_cast<std::size_t>(assigned[static_cast<std::size_t>(i)])];
  std::int64_t active = 0;
  std::vector<double> rev(static_cast<std::size_t>(k * n), 0.0);
  for (std::int64_t s = 0; s < k; ++s) {
    if (span_count[static_cast<std::size_t>(s)] == 0) continue;
    ++active;
    for (std::int64_t i = 0; i < n; ++i)
      if (assigned[static_cast<std::size_t>(i)] == s)
        rev[static_cast<std::size_t>(s * n + i)] =
            1.0 / static_cast<double>(span_count[static_cast<std::size_t>(s)]);
  }
  Tensor rev_mask = Tensor::from({k, n}, std::move(rev));
  Tensor ce_s = mul_scalar(sum_all(mul(rev_mask, log_softmax_rows(transpose(logits)))),
                           -1.0 / static_cast<double>(active));

  return mul_scalar(add(ce_q, ce_s), 0.5);
}

Tensor soft_token_loss(const Tensor& span_logits, const MatchResult& matched,
                       const TokenSpan& gt_span, const std::vector<TokenSpan>& spans) {
  if (spans.empty()) throw ConfigError("soft token loss: terminal span missing");
  const std::int64_t n = span_logits.rows();
  const std::int64_t m = span_logits.cols();
  const TokenSpan terminal = spans.back();
  std::vector<double> target(static_cast<std::size_t>(n * m), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    const TokenSpan& span = i == matched.query ? gt_span : terminal;
    const double mass = 1.0 / static_cast<double>(span.end - span.begin);
    for (std::int64_t c = span.begin; c < span.end; ++c)
      target[static_cast<std::size_t>(i * m + c)] = mass;
  }
  Tensor t = Tensor::from({n, m}, std::move(target));
  return mul_scalar(sum_all(mul(t, log_softmax_rows(span_logits))),
                    -1.0 / static_cast<double>(n));
}

Tensor total_loss(const Tensor& l_s, const Tensor& l_giou, const Tensor& l_box, const Tensor& l_c,
                  const Tensor& l_st, const LossWeights& w) {
  Tensor total = mul_scalar(l_s, w.alpha);
  total = add(total, mul_scalar(l_giou, w.beta));
  total = add(total, mul_scalar(l_box, w.gamma));
  total = add(total, mul_scalar(l_c, w.lambda));
  total = add(total, mul_scalar(l_st, w.mu));
  return total;
}

LossBreakdown compute_losses(const Predictions& preds, const Box3D& gt_box, const LossWeights& w,
                             double temperature, MatchResult* match_out) {
  std::vector<std::array<float, 3>> seeds;
  seeds.reserve(preds.seed_positions.size());
  for (const auto& p : preds.seed_positions)
    seeds.push_back({static_cast<float>(p[0]), static_cast<float>(p[1]),
                     static_cast<float>(p[2])});
  const std::vector<bool> mask = points_in_box(seeds, gt_box);

  const TokenSpan gt_span = preds.spans.front();
  const MatchResult matched = match(preds, gt_box, gt_span, w);
  if (match_out) *match_out = matched;

  LossBreakdown out;
  out.l_s = focal_confidence_loss(preds.queries.scores, mask);
  std::tie(out.l_box, out.l_giou) = box_losses(preds.box_params, matched.query, gt_box);
  out.l_c = contrastive_loss(preds.query_proj, preds.word_proj, matched, preds.spans, temperature);
  out.l_st = soft_token_loss(preds.span_logits, matched, gt_span, preds.spans);
  out.total = total_loss(out.l_s, out.l_giou, out.l_box, out.l_c, out.l_st, w);
  return out;
}

}  // namespace wg
