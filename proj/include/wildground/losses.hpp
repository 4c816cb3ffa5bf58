// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "wildground/geometry.hpp"
#include "wildground/model.hpp"

namespace wg {

struct LossWeights {
  double alpha = 8.0;   // focal confidence
  double beta = 1.0;    // GIoU
  double gamma = 5.0;   // L1 box
  double lambda = 1.0;  // contrastive
  double mu = 0.01;     // soft token
};

// The matched (positive) query for the scene's single ground truth, with the
// winning cost split for diagnostics.
struct MatchResult {
  std::int64_t query = 0;
  double l1_cost = 0, giou_cost = 0, span_cost = 0;
  double total_cost() const;
};

struct LossBreakdown {
  Tensor l_s, l_giou, l_box, l_c, l_st;
  Tensor total;
};

// Binary focal loss over per-seed confidences (mean over seeds). Scores are
// probabilities in (0,1); gamma_f=0 degenerates to alpha-weighted BCE.
Tensor focal_confidence_loss(const Tensor& scores, const std::vector<bool>& target_mask,
                             double gamma_f = 2.0, double alpha_f = 0.25);

// Exhaustive single-target matching: argmin over queries of
// gamma*L1 + beta*(1-GIoU) + lambda_m*spanCE, ties to the lower index.
MatchResult match(const Predictions& preds, const Box3D& gt, const TokenSpan& gt_span,
                  const LossWeights& w = {}, double lambda_m = 2.0);

// (L_box, L_giou) for the matched query: mean absolute error over the six box
// parameters, and 1 - axis-aligned GIoU.
std::pair<Tensor, Tensor> box_losses(const Tensor& box_params, std::int64_t query,
                                     const Box3D& gt);

// Symmetric InfoNCE between projected queries and span-mean projected words.
// The matched query's positive is the target span; every other query's
// positive is the terminal span; all other spans are negatives.
Tensor contrastive_loss(const Tensor& query_proj, const Tensor& word_proj,
                        const MatchResult& matched, const std::vector<TokenSpan>& spans,
                        double temperature);

// Cross-entropy between each query's span distribution and its target:
// uniform over the ground-truth span for the matched query, the terminal
// span otherwise; mean over queries.
Tensor soft_token_loss(const Tensor& span_logits, const MatchResult& matched,
                       const TokenSpan& gt_span, const std::vector<TokenSpan>& spans);

// Exact left-to-right weighted sum: alpha*L_s + beta*L_giou + gamma*L_box +
// lambda*L_c + mu*L_st.
Tensor total_loss(const Tensor& l_s, const Tensor& l_giou, const Tensor& l_box, const Tensor& l_c,
                  const Tensor& l_st, const LossWeights& w);

// Full objective for one scene: builds the seed mask from the ground-truth
// box, matches, and assembles every term.
LossBreakdown compute_losses(const Predictions& preds, const Box3D& gt_box, const LossWeights& w,
                             double temperature, MatchResult* match_out = nullptr);

}  // namespace wg
