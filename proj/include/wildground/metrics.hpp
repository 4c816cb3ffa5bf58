// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "wildground/geometry.hpp"

namespace wg {

struct EvalRecord {
  std::int64_t scene_id = 0;
  Box3D pred, gt;
  double iou = 0;  // rotated 3D IoU
};

struct EvalSummary {
  double acc_025 = 0, acc_05 = 0, miou = 0;
  std::int64_t n_samples = 0;
  double precision_025 = 0, recall_025 = 0;
  double precision_05 = 0, recall_05 = 0;
  bool pr_valid = false;  // false when no predictions existed
};

// Fraction of records with iou >= thr (inclusive). Errors on empty input.
double accuracy_at(const std::vector<EvalRecord>& records, double thr);

// Arithmetic mean of record ious. Errors on empty input.
double mean_iou(const std::vector<EvalRecord>& records);

// Greedy IoU-descending one-to-one matching per scene at threshold thr;
// precision = matched/#preds (0 and flagged when #preds == 0),
// recall = matched/#gts, aggregated over scenes. Returns (P, R, valid).
struct PrResult {
  double precision = 0, recall = 0;
  bool valid = true;
};
PrResult detection_pr(const std::vector<std::vector<Box3D>>& preds,
                      const std::vector<std::vector<Box3D>>& gts, double thr);

EvalSummary summarize(const std::vector<EvalRecord>& records);

}  // namespace wg
