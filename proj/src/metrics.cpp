// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#include "wildground/metrics.hpp"

#include <algorithm>

#include "wildground/errors.hpp"

namespace wg {

double accuracy_at(const std::vector<EvalRecord>& records, double thr) {
  if (records.empty()) throw ConfigError("accuracy_at: empty record set");
  std::int64_t hits = 0;
  for (const auto& r : records)
    if (r.iou >= thr) ++hits;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

double mean_iou(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw ConfigError("mean_iou: empty record set");
  double sum = 0;
  for (const auto& r : records) sum += r.iou;
  return sum / static_cast<double>(records.size());
}

PrResult detection_pr(const std::vector<std::vector<Box3D>>& preds,
                      const std::vector<std::vector<Box3D>>& gts, double thr) {
  if (preds.size() != gts.size())
    throw ShapeError("detection_pr: prediction/ground-truth scene counts differ");
  std::int64_t matched = 0, total_preds = 0, total_gts = 0;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    const auto& p = preds[s];
    const auto& g = gts[s];
    total_preds += static_cast<std::int64_t>(p.size());
    total_gts += static_cast<std::int64_t>(g.size());

    struct Pair {
      double iou;
      std::size_t pi, gi;
    };
    std::vector<Pair> pairs;
    for (std::size_t pi = 0; pi < p.size(); ++pi)
      for (std::size_t gi = 0; gi < g.size(); ++gi) {
        const double iou = rotated_iou_3d(p[pi], g[gi]);
        if (iou >= thr) pairs.push_back({iou, pi, gi});
      }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      if (a.iou != b.iou) return a.iou > b.iou;
      if (a.pi != b.pi) return a.pi < b.pi;
      return a.gi < b.gi;
    });
    std::vector<char> p_used(p.size(), 0), g_used(g.size(), 0);
    for (const auto& pr : pairs) {
      if (p_used[pr.pi] || g_used[pr.gi]) continue;
      p_used[pr.pi] = 1;
      g_used[pr.gi] = 1;
      ++matched;
    }
  }
  PrResult out;
  out.valid = total_preds > 0;
  out.precision = total_preds > 0 ? static_cast<double>(matched) / static_cast<double>(total_preds) : 0.0;
  out.recall = total_gts > 0 ? static_cast<double>(matched) / static_cast<double>(total_gts) : 0.0;
  return out;
}

EvalSummary summarize(const std::vector<EvalRecord>& records) {
  EvalSummary s;
  s.n_samples = static_cast<std::int64_t>(records.size());
  s.acc_025 = accuracy_at(records, 0.25);
  s.acc_05 = accuracy_at(records, 0.5);
  s.miou = mean_iou(records);

  std::vector<std::vector<Box3D>> preds, gts;
  preds.reserve(records.size());
  gts.reserve(records.size());
  for (const auto& r : records) {
    preds.push_back({r.pred});
    gts.push_back({r.gt});
  }
  PrResult pr25 = detection_pr(preds, gts, 0.25);
  PrResult pr50 = detection_pr(preds, gts, 0.5);
  s.precision_025 = pr25.precision;
  s.recall_025 = pr25.recall;
  s.precision_05 = pr50.precision;
  s.recall_05 = pr50.recall;
  s.pr_valid = pr25.valid;
  return s;
}

}  // namespace wg
