// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#include "wildground/pointnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wildground/ops.hpp"

namespace wg {

namespace {
double sqdist(const std::array<float, 3>& p, const std::array<double, 3>& c) {
  const double dx = static_cast<double>(p[0]) - c[0];
  const double dy = static_cast<double>(p[1]) - c[1];
  const double dz = static_cast<double>(p[2]) - c[2];
  return dx * dx + dy * dy + dz * dz;
}

std::array<double, 3> at(const PointCloud& pc, std::int64_t i) {
  const auto& p = pc.xyz[static_cast<std::size_t>(i)];
  return {static_cast<double>(p[0]), static_cast<double>(p[1]), static_cast<double>(p[2])};
}
}  // namespace

std::vector<std::int64_t> farthest_point_sample(const PointCloud& pc, std::int64_t S) {
  const auto n = static_cast<std::int64_t>(pc.size());
  if (n == 0) throw ConfigError("farthest_point_sample: empty cloud");
  if (S <= 0) throw ConfigError("farthest_point_sample: S must be positive");
  std::vector<std::int64_t> picks;
  picks.reserve(static_cast<std::size_t>(S));
  std::vector<double> min_d(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::int64_t current = 0;
  picks.push_back(0);
  const std::int64_t unique = std::min(S, n);
  for (std::int64_t k = 1; k < unique; ++k) {
    const auto c = at(pc, current);
    std::int64_t best = 0;
    double best_d = -1.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const double d = sqdist(pc.xyz[static_cast<std::size_t>(i)], c);
      if (d < min_d[static_cast<std::size_t>(i)]) min_d[static_cast<std::size_t>(i)] = d;
      if (min_d[static_cast<std::size_t>(i)] > best_d) {  // strict: lowest index wins ties
        best_d = min_d[static_cast<std::size_t>(i)];
        best = i;
      }
    }
    picks.push_back(best);
    current = best;
  }
  for (std::int64_t k = unique; k < S; ++k) picks.push_back(picks[static_cast<std::size_t>(k - unique)]);
  return picks;
}

std::vector<std::vector<std::int64_t>> ball_query(const PointCloud& pc,
                                                  const std::vector<std::array<double, 3>>& centers,
                                                  double radius, int max_neighbors) {
  if (radius <= 0.0) throw ConfigError("ball_query: radius must be positive");
  if (max_neighbors <= 0) throw ConfigError("ball_query: max_neighbors must be positive");
  const auto n = static_cast<std::int64_t>(pc.size());
  const double r2 = radius * radius;
  std::vector<std::vector<std::int64_t>> grid(centers.size());
  std::vector<std::pair<double, std::int64_t>> in_range;
  for (std::size_t ci = 0; ci < centers.size(); ++ci) {
    in_range.clear();
    double nearest_d = std::numeric_limits<double>::infinity();
    std::int64_t nearest = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      const double d = sqdist(pc.xyz[static_cast<std::size_t>(i)], centers[ci]);
      if (d <= r2) in_range.emplace_back(d, i);
      if (d < nearest_d) {
        nearest_d = d;
        nearest = i;
      }
    }
    auto& row = grid[ci];
    row.reserve(static_cast<std::size_t>(max_neighbors));
    if (in_range.empty()) {
      row.assign(static_cast<std::size_t>(max_neighbors), nearest);
      continue;
    }
    // Nearest-first keeps grouping invariant to input point order.
    std::sort(in_range.begin(), in_range.end());
    const std::size_t take = std::min<std::size_t>(in_range.size(),
                                                   static_cast<std::size_t>(max_neighbors));
    for (std::size_t k = 0; k < take; ++k) row.push_back(in_range[k].second);
    while (row.size() < static_cast<std::size_t>(max_neighbors)) row.push_back(row[0]);
  }
  return grid;
}

PointEncoder::PointEncoder(ParamStore& store, const std::string& prefix,
                           const PointEncoderConfig& cfg, Rng& rng)
    : cfg_(cfg),
      s1_lin1_(store, prefix + ".s1.lin1", 7, cfg.mlp1_hidden, rng),
      s1_lin2_(store, prefix + ".s1.lin2", cfg.mlp1_hidden, cfg.mlp1_out, rng),
      s2_lin1_(store, prefix + ".s2.lin1", 3 + cfg.mlp1_out, cfg.mlp2_hidden, rng),
      s2_lin2_(store, prefix + ".s2.lin2", cfg.mlp2_hidden, cfg.mlp2_out, rng) {}

SeedSet PointEncoder::forward(const PointCloud& pc) const {
  if (pc.size() == 0) throw ConfigError("point encoder: empty cloud");
  if (pc.intensity.size() != pc.size())
    throw ShapeError("point encoder: intensity count " + std::to_string(pc.intensity.size()) +
                     " != point count " + std::to_string(pc.size()));
  const int K = cfg_.neighbors;

  // Stage 1: raw points -> s1 centers. The group matrix is a constant leaf
  // (inputs carry no gradient); rows are (local xyz, absolute xyz, intensity)
  // so seed features keep the global position the grounding task depends on.
  const auto idx1 = farthest_point_sample(pc, cfg_.s1);
  std::vector<std::array<double, 3>> centers1(idx1.size());
  for (std::size_t i = 0; i < idx1.size(); ++i) centers1[i] = at(pc, idx1[i]);
  const auto groups1 = ball_query(pc, centers1, cfg_.radius1, K);
  const std::int64_t rows1 = cfg_.s1 * K;
  std::vector<double> g1(static_cast<std::size_t>(rows1 * 7));
  for (std::int64_t s = 0; s < cfg_.s1; ++s) {
    for (int k = 0; k < K; ++k) {
      const auto pi = groups1[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)];
      const auto p = at(pc, pi);
      double* row = g1.data() + (s * K + k) * 7;
      row[0] = p[0] - centers1[static_cast<std::size_t>(s)][0];
      row[1] = p[1] - centers1[static_cast<std::size_t>(s)][1];
      row[2] = p[2] - centers1[static_cast<std::size_t>(s)][2];
      row[3] = p[0];
      row[4] = p[1];
      row[5] = p[2];
      row[6] = static_cast<double>(pc.intensity[static_cast<std::size_t>(pi)]);
    }
  }
  Tensor grouped1 = Tensor::from({rows1, 7}, std::move(g1));
  Tensor h1 = relu(s1_lin2_.forward(relu(s1_lin1_.forward(grouped1))));
  Tensor feat1 = segment_max_rows(h1, K);  // s1 x mlp1_out

  // Stage 2: centers1 with feat1 -> s2 seeds. Gradients flow through the
  // gathered stage-1 features.
  PointCloud stage2_cloud;
  stage2_cloud.xyz.resize(centers1.size());
  stage2_cloud.intensity.assign(centers1.size(), 0.0f);
  for (std::size_t i = 0; i < centers1.size(); ++i)
    stage2_cloud.xyz[i] = {static_cast<float>(centers1[i][0]), static_cast<float>(centers1[i][1]),
                           static_cast<float>(centers1[i][2])};
  const auto idx2 = farthest_point_sample(stage2_cloud, cfg_.s2);
  std::vector<std::array<double, 3>> centers2(idx2.size());
  for (std::size_t i = 0; i < idx2.size(); ++i)
    centers2[i] = centers1[static_cast<std::size_t>(idx2[i])];
  const auto groups2 = ball_query(stage2_cloud, centers2, cfg_.radius2, K);

  const std::int64_t rows2 = cfg_.s2 * K;
  std::vector<double> local2(static_cast<std::size_t>(rows2 * 3));
  std::vector<std::int64_t> flat(static_cast<std::size_t>(rows2));
  for (std::int64_t s = 0; s < cfg_.s2; ++s) {
    for (int k = 0; k < K; ++k) {
      const auto ci = groups2[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)];
      flat[static_cast<std::size_t>(s * K + k)] = ci;
      double* row = local2.data() + (s * K + k) * 3;
      row[0] = centers1[static_cast<std::size_t>(ci)][0] - centers2[static_cast<std::size_t>(s)][0];
      row[1] = centers1[static_cast<std::size_t>(ci)][1] - centers2[static_cast<std::size_t>(s)][1];
      row[2] = centers1[static_cast<std::size_t>(ci)][2] - centers2[static_cast<std::size_t>(s)][2];
    }
  }
  Tensor local2_t = Tensor::from({rows2, 3}, std::move(local2));
  Tensor grouped2 = concat_cols({local2_t, gather_rows(feat1, flat)});
  Tensor h2 = relu(s2_lin2_.forward(relu(s2_lin1_.forward(grouped2))));

  SeedSet out;
  out.positions = std::move(centers2);
  out.features = segment_max_rows(h2, K);  // s2 x mlp2_out
  return out;
}

}  // namespace wg
