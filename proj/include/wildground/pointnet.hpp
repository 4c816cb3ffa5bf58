// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "wildground/nn.hpp"

namespace wg {

struct PointCloud {
  std::vector<std::array<float, 3>> xyz;
  std::vector<float> intensity;  // painted or raw reflectance
  int frame_time = 0;

  std::size_t size() const { return xyz.size(); }
};

// Downsampled positions carrying aggregated local features — the visual
// tokens of the point branch.
struct SeedSet {
  std::vector<std::array<double, 3>> positions;  // S x 3
  Tensor features;                               // S x C
};

// Farthest point sampling. First pick is index 0; each subsequent pick
// maximizes the min distance to the chosen set (lowest index on ties).
// S > N wraps by repeating the sampled sequence.
std::vector<std::int64_t> farthest_point_sample(const PointCloud& pc, std::int64_t S);

// Per center: up to max_neighbors indices within `radius`, nearest first
// (ties by index), padded by repeating the nearest entry. A center with no
// neighbor in range falls back to its single nearest point.
std::vector<std::vector<std::int64_t>> ball_query(const PointCloud& pc,
                                                  const std::vector<std::array<double, 3>>& centers,
                                                  double radius, int max_neighbors);

struct PointEncoderConfig {
  std::int64_t s1 = 256, s2 = 64;
  double radius1 = 0.8, radius2 = 1.6;
  int neighbors = 16;
  std::int64_t mlp1_hidden = 32, mlp1_out = 64;
  std::int64_t mlp2_hidden = 128, mlp2_out = 288;
};

// Two stacked set-abstraction stages: FPS centers, ball-query grouping with
// re-centered local coordinates, a shared per-point MLP and per-group max
// pooling. Stage 1 consumes xyz+intensity, stage 2 consumes xyz+stage-1
// features; the result is an s2-seed set with mlp2_out-dim features.
class PointEncoder {
 public:
  PointEncoder() = default;
  PointEncoder(ParamStore& store, const std::string& prefix, const PointEncoderConfig& cfg,
               Rng& rng);
  SeedSet forward(const PointCloud& pc) const;
  const PointEncoderConfig& config() const { return cfg_; }

 private:
  PointEncoderConfig cfg_;
  Linear s1_lin1_, s1_lin2_;
  Linear s2_lin1_, s2_lin2_;
};

}  // namespace wg
