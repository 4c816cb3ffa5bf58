// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wildground/nn.hpp"

namespace wg {

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;
};

// Decoupled weight-decay Adam with bias correction. Parameters whose name
// starts with an override prefix use that prefix's learning rate instead of
// the base one (the point encoder trains 10x faster than the rest).
class AdamW {
 public:
  AdamW(ParamStore& store, AdamWConfig cfg,
        std::vector<std::pair<std::string, double>> lr_prefix_overrides = {});

  // One update over every registered parameter; gradients are cleared.
  // A parameter whose gradient buffer was never touched by backward is an
  // error (it means the model wiring dropped it from the graph).
  void step();

  std::int64_t step_count() const { return step_; }
  void set_step_count(std::int64_t t) { step_ = t; }
  double lr_scale() const { return lr_scale_; }
  void set_lr_scale(double s) { lr_scale_ = s; }

  const AdamWConfig& config() const { return cfg_; }

  // Moment buffers, exposed for checkpointing (index-aligned with store.all()).
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }

 private:
  ParamStore& store_;
  AdamWConfig cfg_;
  std::vector<std::pair<std::string, double>> overrides_;
  std::vector<double> param_lr_;
  std::vector<std::vector<double>> m_, v_;
  std::int64_t step_ = 0;
  double lr_scale_ = 1.0;
};

}  // namespace wg
