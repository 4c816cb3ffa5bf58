// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#include "wildground/optim.hpp"

#include <cmath>

namespace wg {

AdamW::AdamW(ParamStore& store, AdamWConfig cfg,
             std::vector<std::pair<std::string, double>> lr_prefix_overrides)
    : store_(store), cfg_(cfg), overrides_(std::move(lr_prefix_overrides)) {
  for (const auto& [name, t] : store_.all()) {
    double lr = cfg_.lr;
    for (const auto& [prefix, olr] : overrides_) {
      if (name.rfind(prefix, 0) == 0) {
        lr = olr;
        break;
      }
    }
    param_lr_.push_back(lr);
    m_.emplace_back(static_cast<std::size_t>(t.size()), 0.0);
    v_.emplace_back(static_cast<std::size_t>(t.size()), 0.0);
  }
}

void AdamW::step() {
  step_ += 1;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  const auto& params = store_.all();
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto& [name, t] = params[p];
    if (!t.node()->requires_grad || t.node()->grad.empty())
      throw ConfigError("optimizer: parameter '" + name + "' has no gradient");
    const double lr = param_lr_[p] * lr_scale_;
    double* w = t.node()->data.data();
    double* g = t.node()->grad.data();
    double* m = m_[p].data();
    double* v = v_[p].data();
    const std::size_t n = static_cast<std::size_t>(t.size());
    for (std::size_t i = 0; i < n; ++i) {
      // Decoupled decay uses the pre-update weight.
      w[i] -= lr * cfg_.weight_decay * w[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      g[i] = 0.0;
    }
  }
}

}  // namespace wg
