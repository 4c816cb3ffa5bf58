// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "wildground/tensor.hpp"

namespace wg {

// |a-b| / max(1, |a|, |b|)
inline double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)});
}

struct FdOptions {
  double h = 1e-5;
  // 0 = probe every coordinate of every input; otherwise sample this many
  // coordinates per input (for large parameter tensors).
  int max_coords_per_input = 0;
};

// Central-difference check of backpropagated gradients. `inputs` are the leaf
// tensors to probe (requires_grad must be set); `forward` recomputes the
// scalar output from those same tensors and must be deterministic. Returns
// the maximum relative error over all probed coordinates.
double fd_max_rel_err(const std::vector<Tensor>& inputs, const std::function<Tensor()>& forward,
                      FdOptions opt = {}, Rng* coord_rng = nullptr);

// One registered gradient-check case: a named op with a randomized instance
// runner returning the max relative error for that instance.
struct GradCheckCase {
  std::string name;
  std::string scope;  // core | geometry | model | loss
  std::function<double(Rng&)> run;
};

const std::vector<GradCheckCase>& gradcheck_registry();

struct GradCheckReport {
  std::string name;
  std::string scope;
  double max_rel_err = 0.0;
  int instances = 0;
  bool pass = false;
};

// Runs every case matching `scope` ("all" for everything) `instances` times.
// `corrupt_op` is a test fixture: that op's analytic gradient is perturbed
// before comparison, so its check must fail.
std::vector<GradCheckReport> run_gradcheck(const std::string& scope, int instances, double tol,
                                           std::uint64_t seed, const std::string& corrupt_op = "");

}  // namespace wg
