// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "wildground/tensor.hpp"

namespace wg {

// Elementwise binary (shapes must match exactly; no implicit broadcasting
// except the *_rows helpers below).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor min_elem(const Tensor& a, const Tensor& b);  // ties take a's branch
Tensor max_elem(const Tensor& a, const Tensor& b);  // ties take a's branch

// Elementwise unary.
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor exp_op(const Tensor& a);
Tensor log_op(const Tensor& a);
Tensor abs_op(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);  // log(1 + e^x), overflow-safe

// Linear algebra on 2-D tensors.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Row/column surgery on 2-D tensors.
Tensor slice_rows(const Tensor& a, std::int64_t begin, std::int64_t end);
Tensor slice_cols(const Tensor& a, std::int64_t begin, std::int64_t end);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor gather_rows(const Tensor& a, const std::vector<std::int64_t>& idx);
Tensor add_bias_rows(const Tensor& a, const Tensor& bias);  // bias: (n) or (1×n)

// Reductions.
Tensor sum_all(const Tensor& a);   // -> (1)
Tensor mean_all(const Tensor& a);  // -> (1)
Tensor mean_rows(const Tensor& a); // (m×n) -> (1×n), mean over rows

// Row-structured nonlinearities with fused backward passes.
Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);
Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias,
                       double eps = 1e-5);
Tensor l2_normalize_rows(const Tensor& a, double eps = 1e-12);

// Max over contiguous groups of `group_size` rows: (g*group_size × n) -> (g × n).
// Gradient routes to the argmax row of each group (first on ties).
Tensor segment_max_rows(const Tensor& a, std::int64_t group_size);

// Inverted dropout; identity when `training` is false. The mask is drawn from
// `rng` so a fixed seed reproduces the exact mask.
Tensor dropout(const Tensor& a, double rate, bool training, Rng& rng);

}  // namespace wg
