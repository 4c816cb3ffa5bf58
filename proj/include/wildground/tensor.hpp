// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "wildground/errors.hpp"
#include "wildground/rng.hpp"

namespace wg {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

// One node of the computation graph. Values are always 64-bit floats in
// row-major order. Gradient buffers are allocated lazily during backward.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::uint64_t seq = 0;  // creation index; higher = created later
  int backward_runs = 0;  // times the backward fn executed (test hook)
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backward_fn;

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  void ensure_grad();
  void accumulate_grad(const double* g, std::size_t n);
};

using NodePtr = std::shared_ptr<Node>;

std::uint64_t next_seq();

}  // namespace detail

// Thread-local gradient mode. Ops record parents/backward functions only when
// enabled; evaluation paths wrap themselves in NoGrad to skip tape growth.
bool grad_enabled();

class NoGrad {
 public:
  NoGrad();
  ~NoGrad();
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;

 private:
  bool prev_;
};

// Global toggle: scan every op output for NaN/Inf and throw NumericError.
void set_finite_checks(bool on);
bool finite_checks_enabled();

// Value + graph handle. Copies are shallow (shared node), like the usual
// autodiff tensor types.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(detail::NodePtr n) : n_(std::move(n)) {}

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);
  static Tensor uniform(Shape shape, Rng& rng, double lo, double hi);
  static Tensor normal(Shape shape, Rng& rng, double mean, double stddev);

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  std::int64_t size() const { return n_->numel(); }
  std::int64_t dim(int i) const { return n_->shape[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(n_->shape.size()); }

  // 2-D helpers (most of the model works on row matrices).
  std::int64_t rows() const;
  std::int64_t cols() const;

  const double* data() const { return n_->data.data(); }
  double* data() { return n_->data.data(); }
  const std::vector<double>& values() const { return n_->data; }

  double item() const;
  double at(std::int64_t r, std::int64_t c) const;

  Tensor& set_requires_grad(bool on = true);
  bool requires_grad() const { return n_->requires_grad; }

  bool has_grad() const { return !n_->grad.empty(); }
  const std::vector<double>& grad() const;
  void zero_grad();

  // Reverse-mode sweep from this scalar. Seeds d(this)=1.
  void backward() const;

  detail::NodePtr node() const { return n_; }

 private:
  detail::NodePtr n_;
};

// Explicit tape: reverse-topological schedule over the subgraph reachable
// from a root. backward() runs each node's backward function exactly once.
class Tape {
 public:
  explicit Tape(const Tensor& root);
  void backward();
  std::size_t node_count() const { return order_.size(); }
  const std::vector<detail::NodePtr>& order() const { return order_; }

 private:
  detail::NodePtr root_;
  std::vector<detail::NodePtr> order_;  // reverse topological
};

}  // namespace wg
