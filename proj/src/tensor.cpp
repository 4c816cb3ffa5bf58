// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#include "wildground/tensor.hpp"

#include <atomic>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace wg {

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  out += ")";
  return out;
}

namespace detail {

void Node::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
}

void Node::accumulate_grad(const double* g, std::size_t n) {
  ensure_grad();
  for (std::size_t i = 0; i < n; ++i) grad[i] += g[i];
}

std::uint64_t next_seq() {
  static std::atomic<std::uint64_t> counter{0};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace detail

namespace {
thread_local bool g_grad_enabled = true;
bool g_finite_checks = true;
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGrad::NoGrad() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGrad::~NoGrad() { g_grad_enabled = prev_; }

void set_finite_checks(bool on) { g_finite_checks = on; }
bool finite_checks_enabled() { return g_finite_checks; }

namespace {

detail::NodePtr make_leaf(Shape shape, std::vector<double> values) {
  const std::int64_t n = shape_numel(shape);
  if (n != static_cast<std::int64_t>(values.size()))
    throw ShapeError("tensor init: " + std::to_string(values.size()) +
                     " values for shape " + shape_str(shape));
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->seq = detail::next_seq();
  return node;
}

}  // namespace

Tensor Tensor::zeros(Shape shape) {
  const auto n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0)));
}

Tensor Tensor::full(Shape shape, double value) {
  const auto n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value)));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  return Tensor(make_leaf(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi) {
  const auto n = static_cast<std::size_t>(shape_numel(shape));
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(make_leaf(std::move(shape), std::move(v)));
}

Tensor Tensor::normal(Shape shape, Rng& rng, double mean, double stddev) {
  const auto n = static_cast<std::size_t>(shape_numel(shape));
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal(mean, stddev);
  return Tensor(make_leaf(std::move(shape), std::move(v)));
}

std::int64_t Tensor::rows() const {
  if (ndim() != 2) throw ShapeError("rows(): tensor is " + shape_str(shape()) + ", want 2-D");
  return n_->shape[0];
}

std::int64_t Tensor::cols() const {
  if (ndim() != 2) throw ShapeError("cols(): tensor is " + shape_str(shape()) + ", want 2-D");
  return n_->shape[1];
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item(): tensor has " + std::to_string(size()) + " elements");
  return n_->data[0];
}

double Tensor::at(std::int64_t r, std::int64_t c) const {
  if (ndim() != 2) throw ShapeError("at(): tensor is " + shape_str(shape()) + ", want 2-D");
  if (r < 0 || r >= rows() || c < 0 || c >= cols())
    throw ShapeError("at(): index out of range for " + shape_str(shape()));
  return n_->data[static_cast<std::size_t>(r * cols() + c)];
}

Tensor& Tensor::set_requires_grad(bool on) {
  if (on && n_->op != std::string("leaf"))
    throw ConfigError("requires_grad can only be set on leaf tensors");
  n_->requires_grad = on;
  return *this;
}

const std::vector<double>& Tensor::grad() const {
  n_->ensure_grad();
  return n_->grad;
}

void Tensor::zero_grad() {
  if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), 0.0);
}

void Tensor::backward() const {
  Tape tape(*this);
  tape.backward();
}

Tape::Tape(const Tensor& root) : root_(root.node()) {
  if (!root_) throw ConfigError("Tape: undefined root tensor");
  if (root_->numel() != 1)
    throw ShapeError("backward(): root must be scalar, got " + shape_str(root_->shape));
  // Iterative DFS post-order over grad-requiring subgraph; post-order of a
  // DAG reversed gives a valid reverse-topological schedule.
  std::unordered_set<const detail::Node*> seen;
  std::vector<std::pair<detail::NodePtr, std::size_t>> stack;
  std::vector<detail::NodePtr> post;
  if (root_->requires_grad) {
    stack.emplace_back(root_, 0);
    seen.insert(root_.get());
  }
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      auto parent = node->parents[idx++];
      if (parent->requires_grad && !seen.count(parent.get())) {
        seen.insert(parent.get());
        stack.emplace_back(std::move(parent), 0);
      }
    } else {
      post.push_back(node);
      stack.pop_back();
    }
  }
  order_.assign(post.rbegin(), post.rend());
}

void Tape::backward() {
  if (order_.empty()) return;
  root_->ensure_grad();
  root_->grad[0] += 1.0;
  for (auto& node : order_) {
    if (!node->backward_fn) continue;
    node->ensure_grad();
    node->backward_fn();
    node->backward_runs += 1;
  }
}

}  // namespace wg
