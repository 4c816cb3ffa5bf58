// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#include "wildground/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace wg {

namespace {

using detail::Node;
using detail::NodePtr;

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

void check_finite(const Node& n) {
  if (!finite_checks_enabled()) return;
  for (double v : n.data) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value produced by op '") + n.op +
                         "' with output shape " + shape_str(n.shape));
    }
  }
}

NodePtr new_node(const char* op, Shape shape, std::size_t n) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->shape = std::move(shape);
  node->data.resize(n);
  node->seq = detail::next_seq();
  return node;
}

bool wants_grad(std::initializer_list<const Tensor*> parents) {
  if (!grad_enabled()) return false;
  for (const Tensor* t : parents)
    if (t->node()->requires_grad) return true;
  return false;
}

void attach(const NodePtr& out, std::initializer_list<const Tensor*> parents,
            std::function<void()> backward_fn) {
  out->requires_grad = true;
  out->parents.reserve(parents.size());
  for (const Tensor* t : parents) out->parents.push_back(t->node());
  out->backward_fn = std::move(backward_fn);
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
}

void require_2d(const char* op, const Tensor& a) {
  if (a.ndim() != 2)
    throw ShapeError(std::string(op) + ": want 2-D tensor, got " + shape_str(a.shape()));
}

// Shared skeleton for elementwise binary ops with local derivatives.
template <typename Fwd, typename Dfa, typename Dfb>
Tensor ew_binary(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, Dfa dfa, Dfb dfb) {
  require_same_shape(name, a, b);
  const auto n = static_cast<std::size_t>(a.size());
  auto out = new_node(name, a.shape(), n);
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < n; ++i) out->data[i] = fwd(pa[i], pb[i]);
  check_finite(*out);
  if (wants_grad({&a, &b})) {
    Node* self = out.get();
    Node* na = a.node().get();
    Node* nb = b.node().get();
    attach(out, {&a, &b}, [self, na, nb, n, dfa, dfb]() {
      const double* g = self->grad.data();
      if (na->requires_grad) {
        na->ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
          na->grad[i] += g[i] * dfa(na->data[i], nb->data[i], self->data[i]);
      }
      if (nb->requires_grad) {
        nb->ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
          nb->grad[i] += g[i] * dfb(na->data[i], nb->data[i], self->data[i]);
      }
    });
  }
  return Tensor(out);
}

template <typename Fwd, typename Df>
Tensor ew_unary(const char* name, const Tensor& a, Fwd fwd, Df df) {
  const auto n = static_cast<std::size_t>(a.size());
  auto out = new_node(name, a.shape(), n);
  const double* pa = a.data();
  for (std::size_t i = 0; i < n; ++i) out->data[i] = fwd(pa[i]);
  check_finite(*out);
  if (wants_grad({&a})) {
    Node* self = out.get();
    Node* na = a.node().get();
    attach(out, {&a}, [self, na, n, df]() {
      na->ensure_grad();
      const double* g = self->grad.data();
      for (std::size_t i = 0; i < n; ++i)
        na->grad[i] += g[i] * df(na->data[i], self->data[i]);
    });
  }
  return Tensor(out);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return ew_binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return ew_binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return ew_binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return ew_binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double out) { return -out / y; });
}

Tensor min_elem(const Tensor& a, const Tensor& b) {
  return ew_binary(
      "min_elem", a, b, [](double x, double y) { return x <= y ? x : y; },
      [](double x, double y, double) { return x <= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x <= y ? 0.0 : 1.0; });
}

Tensor max_elem(const Tensor& a, const Tensor& b) {
  return ew_binary(
      "max_elem", a, b, [](double x, double y) { return x >= y ? x : y; },
      [](double x, double y, double) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y, double) { return x >= y ? 0.0 : 1.0; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return ew_unary(
      "add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double c) {
  return ew_unary(
      "mul_scalar", a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}

Tensor exp_op(const Tensor& a) {
  return ew_unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double out) { return out; });
}

Tensor log_op(const Tensor& a) {
  return ew_unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor abs_op(const Tensor& a) {
  return ew_unary(
      "abs", a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor relu(const Tensor& a) {
  return ew_unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return ew_unary(
      "sigmoid", a,
      [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double out) { return out * (1.0 - out); });
}

Tensor softplus(const Tensor& a) {
  return ew_unary(
      "softplus", a,
      [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); },
      [](double x, double) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d("matmul", a);
  require_2d("matmul", b);
  const std::int64_t m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
  if (k != k2)
    throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  auto out = new_node("matmul", {m, n}, static_cast<std::size_t>(m * n));
  {
    ECMap A(a.data(), m, k), B(b.data(), k, n);
    EMap C(out->data.data(), m, n);
    C.noalias() = A * B;
  }
  check_finite(*out);
  if (wants_grad({&a, &b})) {
    Node* self = out.get();
    Node* na = a.node().get();
    Node* nb = b.node().get();
    attach(out, {&a, &b}, [self, na, nb, m, k, n]() {
      ECMap G(self->grad.data(), m, n);
      if (na->requires_grad) {
        na->ensure_grad();
        ECMap B(nb->data.data(), k, n);
        EMap GA(na->grad.data(), m, k);
        GA.noalias() += G * B.transpose();
      }
      if (nb->requires_grad) {
        nb->ensure_grad();
        ECMap A(na->data.data(), m, k);
        EMap GB(nb->grad.data(), k, n);
        GB.noalias() += A.transpose() * G;
      }
    });
  }
  return Tensor(out);
}

Tensor transpose(const Tensor& a) {
  require_2d("transpose", a);
  const std::int64_t m = a.rows(), n = a.cols();
  auto out = new_node("transpose", {n, m}, static_cast<std::size_t>(m * n));
  {
    ECMap A(a.data(), m, n);
    EMap T(out->data.data(), n, m);
    T = A.transpose();
  }
  if (wants_grad({&a})) {
    Node* self = out.get();
    Node* na = a.node().get();
    attach(out, {&a}, [self, na, m, n]() {
      na->ensure_grad();
      ECMap G(self->grad.data(), n, m);
      EMap GA(na->grad.data(), m, n);
      GA.noalias() += G.transpose();
    });
  }
  return Tensor(out);
}

Tensor slice_rows(const Tensor& a, std::int64_t begin, std::int64_t end) {
  require_2d("slice_rows", a);
  const std::int64_t m = a.rows(), n = a.cols();
  if (begin < 0 || end > m || begin >= end)
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for " + shape_str(a.shape()));
  const std::int64_t r = end - begin;
  auto out = new_node("slice_rows", {r, n}, static_cast<std::size_t>(r * n));
  std::memcpy(out->data.data(), a.data() + begin * n, static_cast<std::size_t>(r * n) * sizeof(double));
  if (wants_grad({&a})) {
    Node* self = out.get();
    Node* na = a.node().get();
    attach(out, {&a}, [self, na, begin, r, n]() {
      na->ensure_grad();
      const double* g = self->grad.data();
      double* ga = na->grad.data() + begin * n;
      for (std::int64_t i = 0; i < r * n; ++i) ga[i] += g[i];
    });
  }
  return Tensor(out);
}

Tensor slice_cols(const Tensor& a, std::int64_t begin, std::int64_t end) {
  require_2d("slice_cols", a);
  const std::int64_t m = a.rows(), n = a.cols();
  if (begin < 0 || end > n || begin >= end)
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for " + shape_str(a.shape()));
  const std::int64_t c = end - begin;
  auto out = new_node("slice_cols", {m, c}, static_cast<std::size_t>(m * c));
  for (std::int64_t i = 0; i < m; ++i)
    std::memcpy(out->data.data() + i * c, a.data() + i * n + begin,
                static_cast<std::size_t>(c) * sizeof(double));
  if (wants_grad({&a})) {
    Node* self = out.get();
    Node* na = a.node().get();
    attach(out, {&a}, [self, na, begin, m, n, c]() {
      na->ensure_grad();
      for (std::int64_t i = 0; i < m; ++i) {
        const double* g = self->grad.data() + i * c;
        double* ga = na->grad.data() + i * n + begin;
        for (std::int64_t j = 0; j < c; ++j) ga[j] += g[j];
      }
    });
  }
  return Tensor(out);
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  require_2d("concat_rows", parts[0]);
  const std::int64_t n = parts[0].cols();
  std::int64_t m = 0;
  for (const auto& p : parts) {
    require_2d("concat_rows", p);
    if (p.cols() != n)
      throw ShapeError("concat_rows: column mismatch " + shape_str(p.shape()) + " vs " +
                       shape_str(parts[0].shape()));
    m += p.rows();
  }
  auto out = new_node("concat_rows", {m, n}, static_cast<std::size_t>(m * n));
  std::int64_t row = 0;
  for (const auto& p : parts) {
    std::memcpy(out->data.data() + row * n, p.data(),
                static_cast<std::size_t>(p.rows() * n) * sizeof(double));
    row += p.rows();
  }
  bool grad = false;
  if (grad_enabled())
    for (const auto& p : parts)
      if (p.requires_grad()) grad = true;
  if (grad) {
    Node* self = out.get();
    out->requires_grad = true;
    for (const auto& p : parts) out->parents.push_back(p.node());
    std::vector<Node*> raw;
    for (const auto& p : parts) raw.push_back(p.node().get());
    out->backward_fn = [self, raw, n]() {
      std::int64_t row = 0;
      for (Node* p : raw) {
        const std::int64_t r = p->shape[0];
        if (p->requires_grad) {
          p->ensure_grad();
          const double* g = self->grad.data() + row * n;
          for (std::int64_t i = 0; i < r * n; ++i) p->grad[i] += g[i];
        }
        row += r;
      }
    };
  }
  return Tensor(out);
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  require_2d("concat_cols", parts[0]);
  const std::int64_t m = parts[0].rows();
  std::int64_t n = 0;
  for (const auto& p : parts) {
    require_2d("concat_cols", p);
    if (p.rows() != m)
      throw ShapeError("concat_cols: row mismatch " + shape_str(p.shape()) + " vs " +
                       shape_str(parts[0].shape()));
    n += p.cols();
  }
  auto out = new_node("concat_cols", {m, n}, static_cast<std::size_t>(m * n));
  std::int64_t col = 0;
  for (const auto& p : parts) {
    const std::int64_t c = p.cols();
    for (std::int64_t i = 0; i < m; ++i)
      std::memcpy(out->data.data() + i * n + col, p.data() + i * c,
                  static_cast<std::size_t>(c) * sizeof(double));
    col += c;
  }
  bool grad = false;
  if (grad_enabled())
    for (const auto& p : parts)
      if (p.requires_grad()) grad = true;
  if (grad) {
    Node* self = out.get();
    out->requires_grad = true;
    for (const auto& p : parts) out->parents.push_back(p.node());
    std::vector<Node*> raw;
    for (const auto& p : parts) raw.push_back(p.node().get());
    out->backward_fn = [self, raw, m, n]() {
      std::int64_t col = 0;
      for (Node* p : raw) {
        const std::int64_t c = p->shape[1];
        if (p->requires_grad) {
          p->ensure_grad();
          for (std::int64_t i = 0; i < m; ++i) {
            const double* g = self->grad.data() + i * n + col;
            double* gp = p->grad.data() + i * c;
            for (std::int64_t j = 0; j < c; ++j) gp[j] += g[j];
          }
        }
        col += c;
      }
    };
  }
  return Tensor(out);
}

Tensor gather_rows(const Tensor& a, const std::vector<std::int64_t>& idx) {
  require_2d("gather_rows", a);
  const std::int64_t m = a.rows(), n = a.cols();
  for (auto i : idx)
    if (i < 0 || i >= m)
      throw ShapeError("gather_rows: index " + std::to_string(i) + " out of range for " +
                       shape_str(a.shape()));
  const std::int64_t r = static_cast<std::int64_t>(idx.size());
  auto out = new_node("gather_rows", {r, n}, static_cast<std::size_t>(r * n));
  for (std::int64_t i = 0; i < r; ++i)
    std::memcpy(out->data.data() + i * n, a.data() + idx[static_cast<std::size_t>(i)] * n,
                static_cast<std::size_t>(n) * sizeof(double));
  if (wants_grad({&a})) {
    Node* self = out.get();
    Node* na = a.node().get();
    auto indices = idx;
    attach(out, {&a}, [self, na, indices, n]() {
      na->ensure_grad();
      for (std::size_t i = 0; i < indices.size(); ++i) {
        const double* g = self->grad.data() + static_cast<std::int64_t>(i) * n;
        double* ga = na->grad.data() + indices[i] * n;
        for (std::int64_t j = 0; j < n; ++j) ga[j] += g[j];
      }
    });
  }
  return Tensor(out);
}

Tensor add_bias_rows(const Tensor& a, const Tensor& bias) {
  require_2d("add_bias_rows", a);
  const std::int64_t m = a.rows(), n = a.cols();
  if (bias.size() != n)
    throw ShapeError("add_bias_rows: bias " + shape_str(bias.shape()) + " vs matrix " +
                     shape_str(a.shape()));
  auto out = new_node("add_bias_rows", {m, n}, static_cast<std::size_t>(m * n));
  const double* pb = bias.data();
  for (std::int64_t i = 0; i < m; ++i) {
    const double* pa = a.data() + i * n;
    double* po = out->data.data() + i * n;
    for (std::int64_t j = 0; j < n; ++j) po[j] = pa[j] + pb[j];
  }
  check_finite(*out);
  if (wants_grad({&a, &bias})) {
    Node* self = out.get();
    Node* na = a.node().get();
    Node* nb = bias.node().get();
    attach(out, {&a, &bias}, [self, na, nb, m, n]() {
      if (na->requires_grad) na->accumulate_grad(self->grad.data(), self->grad.size());
      if (nb->requires_grad) {
        nb->ensure_grad();
        for (std::int64_t i = 0; i < m; ++i) {
          const double* g = self->grad.data() + i * n;
          for (std::int64_t j = 0; j < n; ++j) nb->grad[static_cast<std::size_t>(j)] += g[j];
        }
      }
    });
  }
  return Tensor(out);
}

Tensor sum_all(const Tensor& a) {
  auto out = new_node("sum_all", {1}, 1);
  double s = 0.0;
  for (double v : a.values()) s += v;
  out->data[0] = s;
  check_finite(*out);
  if (wants_grad({&a})) {
    Node* self = out.get();
    Node* na = a.node().get();
    attach(out, {&a}, [self, na]() {
      na->ensure_grad();
      const double g = self->grad[0];
      for (auto& v : na->grad) v += g;
    });
  }
  return Tensor(out);
}

Tensor mean_all(const Tensor& a) {
  const double inv = 1.0 / static_cast<double>(a.size());
  auto out = new_node("mean_all", {1}, 1);
  double s = 0.0;
  for (double v : a.values()) s += v;
  out->data[0] = s * inv;
  check_finite(*out);
  if (wants_grad({&a})) {
    Node* self = out.get();
    Node* na = a.node().get();
    attach(out, {&a}, [self, na, inv]() {
      na->ensure_grad();
      const double g = self->grad[0] * inv;
      for (auto& v : na->grad) v += g;
    });
  }
  return Tensor(out);
}

Tensor mean_rows(const Tensor& a) {
  require_2d("mean_rows", a);
  const std::int64_t m = a.rows(), n = a.cols();
  const double inv = 1.0 / static_cast<double>(m);
  auto out = new_node("mean_rows", {1, n}, static_cast<std::size_t>(n));
  for (std::int64_t j = 0; j < n; ++j) out->data[static_cast<std::size_t>(j)] = 0.0;
  for (std::int64_t i = 0; i < m; ++i) {
    const double* pa = a.data() + i * n;
    for (std::int64_t j = 0; j < n; ++j) out->data[static_cast<std::size_t>(j)] += pa[j];
  }
  for (std::int64_t j = 0; j < n; ++j) out->data[static_cast<std::size_t>(j)] *= inv;
  check_finite(*out);
  if (wants_grad({&a})) {
    Node* self = out.get();
    Node* na = a.node().get();
    attach(out, {&a}, [self, na, m, n, inv]() {
      na->ensure_grad();
      for (std::int64_t i = 0; i < m; ++i) {
        double* ga = na->grad.data() + i * n;
        for (std::int64_t j = 0; j < n; ++j) ga[j] += self->grad[static_cast<std::size_t>(j)] * inv;
      }
    });
  }
  return Tensor(out);
}

namespace {

// softmax/log_softmax share forward structure; rows of any 2-D tensor
// (1-D treated as one row).
void as_rows(const Tensor& a, std::int64_t& m, std::int64_t& n) {
  if (a.ndim() == 1) {
    m = 1;
    n = a.dim(0);
  } else if (a.ndim() == 2) {
    m = a.dim(0);
    n = a.dim(1);
  } else {
    throw ShapeError("row op: want 1-D or 2-D, got " + shape_str(a.shape()));
  }
  if (n == 0) throw ShapeError("row op: zero-length rows");
}

}  // namespace

Tensor softmax_rows(const Tensor& a) {
  std::int64_t m, n;
  as_rows(a, m, n);
  auto out = new_node("softmax_rows", a.shape(), static_cast<std::size_t>(m * n));
  for (std::int64_t i = 0; i < m; ++i) {
    const double* x = a.data() + i * n;
    double* y = out->data.data() + i * n;
    double mx = x[0];
    for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
    double s = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
      y[j] = std::exp(x[j] - mx);
      s += y[j];
    }
    const double inv = 1.0 / s;
    for (std::int64_t j = 0; j < n; ++j) y[j] *= inv;
  }
  check_finite(*out);
  if (wants_grad({&a})) {
    Node* self = out.get();
    Node* na = a.node().get();
    attach(out, {&a}, [self, na, m, n]() {
      na->ensure_grad();
      for (std::int64_t i = 0; i < m; ++i) {
        const double* y = self->data.data() + i * n;
        const double* g = self->grad.data() + i * n;
        double* ga = na->grad.data() + i * n;
        double dot = 0.0;
        for (std::int64_t j = 0; j < n; ++j) dot += g[j] * y[j];
        for (std::int64_t j = 0; j < n; ++j) ga[j] += y[j] * (g[j] - dot);
      }
    });
  }
  return Tensor(out);
}

Tensor log_softmax_rows(const Tensor& a) {
  std::int64_t m, n;
  as_rows(a, m, n);
  auto out = new_node("log_softmax_rows", a.shape(), static_cast<std::size_t>(m * n));
  for (std::int64_t i = 0; i < m; ++i) {
    const double* x = a.data() + i * n;
    double* y = out->data.data() + i * n;
    double mx = x[0];
    for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
    double s = 0.0;
    for (std::int64_t j = 0; j < n; ++j) s += std::exp(x[j] - mx);
    const double lse = mx + std::log(s);
    for (std::int64_t j = 0; j < n; ++j) y[j] = x[j] - lse;
  }
  check_finite(*out);
  if (wants_grad({&a})) {
    Node* self = out.get();
    Node* na = a.node().get();
    attach(out, {&a}, [self, na, m, n]() {
      na->ensure_grad();
      for (std::int64_t i = 0; i < m; ++i) {
        const double* y = self->data.data() + i * n;
        const double* g = self->grad.data() + i * n;
        double* ga = na->grad.data() + i * n;
        double gsum = 0.0;
        for (std::int64_t j = 0; j < n; ++j) gsum += g[j];
        for (std::int64_t j = 0; j < n; ++j) ga[j] += g[j] - std::exp(y[j]) * gsum;
      }
    });
  }
  return Tensor(out);
}

Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
  std::int64_t m, n;
  as_rows(a, m, n);
  if (gain.size() != n || bias.size() != n)
    throw ShapeError("layer_norm: gain/bias size " + std::to_string(gain.size()) + "/" +
                     std::to_string(bias.size()) + " vs row length " + std::to_string(n));
  auto out = new_node("layer_norm", a.shape(), static_cast<std::size_t>(m * n));
  // Cache per-row mean and inverse stddev for the backward pass.
  auto stats = std::make_shared<std::vector<double>>(static_cast<std::size_t>(2 * m));
  const double* pg = gain.data();
  const double* pb = bias.data();
  for (std::int64_t i = 0; i < m; ++i) {
    const double* x = a.data() + i * n;
    double* y = out->data.data() + i * n;
    double mean = 0.0;
    for (std::int64_t j = 0; j < n; ++j) mean += x[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
      const double d = x[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    (*stats)[static_cast<std::size_t>(2 * i)] = mean;
    (*stats)[static_cast<std::size_t>(2 * i + 1)] = inv_std;
    for (std::int64_t j = 0; j < n; ++j) y[j] = (x[j] - mean) * inv_std * pg[j] + pb[j];
  }
  check_finite(*out);
  if (wants_grad({&a, &gain, &bias})) {
    Node* self = out.get();
    Node* na = a.node().get();
    Node* ng = gain.node().get();
    Node* nb = bias.node().get();
    attach(out, {&a, &gain, &bias}, [self, na, ng, nb, stats, m, n]() {
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::int64_t i = 0; i < m; ++i) {
        const double mean = (*stats)[static_cast<std::size_t>(2 * i)];
        const double inv_std = (*stats)[static_cast<std::size_t>(2 * i + 1)];
        const double* x = na->data.data() + i * n;
        const double* g = self->grad.data() + i * n;
        if (ng->requires_grad || nb->requires_grad) {
          ng->ensure_grad();
          nb->ensure_grad();
          for (std::int64_t j = 0; j < n; ++j) {
            const double xhat = (x[j] - mean) * inv_std;
            if (ng->requires_grad) ng->grad[static_cast<std::size_t>(j)] += g[j] * xhat;
            if (nb->requires_grad) nb->grad[static_cast<std::size_t>(j)] += g[j];
          }
        }
        if (na->requires_grad) {
          na->ensure_grad();
          double* ga = na->grad.data() + i * n;
          // dxhat_j = g_j * gain_j; dx = inv_std*(dxhat - mean(dxhat) - xhat*mean(dxhat*xhat))
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          const double* gaindat = ng->data.data();
          for (std::int64_t j = 0; j < n; ++j) {
            const double xhat = (x[j] - mean) * inv_std;
            const double dxhat = g[j] * gaindat[j];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
          }
          sum_dxhat *= inv_n;
          sum_dxhat_xhat *= inv_n;
          for (std::int64_t j = 0; j < n; ++j) {
            const double xhat = (x[j] - mean) * inv_std;
            const double dxhat = g[j] * gaindat[j];
            ga[j] += inv_std * (dxhat - sum_dxhat - xhat * sum_dxhat_xhat);
          }
        }
      }
    });
  }
  return Tensor(out);
}

Tensor l2_normalize_rows(const Tensor& a, double eps) {
  std::int64_t m, n;
  as_rows(a, m, n);
  auto out = new_node("l2_normalize", a.shape(), static_cast<std::size_t>(m * n));
  auto norms = std::make_shared<std::vector<double>>(static_cast<std::size_t>(m));
  for (std::int64_t i = 0; i < m; ++i) {
    const double* x = a.data() + i * n;
    double* y = out->data.data() + i * n;
    double s = 0.0;
    for (std::int64_t j = 0; j < n; ++j) s += x[j] * x[j];
    const double norm = std::sqrt(s + eps);
    (*norms)[static_cast<std::size_t>(i)] = norm;
    const double inv = 1.0 / norm;
    for (std::int64_t j = 0; j < n; ++j) y[j] = x[j] * inv;
  }
  check_finite(*out);
  if (wants_grad({&a})) {
    Node* self = out.get();
    Node* na = a.node().get();
    attach(out, {&a}, [self, na, norms, m, n]() {
      na->ensure_grad();
      for (std::int64_t i = 0; i < m; ++i) {
        const double norm = (*norms)[static_cast<std::size_t>(i)];
        const double inv = 1.0 / norm;
        const double* x = na->data.data() + i * n;
        const double* g = self->grad.data() + i * n;
        double* ga = na->grad.data() + i * n;
        double gx = 0.0;
        for (std::int64_t j = 0; j < n; ++j) gx += g[j] * x[j];
        const double c = gx * inv * inv * inv;
        for (std::int64_t j = 0; j < n; ++j) ga[j] += g[j] * inv - x[j] * c;
      }
    });
  }
  return Tensor(out);
}

Tensor segment_max_rows(const Tensor& a, std::int64_t group_size) {
  require_2d("segment_max_rows", a);
  const std::int64_t m = a.rows(), n = a.cols();
  if (group_size <= 0 || m % group_size != 0)
    throw ShapeError("segment_max_rows: " + std::to_string(m) + " rows not divisible by group " +
                     std::to_string(group_size));
  const std::int64_t g = m / group_size;
  auto out = new_node("segment_max_rows", {g, n}, static_cast<std::size_t>(g * n));
  auto argmax = std::make_shared<std::vector<std::int32_t>>(static_cast<std::size_t>(g * n));
  for (std::int64_t s = 0; s < g; ++s) {
    const double* base = a.data() + s * group_size * n;
    double* y = out->data.data() + s * n;
    std::int32_t* am = argmax->data() + s * n;
    for (std::int64_t j = 0; j < n; ++j) {
      y[j] = base[j];
      am[j] = 0;
    }
    for (std::int64_t r = 1; r < group_size; ++r) {
      const double* row = base + r * n;
      for (std::int64_t j = 0; j < n; ++j) {
        if (row[j] > y[j]) {
          y[j] = row[j];
          am[j] = static_cast<std::int32_t>(r);
        }
      }
    }
  }
  check_finite(*out);
  if (wants_grad({&a})) {
    Node* self = out.get();
    Node* na = a.node().get();
    attach(out, {&a}, [self, na, argmax, g, group_size, n]() {
      na->ensure_grad();
      for (std::int64_t s = 0; s < g; ++s) {
        const double* grad = self->grad.data() + s * n;
        const std::int32_t* am = argmax->data() + s * n;
        double* base = na->grad.data() + s * group_size * n;
        for (std::int64_t j = 0; j < n; ++j) base[am[j] * n + j] += grad[j];
      }
    });
  }
  return Tensor(out);
}

Tensor dropout(const Tensor& a, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0) return a;
  const auto n = static_cast<std::size_t>(a.size());
  const double keep = 1.0 - rate;
  const double scale = 1.0 / keep;
  auto mask = std::make_shared<std::vector<double>>(n);
  auto out = new_node("dropout", a.shape(), n);
  const double* pa = a.data();
  for (std::size_t i = 0; i < n; ++i) {
    (*mask)[i] = rng.uniform() < keep ? scale : 0.0;
    out->data[i] = pa[i] * (*mask)[i];
  }
  if (wants_grad({&a})) {
    Node* self = out.get();
    Node* na = a.node().get();
    attach(out, {&a}, [self, na, mask, n]() {
      na->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) na->grad[i] += self->grad[i] * (*mask)[i];
    });
  }
  return Tensor(out);
}

}  // namespace wg
