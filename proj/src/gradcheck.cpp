// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#include "wildground/gradcheck.hpp"

#include <algorithm>

#include "wildground/geometry.hpp"
#include "wildground/losses.hpp"
#include "wildground/model.hpp"
#include "wildground/nn.hpp"
#include "wildground/ops.hpp"

namespace wg {

namespace {
// Test fixture: perturb analytic gradients so the comparison must fail.
thread_local bool g_corrupt_gradients = false;
}  // namespace

double fd_max_rel_err(const std::vector<Tensor>& inputs, const std::function<Tensor()>& forward,
                      FdOptions opt, Rng* coord_rng) {
  for (const auto& t : inputs) {
    if (!t.requires_grad()) throw ConfigError("fd check: input does not require grad");
    const_cast<Tensor&>(t).zero_grad();
  }
  Tensor loss = forward();
  if (loss.size() != 1) throw ShapeError("fd check: forward must return a scalar");
  loss.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (const auto& t : inputs) analytic.push_back(t.grad());
  if (g_corrupt_gradients && !analytic.empty() && !analytic[0].empty())
    analytic[0][0] += 0.5 * (std::fabs(analytic[0][0]) + 1.0);

  auto eval = [&]() {
    NoGrad ng;
    return forward().item();
  };

  double worst = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    double* x = const_cast<Tensor&>(inputs[t]).data();
    const auto n = static_cast<std::size_t>(inputs[t].size());
    std::vector<std::size_t> coords;
    if (opt.max_coords_per_input > 0 && n > static_cast<std::size_t>(opt.max_coords_per_input)) {
      if (!coord_rng) throw ConfigError("fd check: coordinate sampling needs an rng");
      for (int i = 0; i < opt.max_coords_per_input; ++i)
        coords.push_back(static_cast<std::size_t>(coord_rng->uniform_int(n)));
    } else {
      coords.resize(n);
      for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    }
    for (std::size_t i : coords) {
      const double orig = x[i];
      x[i] = orig + opt.h;
      const double fp = eval();
      x[i] = orig - opt.h;
      const double fm = eval();
      x[i] = orig;
      const double fd = (fp - fm) / (2.0 * opt.h);
      worst = std::max(worst, rel_err(fd, analytic[t][i]));
    }
  }
  return worst;
}

namespace {

Tensor grad_input(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::uniform(std::move(shape), rng, lo, hi);
  t.set_requires_grad(true);
  return t;
}

using CaseVec = std::vector<GradCheckCase>;

void add_core_cases(CaseVec& cases) {
  auto unary_case = [](const char* name, std::function<Tensor(const Tensor&)> op, double lo,
                       double hi) {
    return GradCheckCase{name, "core", [op = std::move(op), lo, hi](Rng& rng) {
                           Tensor x = grad_input({4, 5}, rng, lo, hi);
                           Tensor y = op(x);
                           Tensor w = Tensor::uniform(y.shape(), rng, -1.0, 1.0);
                           auto fwd = [&]() { return sum_all(mul(op(x), w)); };
                           return fd_max_rel_err({x}, fwd);
                         }};
  };
  cases.push_back(unary_case("exp", [](const Tensor& x) { return exp_op(x); }, -1.0, 1.0));
  cases.push_back(unary_case("log", [](const Tensor& x) { return log_op(x); }, 0.2, 2.0));
  cases.push_back(unary_case("abs", [](const Tensor& x) { return abs_op(x); }, -1.0, 1.0));
  cases.push_back(unary_case("relu", [](const Tensor& x) { return relu(x); }, -1.0, 1.0));
  cases.push_back(unary_case("sigmoid", [](const Tensor& x) { return sigmoid(x); }, -3.0, 3.0));
  cases.push_back(unary_case("softplus", [](const Tensor& x) { return softplus(x); }, -3.0, 3.0));
  cases.push_back(
      unary_case("add_scalar", [](const Tensor& x) { return add_scalar(x, 0.7); }, -1.0, 1.0));
  cases.push_back(
      unary_case("mul_scalar", [](const Tensor& x) { return mul_scalar(x, -1.3); }, -1.0, 1.0));
  cases.push_back(
      unary_case("transpose", [](const Tensor& x) { return transpose(x); }, -1.0, 1.0));
  cases.push_back(unary_case(
      "softmax", [](const Tensor& x) { return softmax_rows(mul_scalar(x, 3.0)); }, -1.0, 1.0));
  cases.push_back(unary_case(
      "log_softmax", [](const Tensor& x) { return log_softmax_rows(mul_scalar(x, 3.0)); }, -1.0,
      1.0));
  cases.push_back(
      unary_case("l2_normalize", [](const Tensor& x) { return l2_normalize_rows(x); }, 0.2, 1.0));
  cases.push_back(unary_case(
      "slice_rows", [](const Tensor& x) { return slice_rows(x, 1, 3); }, -1.0, 1.0));
  cases.push_back(unary_case(
      "slice_cols", [](const Tensor& x) { return slice_cols(x, 2, 5); }, -1.0, 1.0));
  cases.push_back(unary_case(
      "mean_rows", [](const Tensor& x) { return mean_rows(x); }, -1.0, 1.0));
  cases.push_back(unary_case(
      "gather_rows", [](const Tensor& x) { return gather_rows(x, {2, 0, 2, 3}); }, -1.0, 1.0));

  auto binary_case = [](const char* name, std::function<Tensor(const Tensor&, const Tensor&)> op,
                        double blo, double bhi) {
    return GradCheckCase{name, "core", [op = std::move(op), blo, bhi](Rng& rng) {
                           Tensor a = grad_input({3, 4}, rng);
                           Tensor b = grad_input({3, 4}, rng, blo, bhi);
                           Tensor w = Tensor::uniform({3, 4}, rng, -1.0, 1.0);
                           auto fwd = [&]() { return sum_all(mul(op(a, b), w)); };
                           return fd_max_rel_err({a, b}, fwd);
                         }};
  };
  cases.push_back(binary_case("add", [](const Tensor& a, const Tensor& b) { return add(a, b); },
                              -1.0, 1.0));
  cases.push_back(binary_case("sub", [](const Tensor& a, const Tensor& b) { return sub(a, b); },
                              -1.0, 1.0));
  cases.push_back(binary_case("mul", [](const Tensor& a, const Tensor& b) { return mul(a, b); },
                              -1.0, 1.0));
  cases.push_back(binary_case("div", [](const Tensor& a, const Tensor& b) { return div(a, b); },
                              0.4, 1.6));
  cases.push_back(binary_case(
      "min_elem", [](const Tensor& a, const Tensor& b) { return min_elem(a, b); }, -1.0, 1.0));
  cases.push_back(binary_case(
      "max_elem", [](const Tensor& a, const Tensor& b) { return max_elem(a, b); }, -1.0, 1.0));

  cases.push_back({"matmul", "core", [](Rng& rng) {
                     Tensor a = grad_input({3, 4}, rng);
                     Tensor b = grad_input({4, 2}, rng);
                     Tensor w = Tensor::uniform({3, 2}, rng, -1.0, 1.0);
                     auto fwd = [&]() { return sum_all(mul(matmul(a, b), w)); };
                     return fd_max_rel_err({a, b}, fwd);
                   }});
  cases.push_back({"sum_all", "core", [](Rng& rng) {
                     Tensor x = grad_input({4, 3}, rng);
                     auto fwd = [&]() { return sum_all(x); };
                     return fd_max_rel_err({x}, fwd);
                   }});
  cases.push_back({"mean_all", "core", [](Rng& rng) {
                     Tensor x = grad_input({4, 3}, rng);
                     auto fwd = [&]() { return mean_all(x); };
                     return fd_max_rel_err({x}, fwd);
                   }});
  cases.push_back({"add_bias_rows", "core", [](Rng& rng) {
                     Tensor x = grad_input({4, 5}, rng);
                     Tensor b = grad_input({5}, rng);
                     Tensor w = Tensor::uniform({4, 5}, rng, -1.0, 1.0);
                     auto fwd = [&]() { return sum_all(mul(add_bias_rows(x, b), w)); };
                     return fd_max_rel_err({x, b}, fwd);
                   }});
  cases.push_back({"concat_rows", "core", [](Rng& rng) {
                     Tensor a = grad_input({2, 4}, rng);
                     Tensor b = grad_input({3, 4}, rng);
                     Tensor w = Tensor::uniform({5, 4}, rng, -1.0, 1.0);
                     auto fwd = [&]() { return sum_all(mul(concat_rows({a, b}), w)); };
                     return fd_max_rel_err({a, b}, fwd);
                   }});
  cases.push_back({"concat_cols", "core", [](Rng& rng) {
                     Tensor a = grad_input({3, 2}, rng);
                     Tensor b = grad_input({3, 4}, rng);
                     Tensor w = Tensor::uniform({3, 6}, rng, -1.0, 1.0);
                     auto fwd = [&]() { return sum_all(mul(concat_cols({a, b}), w)); };
                     return fd_max_rel_err({a, b}, fwd);
                   }});
  cases.push_back({"layer_norm", "core", [](Rng& rng) {
                     Tensor x = grad_input({4, 8}, rng);
                     Tensor gain = grad_input({8}, rng, 0.5, 1.5);
                     Tensor bias = grad_input({8}, rng, -0.5, 0.5);
                     Tensor w = Tensor::uniform({4, 8}, rng, -1.0, 1.0);
                     auto fwd = [&]() { return sum_all(mul(layer_norm_rows(x, gain, bias), w)); };
                     return fd_max_rel_err({x, gain, bias}, fwd);
                   }});
  cases.push_back({"segment_max", "core", [](Rng& rng) {
                     // Keep group maxima well separated from runners-up so the
                     // finite-difference step cannot flip the argmax.
                     Tensor x;
                     bool ok = false;
                     while (!ok) {
                       x = Tensor::uniform({12, 5}, rng, -1.0, 1.0);
                       ok = true;
                       for (int g = 0; g < 4 && ok; ++g)
                         for (int j = 0; j < 5 && ok; ++j) {
                           double top = -2.0, second = -2.0;
                           for (int r = 0; r < 3; ++r) {
                             const double v = x.data()[(g * 3 + r) * 5 + j];
                             if (v > top) {
                               second = top;
                               top = v;
                             } else if (v > second) {
                               second = v;
                             }
                           }
                           if (top - second < 1e-3) ok = false;
                         }
                     }
                     x.set_requires_grad(true);
                     Tensor w = Tensor::uniform({4, 5}, rng, -1.0, 1.0);
                     auto fwd = [&]() { return sum_all(mul(segment_max_rows(x, 3), w)); };
                     return fd_max_rel_err({x}, fwd);
                   }});
  cases.push_back({"dropout", "core", [](Rng& rng) {
                     Tensor x = grad_input({4, 6}, rng);
                     Tensor w = Tensor::uniform({4, 6}, rng, -1.0, 1.0);
                     const std::uint64_t mask_seed = rng.next_u64();
                     auto fwd = [&]() {
                       Rng mask_rng(mask_seed);
                       return sum_all(mul(dropout(x, 0.3, true, mask_rng), w));
                     };
                     return fd_max_rel_err({x}, fwd);
                   }});
  cases.push_back({"linear", "core", [](Rng& rng) {
                     ParamStore store;
                     Linear lin(store, "lin", 5, 3, rng);
                     Tensor x = grad_input({4, 5}, rng);
                     Tensor w = Tensor::uniform({4, 3}, rng, -1.0, 1.0);
                     auto fwd = [&]() { return sum_all(mul(lin.forward(x), w)); };
                     std::vector<Tensor> inputs{x};
                     for (const auto& [name, p] : store.all()) inputs.push_back(p);
                     return fd_max_rel_err(inputs, fwd);
                   }});
  cases.push_back({"feed_forward", "core", [](Rng& rng) {
                     ParamStore store;
                     FeedForward ffn(store, "ffn", 6, 4, 0.1, rng);
                     Tensor x = grad_input({3, 6}, rng);
                     Tensor w = Tensor::uniform({3, 6}, rng, -1.0, 1.0);
                     Context ctx;  // eval mode: dropout off
                     auto fwd = [&]() { return sum_all(mul(ffn.forward(x, ctx), w)); };
                     std::vector<Tensor> inputs{x};
                     for (const auto& [name, p] : store.all()) inputs.push_back(p);
                     return fd_max_rel_err(inputs, fwd);
                   }});
  cases.push_back({"attention", "core", [](Rng& rng) {
                     ParamStore store;
                     MultiHeadAttention att(store, "att", 8, 2, rng);
                     Tensor q = grad_input({3, 8}, rng);
                     Tensor k = grad_input({4, 8}, rng);
                     Tensor v = grad_input({4, 8}, rng);
                     Tensor w = Tensor::uniform({3, 8}, rng, -1.0, 1.0);
                     auto fwd = [&]() { return sum_all(mul(att.forward(q, k, v), w)); };
                     std::vector<Tensor> inputs{q, k, v};
                     for (const auto& [name, p] : store.all()) inputs.push_back(p);
                     return fd_max_rel_err(inputs, fwd);
                   }});
  cases.push_back({"attention_block", "core", [](Rng& rng) {
                     ParamStore store;
                     AttentionBlock block(store, "blk", 8, 2, 6, 0.1, rng);
                     Tensor x = grad_input({3, 8}, rng);
                     Tensor kv = grad_input({5, 8}, rng);
                     Tensor w = Tensor::uniform({3, 8}, rng, -1.0, 1.0);
                     Context ctx;
                     auto fwd = [&]() { return sum_all(mul(block.forward(x, kv, ctx), w)); };
                     std::vector<Tensor> inputs{x, kv};
                     for (const auto& [name, p] : store.all()) inputs.push_back(p);
                     return fd_max_rel_err(inputs, fwd);
                   }});
  cases.push_back({"embedding", "core", [](Rng& rng) {
                     ParamStore store;
                     Embedding emb(store, "emb", 7, 5, rng);
                     Tensor w = Tensor::uniform({4, 5}, rng, -1.0, 1.0);
                     auto fwd = [&]() { return sum_all(mul(emb.forward({1, 3, 3, 6}), w)); };
                     std::vector<Tensor> inputs;
                     for (const auto& [name, p] : store.all()) inputs.push_back(p);
                     return fd_max_rel_err(inputs, fwd);
                   }});
}

void add_geometry_cases(CaseVec& cases) {
  cases.push_back({"aabb_giou", "geometry", [](Rng& rng) {
                     // Avoid pairs whose intersection sits within the FD step
                     // of a min/max/relu kink.
                     Box3D gt;
                     Tensor center, size;
                     bool ok = false;
                     while (!ok) {
                       gt.x = rng.uniform(-1, 1);
                       gt.y = rng.uniform(-1, 1);
                       gt.z = rng.uniform(-1, 1);
                       gt.l = rng.uniform(0.5, 2.0);
                       gt.w = rng.uniform(0.5, 2.0);
                       gt.h = rng.uniform(0.5, 2.0);
                       center = Tensor::from({1, 3}, {gt.x + rng.uniform(-0.8, 0.8),
                                                      gt.y + rng.uniform(-0.8, 0.8),
                                                      gt.z + rng.uniform(-0.8, 0.8)});
                       size = Tensor::from({1, 3}, {rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0),
                                                    rng.uniform(0.5, 2.0)});
                       ok = true;
                       for (int d = 0; d < 3; ++d) {
                         const double pc = center.data()[d], ps = size.data()[d];
                         const double gc = d == 0 ? gt.x : (d == 1 ? gt.y : gt.z);
                         const double ge = d == 0 ? gt.l : (d == 1 ? gt.w : gt.h);
                         const double overlap =
                             std::min(pc + ps / 2, gc + ge / 2) - std::max(pc - ps / 2, gc - ge / 2);
                         if (std::fabs(overlap) < 1e-3) ok = false;
                         // keep min/max winners clear of ties as well
                         if (std::fabs((pc + ps / 2) - (gc + ge / 2)) < 1e-3) ok = false;
                         if (std::fabs((pc - ps / 2) - (gc - ge / 2)) < 1e-3) ok = false;
                       }
                     }
                     center.set_requires_grad(true);
                     size.set_requires_grad(true);
                     auto fwd = [&]() { return aabb_giou_t(center, size, gt); };
                     return fd_max_rel_err({center, size}, fwd);
                   }});
}
ModelConfig gradcheck_model_config() {
  ModelConfig cfg;
  cfg.dim = 12;
  cfg.heads = 2;
  cfg.ffn_dim = 8;
  cfg.dropout = 0.0;
  cfg.dve_layers = 1;
  cfg.tfi_layers = 1;
  cfg.decoder_layers = 1;
  cfg.frames = 2;
  cfg.queries = 3;
  cfg.proj_dim = 6;
  return cfg;
}

void add_model_cases(CaseVec& cases) {
  cases.push_back({"dynamic_encoder", "model", [](Rng& rng) {
                     ParamStore store;
                     ModelConfig cfg = gradcheck_model_config();
                     DynamicVisualEncoder dve(store, "dve", cfg, rng);
                     Tensor cur = grad_input({4, cfg.dim}, rng);
                     Tensor prev = grad_input({5, cfg.dim}, rng);
                     Tensor pos = grad_input({5, cfg.dim}, rng, -0.5, 0.5);
                     Tensor w = Tensor::uniform({4, cfg.dim}, rng, -1.0, 1.0);
                     Context ctx;
                     auto fwd = [&]() {
                       return sum_all(mul(dve.forward(cur, {prev}, {pos}, ctx), w));
                     };
                     std::vector<Tensor> inputs{cur, prev, pos};
                     for (const auto& [name, p] : store.all()) inputs.push_back(p);
                     return fd_max_rel_err(inputs, fwd);
                   }});
  for (FusionMode mode : {FusionMode::kOurs, FusionMode::kVisionFirst, FusionMode::kImageDominant,
                          FusionMode::kConcat}) {
    cases.push_back({"tfi_" + to_string(mode), "model", [mode](Rng& rng) {
                       ParamStore store;
                       ModelConfig cfg = gradcheck_model_config();
                       cfg.fusion = mode;
                       TripleModalInteraction tfi(store, "tfi", cfg, rng);
                       Tensor f_p = grad_input({4, cfg.dim}, rng);
                       Tensor f_i = grad_input({3, cfg.dim}, rng);
                       Tensor f_l = grad_input({3, cfg.dim}, rng);
                       Tensor wv = Tensor::uniform({4, cfg.dim}, rng, -1.0, 1.0);
                       Tensor wl = Tensor::uniform({3, cfg.dim}, rng, -1.0, 1.0);
                       Context ctx;
                       auto fwd = [&]() {
                         auto [f_v, f_lv] = tfi.forward(f_p, f_i, f_l, ctx);
                         return add(sum_all(mul(f_v, wv)), sum_all(mul(f_lv, wl)));
                       };
                       std::vector<Tensor> inputs{f_p, f_i, f_l};
                       for (const auto& [name, p] : store.all()) inputs.push_back(p);
                       return fd_max_rel_err(inputs, fwd);
                     }});
  }
  cases.push_back({"decoder_layer", "model", [](Rng& rng) {
                     ParamStore store;
                     ModelConfig cfg = gradcheck_model_config();
                     DecoderLayer layer(store, "dec", cfg, rng);
                     Tensor q = grad_input({3, cfg.dim}, rng);
                     Tensor f_lv = grad_input({4, cfg.dim}, rng);
                     Tensor f_v = grad_input({5, cfg.dim}, rng);
                     Tensor w = Tensor::uniform({3, cfg.dim}, rng, -1.0, 1.0);
                     Context ctx;
                     auto fwd = [&]() {
                       return sum_all(mul(layer.forward(q, f_lv, f_v, ctx), w));
                     };
                     std::vector<Tensor> inputs{q, f_lv, f_v};
                     for (const auto& [name, p] : store.all()) inputs.push_back(p);
                     return fd_max_rel_err(inputs, fwd);
                   }});
}

void add_loss_cases(CaseVec& cases) {
  cases.push_back({"focal", "loss", [](Rng& rng) {
                     Tensor scores = grad_input({8, 1}, rng, 0.05, 0.95);
                     std::vector<bool> mask;
                     for (int i = 0; i < 8; ++i) mask.push_back(rng.bernoulli(0.4));
                     auto fwd = [&]() { return focal_confidence_loss(scores, mask); };
                     return fd_max_rel_err({scores}, fwd);
                   }});
  cases.push_back({"box_terms", "loss", [](Rng& rng) {
                     // Keep every |pred - gt| and every interval endpoint away
                     // from the FD step so abs/min/max kinks cannot bite.
                     Box3D gt{0.0, 0.0, 0.0, 1.0, 1.2, 0.8, 0.0};
                     Tensor params;
                     bool ok = false;
                     while (!ok) {
                       std::vector<double> v = {rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6),
                                                rng.uniform(-0.6, 0.6), rng.uniform(0.5, 1.8),
                                                rng.uniform(0.5, 1.8),  rng.uniform(0.5, 1.8)};
                       const double g[6] = {gt.x, gt.y, gt.z, gt.l, gt.w, gt.h};
                       ok = true;
                       for (int d = 0; d < 3 && ok; ++d) {
                         if (std::fabs(v[static_cast<std::size_t>(d)] - g[d]) < 1e-3) ok = false;
                         if (std::fabs(v[static_cast<std::size_t>(d + 3)] - g[d + 3]) < 1e-3)
                           ok = false;
                         const double plo = v[static_cast<std::size_t>(d)] -
                                            0.5 * v[static_cast<std::size_t>(d + 3)];
                         const double phi = v[static_cast<std::size_t>(d)] +
                                            0.5 * v[static_cast<std::size_t>(d + 3)];
                         const double glo = g[d] - 0.5 * g[d + 3], ghi = g[d] + 0.5 * g[d + 3];
                         if (std::fabs(plo - glo) < 1e-3 || std::fabs(phi - ghi) < 1e-3) ok = false;
                         if (std::fabs(std::min(phi, ghi) - std::max(plo, glo)) < 1e-3) ok = false;
                       }
                       params = Tensor::from({1, 6}, std::move(v));
                     }
                     params.set_requires_grad(true);
                     auto fwd = [&]() {
                       auto [l_box, l_giou] = box_losses(params, 0, gt);
                       return add(l_box, l_giou);
                     };
                     return fd_max_rel_err({params}, fwd);
                   }});
  cases.push_back({"contrastive", "loss", [](Rng& rng) {
                     const std::int64_t n = 3, d = 5;
                     Tensor q = grad_input({n, d}, rng, 0.2, 1.0);
                     Tensor wp = grad_input({4, d}, rng, 0.2, 1.0);
                     MatchResult m;
                     m.query = static_cast<std::int64_t>(rng.uniform_int(n));
                     std::vector<TokenSpan> spans = {{0, 2}, {2, 3}, {3, 4}};
                     auto fwd = [&]() {
                       return contrastive_loss(l2_normalize_rows(q), l2_normalize_rows(wp), m,
                                               spans, 0.07);
                     };
                     return fd_max_rel_err({q, wp}, fwd);
                   }});
  cases.push_back({"soft_token", "loss", [](Rng& rng) {
                     Tensor logits = grad_input({3, 5}, rng);
                     MatchResult m;
                     m.query = static_cast<std::int64_t>(rng.uniform_int(3));
                     std::vector<TokenSpan> spans = {{0, 2}, {2, 4}, {4, 5}};
                     auto fwd = [&]() { return soft_token_loss(logits, m, spans.front(), spans); };
                     return fd_max_rel_err({logits}, fwd);
                   }});
  cases.push_back({"objective", "loss", [](Rng& rng) {
                     // End-to-end: the total loss through the whole model,
                     // probing a random pair of coordinates per parameter.
                     ParamStore store;
                     ModelConfig cfg = gradcheck_model_config();
                     cfg.dim = 24;  // divisible by 6 for the 3-D embedding
                     cfg.heads = 4;
                     cfg.proj_dim = 6;
                     cfg.pointnet.s1 = 12;
                     cfg.pointnet.s2 = 6;
                     cfg.pointnet.neighbors = 4;
                     cfg.pointnet.mlp1_hidden = 6;
                     cfg.pointnet.mlp1_out = 8;
                     cfg.pointnet.mlp2_hidden = 12;
                     cfg.pointnet.mlp2_out = 24;
                     WildreferModel model(store, cfg, 8, rng);
                     SceneInput in;
                     for (int f = 0; f < cfg.frames; ++f) {
                       PointCloud pc;
                       for (int i = 0; i < 60; ++i) {
                         pc.xyz.push_back({static_cast<float>(rng.uniform(-3, 3)),
                                           static_cast<float>(rng.uniform(-3, 3)),
                                           static_cast<float>(rng.uniform(0, 2))});
                         pc.intensity.push_back(static_cast<float>(rng.uniform(0, 1)));
                       }
                       in.clouds.push_back(std::move(pc));
                       Image img;
                       img.h = 32;
                       img.w = 32;
                       img.rgb.resize(32 * 32 * 3);
                       for (auto& c : img.rgb) c = static_cast<float>(rng.uniform(0, 1));
                       in.images.push_back(std::move(img));
                     }
                     in.token_ids = {1, 2, 3, 0};
                     in.spans = {{0, 2}, {2, 3}, {3, 4}};
                     Context ctx;
                     Predictions warmup = model.forward(in, ctx);
                     Box3D gt;
                     gt.x = warmup.seed_positions[0][0];
                     gt.y = warmup.seed_positions[0][1];
                     gt.z = warmup.seed_positions[0][2];
                     gt.l = 2.0;
                     gt.w = 2.0;
                     gt.h = 2.0;
                     auto fwd = [&]() {
                       Predictions p = model.forward(in, ctx);
                       return compute_losses(p, gt, LossWeights{}, cfg.temperature).total;
                     };
                     std::vector<Tensor> inputs;
                     for (const auto& [name, p] : store.all()) inputs.push_back(p);
                     FdOptions opt;
                     opt.max_coords_per_input = 2;
                     return fd_max_rel_err(inputs, fwd, opt, &rng);
                   }});
}

}  // namespace

const std::vector<GradCheckCase>& gradcheck_registry() {
  static const CaseVec cases = [] {
    CaseVec v;
    add_core_cases(v);
    add_geometry_cases(v);
    add_loss_cases(v);
    add_model_cases(v);
    return v;
  }();
  return cases;
}

std::vector<GradCheckReport> run_gradcheck(const std::string& scope, int instances, double tol,
                                           std::uint64_t seed, const std::string& corrupt_op) {
  std::vector<GradCheckReport> reports;
  Rng master(seed);
  for (const auto& c : gradcheck_registry()) {
    if (scope != "all" && scope != c.scope) continue;
    GradCheckReport rep;
    rep.name = c.name;
    rep.scope = c.scope;
    g_corrupt_gradients = (c.name == corrupt_op);
    Rng rng = master.child(std::hash<std::string>{}(c.name));
    for (int i = 0; i < instances; ++i) {
      rep.max_rel_err = std::max(rep.max_rel_err, c.run(rng));
      rep.instances += 1;
    }
    g_corrupt_gradients = false;
    rep.pass = rep.max_rel_err <= tol;
    reports.push_back(std::move(rep));
  }
  return reports;
}

}  // namespace wg
