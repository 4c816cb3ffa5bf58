// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#include "wildground/nn.hpp"

#include <cmath>

namespace wg {

Tensor ParamStore::create(const std::string& name, Shape shape, Rng& rng, double bound) {
  if (has(name)) throw ConfigError("parameter '" + name + "' registered twice");
  Tensor t = Tensor::uniform(std::move(shape), rng, -bound, bound);
  t.set_requires_grad(true);
  index_[name] = params_.size();
  params_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::create_const(const std::string& name, Shape shape, double value) {
  if (has(name)) throw ConfigError("parameter '" + name + "' registered twice");
  Tensor t = Tensor::full(std::move(shape), value);
  t.set_requires_grad(true);
  index_[name] = params_.size();
  params_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return params_[it->second].second;
}

std::int64_t ParamStore::numel() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

void ParamStore::load_values(const std::string& name, const Shape& shape,
                             const std::vector<double>& values) {
  Tensor t = get(name);
  if (t.shape() != shape)
    throw ShapeError("parameter '" + name + "': checkpoint shape " + shape_str(shape) +
                     " vs model shape " + shape_str(t.shape()));
  std::copy(values.begin(), values.end(), t.data());
}

Linear::Linear(ParamStore& store, const std::string& prefix, std::int64_t in, std::int64_t out,
               Rng& rng)
    : in_(in), out_(out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight_ = store.create(prefix + ".weight", {in, out}, rng, bound);
  bias_ = store.create(prefix + ".bias", {out}, rng, bound);
}

Tensor Linear::forward(const Tensor& x) const {
  return add_bias_rows(matmul(x, weight_), bias_);
}

LayerNorm::LayerNorm(ParamStore& store, const std::string& prefix, std::int64_t dim) {
  gain_ = store.create_const(prefix + ".gain", {dim}, 1.0);
  bias_ = store.create_const(prefix + ".bias", {dim}, 0.0);
}

Tensor LayerNorm::forward(const Tensor& x) const { return layer_norm_rows(x, gain_, bias_); }

FeedForward::FeedForward(ParamStore& store, const std::string& prefix, std::int64_t dim,
                         std::int64_t hidden, double dropout_rate, Rng& rng)
    : lin1_(store, prefix + ".lin1", dim, hidden, rng),
      lin2_(store, prefix + ".lin2", hidden, dim, rng),
      rate_(dropout_rate) {}

Tensor FeedForward::forward(const Tensor& x, const Context& ctx) const {
  Tensor h = relu(lin1_.forward(x));
  if (ctx.training && rate_ > 0.0) h = dropout(h, rate_, true, *ctx.rng);
  return lin2_.forward(h);
}

MultiHeadAttention::MultiHeadAttention(ParamStore& store, const std::string& prefix,
                                       std::int64_t dim, std::int64_t heads, Rng& rng)
    : dim_(dim), heads_(heads) {
  if (heads <= 0 || dim % heads != 0)
    throw ConfigError("attention: dim " + std::to_string(dim) + " not divisible by heads " +
                      std::to_string(heads));
  out_proj_ = Linear(store, prefix + ".out_proj", dim, dim, rng);
}

Tensor MultiHeadAttention::forward(const Tensor& q, const Tensor& k, const Tensor& v) const {
  if (q.cols() != dim_ || k.cols() != dim_ || v.cols() != dim_)
    throw ShapeError("attention: feature dim mismatch, q " + shape_str(q.shape()) + " k " +
                     shape_str(k.shape()) + " v " + shape_str(v.shape()) + " want dim " +
                     std::to_string(dim_));
  if (k.rows() != v.rows())
    throw ShapeError("attention: k rows " + std::to_string(k.rows()) + " != v rows " +
                     std::to_string(v.rows()));
  const std::int64_t dh = dim_ / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> head_outs;
  head_outs.reserve(static_cast<std::size_t>(heads_));
  for (std::int64_t h = 0; h < heads_; ++h) {
    const std::int64_t b = h * dh, e = (h + 1) * dh;
    Tensor qh = slice_cols(q, b, e);
    Tensor kh = slice_cols(k, b, e);
    Tensor vh = slice_cols(v, b, e);
    Tensor logits = mul_scalar(matmul(qh, transpose(kh)), scale);
    Tensor weights = softmax_rows(logits);
    head_outs.push_back(matmul(weights, vh));
  }
  return out_proj_.forward(concat_cols(head_outs));
}

AttentionBlock::AttentionBlock(ParamStore& store, const std::string& prefix, std::int64_t dim,
                               std::int64_t heads, std::int64_t ffn_hidden, double dropout_rate,
                               Rng& rng)
    : att_(store, prefix + ".att", dim, heads, rng),
      ffn_(store, prefix + ".ffn", dim, ffn_hidden, dropout_rate, rng),
      norm_(store, prefix + ".norm", dim) {}

Tensor AttentionBlock::forward(const Tensor& x, const Tensor& kv, const Context& ctx) const {
  Tensor a = add(att_.forward(x, kv, kv), x);
  return norm_.forward(add(ffn_.forward(a, ctx), a));
}

Mlp2::Mlp2(ParamStore& store, const std::string& prefix, std::int64_t in, std::int64_t hidden,
           std::int64_t out, Rng& rng)
    : lin1_(store, prefix + ".lin1", in, hidden, rng),
      lin2_(store, prefix + ".lin2", hidden, out, rng) {}

Tensor Mlp2::forward(const Tensor& x) const { return lin2_.forward(relu(lin1_.forward(x))); }

Embedding::Embedding(ParamStore& store, const std::string& prefix, std::int64_t vocab,
                     std::int64_t dim, Rng& rng)
    : vocab_(vocab) {
  table_ = store.create(prefix + ".table", {vocab, dim}, rng, 0.5);
}

Tensor Embedding::forward(const std::vector<std::int64_t>& ids) const {
  for (auto id : ids)
    if (id < 0 || id >= vocab_)
      throw ConfigError("embedding: token id " + std::to_string(id) + " outside vocabulary of " +
                        std::to_string(vocab_));
  return gather_rows(table_, ids);
}

}  // namespace wg
