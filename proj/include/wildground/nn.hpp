// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wildground/ops.hpp"
#include "wildground/tensor.hpp"

namespace wg {

// Named parameter registry. Insertion order is preserved so optimizer sweeps
// and checkpoints are deterministic.
class ParamStore {
 public:
  // uniform(-bound, bound) init
  Tensor create(const std::string& name, Shape shape, Rng& rng, double bound);
  Tensor create_const(const std::string& name, Shape shape, double value);

  bool has(const std::string& name) const { return index_.count(name) > 0; }
  Tensor get(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::int64_t numel() const;

  void zero_grad();
  // Overwrite a parameter's values in place (shape-checked), e.g. from a
  // checkpoint.
  void load_values(const std::string& name, const Shape& shape, const std::vector<double>& values);

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Per-forward context: training flag plus the RNG that feeds dropout masks.
struct Context {
  bool training = false;
  Rng* rng = nullptr;
};

class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& prefix, std::int64_t in, std::int64_t out, Rng& rng);
  Tensor forward(const Tensor& x) const;  // x: (m×in) -> (m×out)
  std::int64_t in_dim() const { return in_; }
  std::int64_t out_dim() const { return out_; }

 private:
  Tensor weight_;  // (in×out)
  Tensor bias_;    // (out)
  std::int64_t in_ = 0, out_ = 0;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamStore& store, const std::string& prefix, std::int64_t dim);
  Tensor forward(const Tensor& x) const;

 private:
  Tensor gain_, bias_;
};

// linear -> ReLU -> dropout -> linear
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(ParamStore& store, const std::string& prefix, std::int64_t dim,
              std::int64_t hidden, double dropout_rate, Rng& rng);
  Tensor forward(const Tensor& x, const Context& ctx) const;

 private:
  Linear lin1_, lin2_;
  double rate_ = 0.0;
};

// Multi-head scaled dot-product attention. q, k, v enter unprojected; the
// heads are column slices and only the output projection carries weights.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& store, const std::string& prefix, std::int64_t dim,
                     std::int64_t heads, Rng& rng);
  Tensor forward(const Tensor& q, const Tensor& k, const Tensor& v) const;

 private:
  Linear out_proj_;
  std::int64_t dim_ = 0, heads_ = 0;
};

// Attention block: A = ATT(x, kv, kv) + x; out = LN(FFN(A) + A).
class AttentionBlock {
 public:
  AttentionBlock() = default;
  AttentionBlock(ParamStore& store, const std::string& prefix, std::int64_t dim,
                 std::int64_t heads, std::int64_t ffn_hidden, double dropout_rate, Rng& rng);
  Tensor forward(const Tensor& x, const Tensor& kv, const Context& ctx) const;

 private:
  MultiHeadAttention att_;
  FeedForward ffn_;
  LayerNorm norm_;
};

// linear -> ReLU -> linear
class Mlp2 {
 public:
  Mlp2() = default;
  Mlp2(ParamStore& store, const std::string& prefix, std::int64_t in, std::int64_t hidden,
       std::int64_t out, Rng& rng);
  Tensor forward(const Tensor& x) const;

 private:
  Linear lin1_, lin2_;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(ParamStore& store, const std::string& prefix, std::int64_t vocab, std::int64_t dim,
            Rng& rng);
  Tensor forward(const std::vector<std::int64_t>& ids) const;
  std::int64_t vocab_size() const { return vocab_; }

 private:
  Tensor table_;
  std::int64_t vocab_ = 0;
};

}  // namespace wg
