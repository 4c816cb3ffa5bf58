// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "wildground/nn.hpp"

namespace wg {

// Row-major H×W×3 image, values in [0,1].
struct Image {
  int h = 0, w = 0;
  std::vector<float> rgb;

  float at(int y, int x, int c) const {
    return rgb[(static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                static_cast<std::size_t>(x)) *
                   3 +
               static_cast<std::size_t>(c)];
  }
};

// ---------------------------------------------------------------------------
// Positional embeddings. Pure functions of position: the returned tensors are
// constants (no gradient).
// ---------------------------------------------------------------------------

// Standard interleaved sin/cos of the token index: out[p, 2i] = sin(p·w_i),
// out[p, 2i+1] = cos(p·w_i) with w_i = 10000^(-2i/dim). n×dim.
Tensor sine1d(std::int64_t n, std::int64_t dim);

// Half the channels encode the row index, half the column index, each with
// the 1-D scheme. Tokens are row-major over the grid. (h·w)×dim.
Tensor sine2d(std::int64_t h, std::int64_t w, std::int64_t dim);

// Fourier features of 3-D coordinates: per axis, sin/cos at dim/6 log-spaced
// frequencies from pi to 256*pi; coordinates are pre-scaled by 1/30 (metres
// to the unit working range). S×dim.
Tensor fourier3d(const std::vector<std::array<double, 3>>& xyz, std::int64_t dim);

// ---------------------------------------------------------------------------
// Vocabulary: one word per line, line number = token id, last line is the
// reserved terminal word "not-mentioned".
// ---------------------------------------------------------------------------
class Vocabulary {
 public:
  static constexpr const char* kTerminal = "not-mentioned";

  static Vocabulary from_words(std::vector<std::string> words);
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  std::int64_t id(const std::string& word) const;  // throws on unknown word
  const std::string& word(std::int64_t id) const;
  std::int64_t size() const { return static_cast<std::int64_t>(words_.size()); }
  std::int64_t terminal_id() const { return size() - 1; }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::int64_t> index_;
};

// Half-open word-index range [begin, end).
struct TokenSpan {
  std::int64_t begin = 0, end = 0;
  bool operator==(const TokenSpan&) const = default;
};

// M×C token features plus span bookkeeping: spans[0] is the target span,
// then attribute spans, and the appended terminal ("not-mentioned") span
// last. Spans are disjoint and within [0, M).
struct TextFeatures {
  Tensor tokens;
  std::vector<TokenSpan> spans;

  std::int64_t count() const { return tokens.rows(); }
  const TokenSpan& target_span() const { return spans.front(); }
  const TokenSpan& terminal_span() const { return spans.back(); }
};

// G×C tokens over a flattened H'×W' patch grid.
struct ImageGridFeatures {
  Tensor tokens;
  std::int64_t grid_h = 0, grid_w = 0;
  int frame_time = 0;
};

struct EncoderConfig {
  std::int64_t dim = 288;
  std::int64_t heads = 8;
  std::int64_t ffn_dim = 256;
  std::int64_t blocks = 2;
  double dropout = 0.1;
  int patch = 16;  // image encoder only
};

// Non-overlapping patch embedding (linear over the flattened patch), two
// self-attention blocks, then the sine2d grid position is added.
class ImageEncoder {
 public:
  ImageEncoder() = default;
  ImageEncoder(ParamStore& store, const std::string& prefix, const EncoderConfig& cfg, Rng& rng);
  ImageGridFeatures forward(const Image& img, const Context& ctx) const;
  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  Linear patch_embed_;
  std::vector<AttentionBlock> blocks_;
};

// Learned word embedding plus sine1d positions, then two self-attention
// blocks. Ids must already include the appended terminal token; spans are
// validated (in range, disjoint, terminal last) and carried through.
class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(ParamStore& store, const std::string& prefix, std::int64_t vocab_size,
              const EncoderConfig& cfg, Rng& rng);
  TextFeatures forward(const std::vector<std::int64_t>& ids, const std::vector<TokenSpan>& spans,
                       const Context& ctx) const;
  std::int64_t vocab_size() const { return embed_.vocab_size(); }

 private:
  EncoderConfig cfg_;
  Embedding embed_;
  std::vector<AttentionBlock> blocks_;
};

}  // namespace wg
