// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#include "wildground/encoders.hpp"

#include <cmath>
#include <fstream>

#include "wildground/errors.hpp"
#include "wildground/io.hpp"
#include "wildground/ops.hpp"

namespace wg {

Tensor sine1d(std::int64_t n, std::int64_t dim) {
  if (dim <= 0 || dim % 2 != 0) throw ConfigError("sine1d: dim must be positive and even");
  if (n < 0) throw ConfigError("sine1d: negative length");
  std::vector<double> v(static_cast<std::size_t>(n * dim));
  for (std::int64_t p = 0; p < n; ++p)
    for (std::int64_t i = 0; i < dim / 2; ++i) {
      const double angle =
          static_cast<double>(p) *
          std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
      v[static_cast<std::size_t>(p * dim + 2 * i)] = std::sin(angle);
      v[static_cast<std::size_t>(p * dim + 2 * i + 1)] = std::cos(angle);
    }
  return Tensor::from({n, dim}, std::move(v));
}

Tensor sine2d(std::int64_t h, std::int64_t w, std::int64_t dim) {
  if (dim <= 0 || dim % 2 != 0 || (dim / 2) % 2 != 0)
    throw ConfigError("sine2d: dim must be a positive multiple of 4");
  Tensor rows = sine1d(h, dim / 2);
  Tensor cols = sine1d(w, dim / 2);
  std::vector<double> v(static_cast<std::size_t>(h * w * dim));
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c) {
      double* out = v.data() + static_cast<std::size_t>((r * w + c) * dim);
      for (std::int64_t i = 0; i < dim / 2; ++i) {
        out[i] = rows.at(r, i);
        out[dim / 2 + i] = cols.at(c, i);
      }
    }
  return Tensor::from({h * w, dim}, std::move(v));
}

Tensor fourier3d(const std::vector<std::array<double, 3>>& xyz, std::int64_t dim) {
  if (dim <= 0 || dim % 6 != 0) throw ConfigError("fourier3d: dim must be a positive multiple of 6");
  const std::int64_t freqs = dim / 6;
  constexpr double kScale = 1.0 / 30.0;
  std::vector<double> omega(static_cast<std::size_t>(freqs));
  const double kPi = std::acos(-1.0);
  for (std::int64_t k = 0; k < freqs; ++k) {
    const double t = freqs > 1 ? static_cast<double>(k) / static_cast<double>(freqs - 1) : 0.0;
    omega[static_cast<std::size_t>(k)] = kPi * std::pow(2.0, 8.0 * t);
  }
  const auto n = static_cast<std::int64_t>(xyz.size());
  std::vector<double> v(static_cast<std::size_t>(n * dim));
  for (std::int64_t s = 0; s < n; ++s) {
    double* out = v.data() + static_cast<std::size_t>(s * dim);
    for (int axis = 0; axis < 3; ++axis) {
      const double x = xyz[static_cast<std::size_t>(s)][static_cast<std::size_t>(axis)] * kScale;
      for (std::int64_t k = 0; k < freqs; ++k) {
        const double a = omega[static_cast<std::size_t>(k)] * x;
        out[axis * 2 * freqs + 2 * k] = std::sin(a);
        out[axis * 2 * freqs + 2 * k + 1] = std::cos(a);
      }
    }
  }
  return Tensor::from({n, dim}, std::move(v));
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  if (words.empty() || words.back() != kTerminal)
    throw FormatError("vocabulary: last word must be \"" + std::string(kTerminal) + "\"");
  Vocabulary v;
  v.words_ = std::move(words);
  for (std::size_t i = 0; i < v.words_.size(); ++i) {
    if (v.words_[i].empty()) throw FormatError("vocabulary: empty word at line " + std::to_string(i + 1));
    if (!v.index_.emplace(v.words_[i], static_cast<std::int64_t>(i)).second)
      throw FormatError("vocabulary: duplicate word \"" + v.words_[i] + "\"");
  }
  return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
  const std::string text = io::read_text_file(path);
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    if (ch == '\n') {
      if (!cur.empty()) words.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) words.push_back(cur);
  return from_words(std::move(words));
}

void Vocabulary::save(const std::string& path) const {
  std::string text;
  for (const auto& w : words_) {
    text += w;
    text += '\n';
  }
  io::write_text_file(path, text);
}

std::int64_t Vocabulary::id(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) throw ConfigError("vocabulary: unknown word \"" + word + "\"");
  return it->second;
}

const std::string& Vocabulary::word(std::int64_t id) const {
  if (id < 0 || id >= size()) throw ConfigError("vocabulary: id out of range");
  return words_[static_cast<std::size_t>(id)];
}

// ---------------------------------------------------------------------------
// ImageEncoder
// ---------------------------------------------------------------------------

ImageEncoder::ImageEncoder(ParamStore& store, const std::string& prefix, const EncoderConfig& cfg,
                           Rng& rng)
    : cfg_(cfg) {
  const std::int64_t patch_dim = static_cast<std::int64_t>(cfg.patch) * cfg.patch * 3;
  patch_embed_ = Linear(store, prefix + ".patch", patch_dim, cfg.dim, rng);
  for (std::int64_t b = 0; b < cfg.blocks; ++b)
    blocks_.emplace_back(store, prefix + ".block" + std::to_string(b), cfg.dim, cfg.heads,
                         cfg.ffn_dim, cfg.dropout, rng);
}

ImageGridFeatures ImageEncoder::forward(const Image& img, const Context& ctx) const {
  const int p = cfg_.patch;
  if (img.h <= 0 || img.w <= 0 || img.h % p != 0 || img.w % p != 0)
    throw ShapeError("image encoder: H and W must be positive multiples of " + std::to_string(p));
  if (img.rgb.size() != static_cast<std::size_t>(img.h) * static_cast<std::size_t>(img.w) * 3)
    throw ShapeError("image encoder: rgb buffer size mismatch");

  const std::int64_t gh = img.h / p, gw = img.w / p;
  const std::int64_t patch_dim = static_cast<std::int64_t>(p) * p * 3;
  std::vector<double> patches(static_cast<std::size_t>(gh * gw * patch_dim));
  for (std::int64_t pr = 0; pr < gh; ++pr)
    for (std::int64_t pc = 0; pc < gw; ++pc) {
      double* out = patches.data() + static_cast<std::size_t>((pr * gw + pc) * patch_dim);
      for (int py = 0; py < p; ++py) {
        const int y = static_cast<int>(pr) * p + py;
        const float* src = img.rgb.data() +
                           (static_cast<std::size_t>(y) * static_cast<std::size_t>(img.w) +
                            static_cast<std::size_t>(pc) * static_cast<std::size_t>(p)) *
                               3;
        for (int i = 0; i < p * 3; ++i) out[py * p * 3 + i] = static_cast<double>(src[i]);
      }
    }
  Tensor x = patch_embed_.forward(Tensor::from({gh * gw, patch_dim}, std::move(patches)));
  for (const auto& block : blocks_) x = block.forward(x, x, ctx);
  x = add(x, sine2d(gh, gw, cfg_.dim));

  ImageGridFeatures out;
  out.tokens = x;
  out.grid_h = gh;
  out.grid_w = gw;
  return out;
}

// ---------------------------------------------------------------------------
// TextEncoder
// ---------------------------------------------------------------------------

namespace {
void validate_spans(const std::vector<TokenSpan>& spans, std::int64_t m) {
  if (spans.empty()) throw ConfigError("text encoder: at least the terminal span is required");
  std::vector<char> used(static_cast<std::size_t>(m), 0);
  for (const auto& s : spans) {
    if (s.begin < 0 || s.end <= s.begin || s.end > m)
      throw ConfigError("text encoder: span [" + std::to_string(s.begin) + "," +
                        std::to_string(s.end) + ") out of range for M=" + std::to_string(m));
    for (std::int64_t i = s.begin; i < s.end; ++i) {
      if (used[static_cast<std::size_t>(i)])
        throw ConfigError("text encoder: spans overlap at token " + std::to_string(i));
      used[static_cast<std::size_t>(i)] = 1;
    }
  }
  if (spans.back().end != m)
    throw ConfigError("text encoder: terminal span must end at the last token");
}
}  // namespace

TextEncoder::TextEncoder(ParamStore& store, const std::string& prefix, std::int64_t vocab_size,
                         const EncoderConfig& cfg, Rng& rng)
    : cfg_(cfg) {
  embed_ = Embedding(store, prefix + ".embed", vocab_size, cfg.dim, rng);
  for (std::int64_t b = 0; b < cfg.blocks; ++b)
    blocks_.emplace_back(store, prefix + ".block" + std::to_string(b), cfg.dim, cfg.heads,
                         cfg.ffn_dim, cfg.dropout, rng);
}

TextFeatures TextEncoder::forward(const std::vector<std::int64_t>& ids,
                                  const std::vector<TokenSpan>& spans, const Context& ctx) const {
  if (ids.empty()) throw ConfigError("text encoder: empty id list");
  for (std::int64_t id : ids)
    if (id < 0 || id >= embed_.vocab_size())
      throw ConfigError("text encoder: unknown token id " + std::to_string(id));
  const auto m = static_cast<std::int64_t>(ids.size());
  validate_spans(spans, m);

  Tensor x = add(embed_.forward(ids), sine1d(m, cfg_.dim));
  for (const auto& block : blocks_) x = block.forward(x, x, ctx);

  TextFeatures out;
  out.tokens = x;
  out.spans = spans;
  return out;
}

}  // namespace wg
