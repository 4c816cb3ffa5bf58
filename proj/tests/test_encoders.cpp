// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <unordered_map>

#include "wildground/encoders.hpp"
#include "wildground/ops.hpp"

using namespace wg;

namespace {
Image constant_image(int h, int w, float r, float g, float b) {
  Image img;
  img.h = h;
  img.w = w;
  img.rgb.resize(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 3);
  for (std::size_t i = 0; i < img.rgb.size(); i += 3) {
    img.rgb[i] = r;
    img.rgb[i + 1] = g;
    img.rgb[i + 2] = b;
  }
  return img;
}

Image random_image(Rng& rng, int h, int w) {
  Image img;
  img.h = h;
  img.w = w;
  img.rgb.resize(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 3);
  for (auto& v : img.rgb) v = static_cast<float>(rng.uniform(0, 1));
  return img;
}
}  // namespace

TEST_CASE("sine1d at position zero alternates zero and one") {
  Tensor pe = sine1d(3, 8);
  for (std::int64_t i = 0; i < 8; i += 2) {
    CHECK(pe.at(0, i) == 0.0);
    CHECK(pe.at(0, i + 1) == 1.0);
  }
  CHECK(pe.at(1, 0) == doctest::Approx(std::sin(1.0)));
  CHECK(pe.at(1, 1) == doctest::Approx(std::cos(1.0)));
  CHECK_THROWS_AS(sine1d(3, 7), ConfigError);
}

TEST_CASE("sine2d splits channels between row and column") {
  Tensor pe = sine2d(2, 3, 8);
  CHECK(pe.rows() == 6);
  // token (r=0,c=2) -> first half is position 0, second half position 2
  Tensor one = sine1d(3, 4);
  for (std::int64_t i = 0; i < 4; ++i) {
    CHECK(pe.at(2, i) == one.at(0, i));
    CHECK(pe.at(2, 4 + i) == one.at(2, i));
  }
  // same row, different column: first half matches, second differs
  CHECK(pe.at(1, 0) == pe.at(2, 0));
  CHECK_THROWS_AS(sine2d(2, 2, 6), ConfigError);
}

TEST_CASE("positional norms are bounded by sqrt dim") {
  Rng rng(3);
  std::vector<std::array<double, 3>> xyz;
  for (int i = 0; i < 40; ++i)
    xyz.push_back({rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(0, 3)});
  for (const Tensor& pe : {sine1d(40, 288), sine2d(5, 8, 288), fourier3d(xyz, 288)}) {
    for (std::int64_t r = 0; r < pe.rows(); ++r) {
      double sq = 0;
      for (std::int64_t c = 0; c < pe.cols(); ++c) sq += pe.at(r, c) * pe.at(r, c);
      CHECK(std::sqrt(sq) <= std::sqrt(static_cast<double>(pe.cols())) + 1e-12);
    }
  }
}

TEST_CASE("fourier3d distinguishes grid positions at desk scale") {
  // scan a generator-scale grid: 0.25 m steps over a 15 m square, 2 heights
  std::vector<std::array<double, 3>> xyz;
  for (int xi = 0; xi <= 60; ++xi)
    for (int yi = 0; yi <= 60; ++yi)
      for (int zi = 0; zi < 2; ++zi)
        xyz.push_back({-7.5 + 0.25 * xi, -7.5 + 0.25 * yi, 0.9 * zi});
  Tensor pe = fourier3d(xyz, 48);
  // hash rows; identical hashes then get a full check
  std::unordered_map<std::uint64_t, std::vector<std::int64_t>> buckets;
  for (std::int64_t r = 0; r < pe.rows(); ++r) {
    std::uint64_t hsh = 1469598103934665603ull;
    for (std::int64_t c = 0; c < pe.cols(); ++c) {
      double d = pe.at(r, c);
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(d));
      std::memcpy(&bits, &d, sizeof(d));
      hsh = (hsh ^ bits) * 1099511628211ull;
    }
    buckets[hsh].push_back(r);
  }
  for (const auto& [hsh, rows] : buckets) {
    for (std::size_t i = 1; i < rows.size(); ++i) {
      bool same = true;
      for (std::int64_t c = 0; c < pe.cols() && same; ++c)
        same = pe.at(rows[0], c) == pe.at(rows[i], c);
      CHECK_FALSE(same);
    }
  }
  CHECK_THROWS_AS(fourier3d(xyz, 47), ConfigError);
}

TEST_CASE("positional embeddings are pure functions") {
  Tensor a = sine1d(7, 32);
  Tensor b = sine1d(7, 32);
  for (std::int64_t r = 0; r < 7; ++r)
    for (std::int64_t c = 0; c < 32; ++c) CHECK(a.at(r, c) == b.at(r, c));
  CHECK_FALSE(a.requires_grad());
}

TEST_CASE("vocabulary file round trip and validation") {
  Vocabulary v = Vocabulary::from_words(
      {"the", "red", "person", "walking", Vocabulary::kTerminal});
  CHECK(v.size() == 5);
  CHECK(v.id("red") == 1);
  CHECK(v.terminal_id() == 4);
  CHECK(v.word(4) == Vocabulary::kTerminal);
  CHECK_THROWS_AS(v.id("blue"), ConfigError);
  CHECK_THROWS_AS(Vocabulary::from_words({"a", "b"}), FormatError);
  CHECK_THROWS_AS(Vocabulary::from_words({"a", "a", Vocabulary::kTerminal}), FormatError);

  const std::string path = "vocab_test_tmp.txt";
  v.save(path);
  Vocabulary r = Vocabulary::load(path);
  CHECK(r.words() == v.words());
  std::filesystem::remove(path);
}

TEST_CASE("image encoder patch arithmetic and constant-image invariance") {
  Rng rng(11);
  EncoderConfig cfg;
  ParamStore store;
  ImageEncoder enc(store, "img", cfg, rng);
  Context ctx;  // eval

  Image img = constant_image(64, 64, 0.2f, 0.5f, 0.9f);
  ImageGridFeatures out = enc.forward(img, ctx);
  CHECK(out.tokens.rows() == 16);
  CHECK(out.tokens.cols() == 288);
  CHECK(out.grid_h == 4);
  CHECK(out.grid_w == 4);

  // removing the positional term must leave identical rows
  Tensor pe = sine2d(4, 4, 288);
  for (std::int64_t r = 1; r < 16; ++r)
    for (std::int64_t c = 0; c < 288; ++c)
      CHECK(out.tokens.at(r, c) - pe.at(r, c) ==
            doctest::Approx(out.tokens.at(0, c) - pe.at(0, c)).epsilon(1e-12));

  Image bad = constant_image(60, 64, 0, 0, 0);
  CHECK_THROWS_AS(enc.forward(bad, ctx), ShapeError);
}

TEST_CASE("image encoder gradients match finite differences") {
  Rng rng(5);
  EncoderConfig cfg;
  cfg.dim = 24;
  cfg.heads = 4;
  cfg.ffn_dim = 16;
  cfg.blocks = 2;
  cfg.dropout = 0.0;
  ParamStore store;
  ImageEncoder enc(store, "img", cfg, rng);
  Context ctx;
  Image img = random_image(rng, 32, 32);

  Tensor weight_mask;  // fixed random projection to a scalar
  auto loss_value = [&]() {
    ImageGridFeatures out = enc.forward(img, ctx);
    if (!weight_mask.defined()) {
      Rng mrng(99);
      weight_mask = Tensor::uniform(out.tokens.shape(), mrng, -1, 1);
    }
    return sum_all(mul(out.tokens, weight_mask));
  };

  Tensor loss = loss_value();
  store.zero_grad();
  loss.backward();

  Tensor w = store.get("img.patch.weight");
  std::vector<double> analytic = w.grad();
  Rng pick(1);
  const double h = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    const auto idx =
        static_cast<std::size_t>(pick.uniform_int(static_cast<std::int64_t>(analytic.size())));
    const double saved = w.node()->data[idx];
    w.node()->data[idx] = saved + h;
    const double fp = loss_value().item();
    w.node()->data[idx] = saved - h;
    const double fm = loss_value().item();
    w.node()->data[idx] = saved;
    const double numeric = (fp - fm) / (2 * h);
    CHECK(analytic[idx] == doctest::Approx(numeric).epsilon(1e-4));
  }
}

TEST_CASE("text encoder handles the degenerate terminal-only utterance") {
  Rng rng(7);
  EncoderConfig cfg;
  ParamStore store;
  TextEncoder enc(store, "txt", 10, cfg, rng);
  Context ctx;
  TextFeatures out = enc.forward({9}, {{0, 1}}, ctx);
  CHECK(out.count() == 1);
  CHECK(out.tokens.cols() == 288);
  CHECK(out.terminal_span() == TokenSpan{0, 1});
}

TEST_CASE("text encoder validates ids and spans") {
  Rng rng(7);
  EncoderConfig cfg;
  cfg.dim = 16;
  cfg.heads = 2;
  cfg.ffn_dim = 8;
  ParamStore store;
  TextEncoder enc(store, "txt", 10, cfg, rng);
  Context ctx;
  CHECK_THROWS_AS(enc.forward({11}, {{0, 1}}, ctx), ConfigError);
  CHECK_THROWS_AS(enc.forward({1, 2, 9}, {{0, 2}, {1, 3}}, ctx), ConfigError);  // overlap
  CHECK_THROWS_AS(enc.forward({1, 2, 9}, {{0, 2}}, ctx), ConfigError);  // terminal not last
  CHECK_THROWS_AS(enc.forward({1, 2, 9}, {{0, 4}}, ctx), ConfigError);  // out of range
}

TEST_CASE("swapping non-terminal tokens keeps span bookkeeping") {
  Rng rng(7);
  EncoderConfig cfg;
  cfg.dim = 16;
  cfg.heads = 2;
  cfg.ffn_dim = 8;
  ParamStore store;
  TextEncoder enc(store, "txt", 10, cfg, rng);
  Context ctx;
  std::vector<TokenSpan> spans = {{0, 2}, {3, 4}};
  TextFeatures a = enc.forward({1, 2, 5, 9}, spans, ctx);
  TextFeatures b = enc.forward({2, 1, 5, 9}, spans, ctx);
  CHECK(a.count() == b.count());
  CHECK(a.spans == b.spans);
  bool differs = false;
  for (std::int64_t r = 0; r < a.count() && !differs; ++r)
    for (std::int64_t c = 0; c < 16 && !differs; ++c)
      differs = a.tokens.at(r, c) != b.tokens.at(r, c);
  CHECK(differs);
}

TEST_CASE("text encoding is deterministic") {
  auto build = [] {
    Rng rng(21);
    EncoderConfig cfg;
    cfg.dim = 16;
    cfg.heads = 2;
    cfg.ffn_dim = 8;
    ParamStore store;
    TextEncoder enc(store, "txt", 12, cfg, rng);
    Context ctx;
    return enc.forward({3, 4, 5, 11}, {{0, 3}, {3, 4}}, ctx);
  };
  TextFeatures a = build();
  TextFeatures b = build();
  for (std::int64_t r = 0; r < a.count(); ++r)
    for (std::int64_t c = 0; c < 16; ++c) CHECK(a.tokens.at(r, c) == b.tokens.at(r, c));
}
