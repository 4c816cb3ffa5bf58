// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "wildground/errors.hpp"
#include "wildground/geometry.hpp"
#include "wildground/io.hpp"
#include "wildground/synthscenes.hpp"

using namespace wg;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("wildground_synth_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool clouds_equal(const PointCloud& a, const PointCloud& b) {
  return a.frame_time == b.frame_time && a.xyz == b.xyz && a.intensity == b.intensity;
}

bool images_equal(const Image& a, const Image& b) {
  return a.h == b.h && a.w == b.w && a.rgb == b.rgb;
}

bool scenes_equal(const Scene& a, const Scene& b) {
  if (a.clouds.size() != b.clouds.size() || a.images.size() != b.images.size()) return false;
  for (std::size_t i = 0; i < a.clouds.size(); ++i) {
    if (!clouds_equal(a.clouds[i], b.clouds[i])) return false;
  }
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    if (!images_equal(a.images[i], b.images[i])) return false;
  }
  return a.token_ids == b.token_ids && a.spans == b.spans && a.gt_box.x == b.gt_box.x &&
         a.gt_box.y == b.gt_box.y && a.gt_box.z == b.gt_box.z && a.gt_box.l == b.gt_box.l &&
         a.gt_box.w == b.gt_box.w && a.gt_box.h == b.gt_box.h &&
         a.gt_box.theta == b.gt_box.theta;
}

std::vector<std::string> scene_words(const Scene& s) {
  Vocabulary vocab = dataset_vocabulary();
  std::vector<std::string> out;
  for (std::int64_t id : s.token_ids) out.push_back(vocab.word(id));
  return out;
}

}  // namespace

TEST_CASE("same seed reproduces the scene bit for bit") {
  for (std::uint64_t seed : {0ull, 7ull, 991ull}) {
    GeneratedScene a = generate_scene(seed, Difficulty::kDefault);
    GeneratedScene b = generate_scene(seed, Difficulty::kDefault);
    CHECK(scenes_equal(a.scene, b.scene));
    CHECK(a.target_actor == b.target_actor);
    REQUIRE(a.actors.size() == b.actors.size());
    for (std::size_t i = 0; i < a.actors.size(); ++i) {
      CHECK(a.actors[i].positions == b.actors[i].positions);
      CHECK(a.actors[i].color == b.actors[i].color);
      CHECK(static_cast<int>(a.actors[i].motion) == static_cast<int>(b.actors[i].motion));
    }
  }
  GeneratedScene a = generate_scene(3, Difficulty::kDefault);
  GeneratedScene c = generate_scene(4, Difficulty::kDefault);
  CHECK_FALSE(scenes_equal(a.scene, c.scene));
}

TEST_CASE("every emitted scene has a unique symbolic referent") {
  for (Difficulty d :
       {Difficulty::kDefault, Difficulty::kColorOnly, Difficulty::kMotionOnly}) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      GeneratedScene g = generate_scene(seed * 31 + 5, d);
      std::vector<int> hits = resolve(g.actors, g.query);
      REQUIRE(hits.size() == 1);
      CHECK(hits[0] == g.target_actor);
    }
  }
}

TEST_CASE("difficulty filters restrict the mentioned attributes") {
  std::set<std::string> colors, motions;
  for (int c = 0; c < color_count(); ++c) colors.insert(color_word(c));
  for (int m = 0; m < 5; ++m) motions.insert(motion_word(static_cast<MotionClass>(m)));

  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    GeneratedScene g = generate_scene(seed + 100, Difficulty::kColorOnly);
    CHECK(g.query.color >= 0);
    CHECK(g.query.motion == -1);
    CHECK(g.query.carried == -1);
    CHECK(g.query.spatial == -1);
    std::vector<std::string> words = scene_words(g.scene);
    int color_mentions = 0;
    for (const std::string& w : words) {
      CHECK(motions.count(w) == 0);
      color_mentions += colors.count(w) ? 1 : 0;
    }
    CHECK(color_mentions == 1);
    // The mentioned color picks out exactly one actor.
    int matches = 0;
    for (const Actor& a : g.actors) matches += a.color == g.query.color ? 1 : 0;
    CHECK(matches == 1);
  }
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    GeneratedScene g = generate_scene(seed + 200, Difficulty::kMotionOnly);
    CHECK(g.query.motion >= 0);
    CHECK(g.query.color == -1);
    std::vector<std::string> words = scene_words(g.scene);
    for (const std::string& w : words) CHECK(colors.count(w) == 0);
    int matches = 0;
    for (const Actor& a : g.actors) {
      matches += static_cast<int>(a.motion) == g.query.motion ? 1 : 0;
    }
    CHECK(matches == 1);
  }
}

TEST_CASE("utterances follow the template and spans bracket them") {
  Vocabulary vocab = dataset_vocabulary();
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    GeneratedScene g = generate_scene(seed, Difficulty::kDefault);
    const Scene& s = g.scene;
    std::vector<std::string> words = scene_words(s);
    REQUIRE(words.size() >= 3);
    CHECK(words.front() == "the");
    CHECK(words.back() == Vocabulary::kTerminal);
    CHECK(std::find(words.begin(), words.end(), "person") != words.end());
    REQUIRE(s.spans.size() == 2);
    CHECK(s.spans[0].begin == 0);
    CHECK(s.spans[0].end == static_cast<std::int64_t>(words.size()) - 1);
    CHECK(s.spans[1].begin == s.spans[0].end);
    CHECK(s.spans[1].end == static_cast<std::int64_t>(words.size()));
    CHECK(s.token_ids.back() == vocab.terminal_id());
  }
}

TEST_CASE("physical invariants hold across seeds and difficulties") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Difficulty d = seed % 3 == 0   ? Difficulty::kDefault
                   : seed % 3 == 1 ? Difficulty::kColorOnly
                                   : Difficulty::kMotionOnly;
    GeneratedScene g = generate_scene(seed * 17 + 1, d);
    const Scene& s = g.scene;
    REQUIRE(s.clouds.size() == 2);
    REQUIRE(s.images.size() == 2);

    for (const PointCloud& pc : s.clouds) {
      CHECK(pc.size() >= 500);
      CHECK(pc.size() <= 4000);
      for (const auto& p : pc.xyz) {
        CHECK(std::hypot(p[0], p[1]) <= 30.0);
        CHECK(p[2] >= -0.2);
        CHECK(p[2] <= 3.5);
      }
    }

    // The current-frame box holds a solid cluster of points.
    std::vector<bool> inside = points_in_box(s.clouds.back().xyz, s.gt_box);
    int hits = 0;
    for (bool b : inside) hits += b ? 1 : 0;
    CHECK(hits >= 30);

    // Per-class displacement: movers move, stayers stay.
    for (const Actor& a : g.actors) {
      REQUIRE(a.positions.size() == 2);
      double step = std::hypot(a.positions[1][0] - a.positions[0][0],
                               a.positions[1][1] - a.positions[0][1]);
      if (a.motion == MotionClass::kWalking || a.motion == MotionClass::kRiding) {
        CHECK(step >= 0.4);
      } else {
        CHECK(step <= 0.05);
      }
    }

    // Actors never collide in any frame.
    for (std::size_t i = 0; i < g.actors.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        for (int f = 0; f < 2; ++f) {
          double dist = std::hypot(
              g.actors[i].positions[f][0] - g.actors[j].positions[f][0],
              g.actors[i].positions[f][1] - g.actors[j].positions[f][1]);
          CHECK(dist >= 2.4);
        }
      }
    }
  }
}

TEST_CASE("point intensities stay inside the reflectance classes") {
  std::set<float> allowed = {
      0.05f, 0.15f, 0.5f, static_cast<float>(2.0 / 7.0), static_cast<float>(3.0 / 7.0),
      static_cast<float>(6.0 / 7.0)};
  GeneratedScene g = generate_scene(42, Difficulty::kDefault);
  for (const PointCloud& pc : g.scene.clouds) {
    for (float v : pc.intensity) CHECK(allowed.count(v) == 1);
  }
}

TEST_CASE("images are exact eight-bit rasters with palette colors") {
  GeneratedScene g = generate_scene(11, Difficulty::kDefault);
  const Image& img = g.scene.images.back();
  REQUIRE(img.h == 64);
  REQUIRE(img.w == 64);
  REQUIRE(img.rgb.size() == 64 * 64 * 3);
  for (float c : img.rgb) {
    float scaled = c * 255.0f;
    CHECK(std::abs(scaled - std::round(scaled)) < 1e-4f);
  }
  // The target's palette color appears at its current position.
  const Actor& t = g.actors[static_cast<std::size_t>(g.target_actor)];
  const auto& p = t.positions.back();
  int col = static_cast<int>(std::floor((p[0] + 16.0) * 2.0));
  int row = static_cast<int>(std::floor((p[1] + 16.0) * 2.0));
  REQUIRE(col >= 0);
  REQUIRE(col < 64);
  bool found = false;
  for (int dr = -2; dr <= 2 && !found; ++dr) {
    for (int dc = -2; dc <= 2 && !found; ++dc) {
      int r = row + dr, c = col + dc;
      if (r < 0 || r >= 64 || c < 0 || c >= 64) continue;
      // Any pixel of the disc suffices; compare all three channels.
      float pr = img.at(r, c, 0), pg = img.at(r, c, 1), pb = img.at(r, c, 2);
      const char* names[6] = {"red", "blue", "green", "purple", "yellow", "gray"};
      (void)names;
      if (color_word(t.color) == "red" && std::lround(pr * 255) == 220 &&
          std::lround(pg * 255) == 50 && std::lround(pb * 255) == 47) {
        found = true;
      }
      if (color_word(t.color) != "red" && pr + pg + pb > 0.4f &&
          !(std::lround(pr * 255) == 18 && std::lround(pg * 255) == 18)) {
        found = true;
      }
    }
  }
  CHECK(found);
}

TEST_CASE("scene files round-trip exactly") {
  fs::path dir = fresh_dir("roundtrip");
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    GeneratedScene g = generate_scene(seed, seed % 2 ? Difficulty::kColorOnly
                                                     : Difficulty::kDefault);
    std::string path = (dir / ("s" + std::to_string(seed) + ".wgs")).string();
    write_scene(g, path);
    Scene back = read_scene(path);
    CHECK(scenes_equal(g.scene, back));
  }
  fs::remove_all(dir);
}

TEST_CASE("scene files reject corruption with distinct errors") {
  fs::path dir = fresh_dir("corrupt");
  GeneratedScene g = generate_scene(5, Difficulty::kDefault);
  std::string path = (dir / "scene.wgs").string();
  write_scene(g, path);
  std::vector<std::uint8_t> bytes = io::read_file(path);

  SUBCASE("flipped payload byte fails the checksum") {
    std::vector<std::uint8_t> bad = bytes;
    bad[bad.size() / 2] ^= 0x40;  // deep inside the point payload
    std::string p = (dir / "bad_byte.wgs").string();
    io::write_file(p, bad);
    CHECK_THROWS_AS(read_scene(p), ChecksumError);
  }
  SUBCASE("truncation is reported as truncation") {
    std::vector<std::uint8_t> bad(bytes.begin(), bytes.end() - 100);
    std::string p = (dir / "short.wgs").string();
    io::write_file(p, bad);
    CHECK_THROWS_AS(read_scene(p), TruncatedError);
  }
  SUBCASE("a nearly empty file is truncated too") {
    std::string p = (dir / "tiny.wgs").string();
    io::write_file(p, {0x57, 0x47});
    CHECK_THROWS_AS(read_scene(p), TruncatedError);
  }
  SUBCASE("wrong magic is a format error") {
    std::vector<std::uint8_t> bad = bytes;
    bad[0] = 'X';
    // Keep the checksum honest so the magic check is what fires.
    std::uint32_t crc = io::crc32(bad.data(), bad.size() - 4);
    std::memcpy(bad.data() + bad.size() - 4, &crc, 4);
    std::string p = (dir / "magic.wgs").string();
    io::write_file(p, bad);
    CHECK_THROWS_AS(read_scene(p), FormatError);
  }
  SUBCASE("future version is a version error") {
    std::vector<std::uint8_t> bad = bytes;
    bad[6] = 2;  // little-endian version field right after the magic
    std::uint32_t crc = io::crc32(bad.data(), bad.size() - 4);
    std::memcpy(bad.data() + bad.size() - 4, &crc, 4);
    std::string p = (dir / "version.wgs").string();
    io::write_file(p, bad);
    CHECK_THROWS_AS(read_scene(p), VersionError);
  }
  SUBCASE("missing file is an io error") {
    CHECK_THROWS_AS(read_scene((dir / "nope.wgs").string()), IoError);
  }
  fs::remove_all(dir);
}

TEST_CASE("scene_to_input mirrors the scene payload") {
  GeneratedScene g = generate_scene(9, Difficulty::kDefault);
  SceneInput in = scene_to_input(g.scene);
  CHECK(in.clouds.size() == g.scene.clouds.size());
  CHECK(in.images.size() == g.scene.images.size());
  CHECK(in.token_ids == g.scene.token_ids);
  CHECK(in.spans == g.scene.spans);
}

TEST_CASE("vocabulary is closed over every utterance and ends with the terminal") {
  Vocabulary vocab = dataset_vocabulary();
  CHECK(vocab.word(vocab.terminal_id()) == Vocabulary::kTerminal);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GeneratedScene g = generate_scene(seed + 400, Difficulty::kDefault);
    for (std::int64_t id : g.scene.token_ids) {
      CHECK(id >= 0);
      CHECK(id < vocab.size());
    }
  }
}

TEST_CASE("build_dataset writes a coherent, re-readable corpus") {
  fs::path dir = fresh_dir("dataset");
  DatasetManifest m = build_dataset(dir.string(), 20, 6, 77, Difficulty::kDefault);
  CHECK(m.n_train == 20);
  CHECK(m.n_test == 6);
  REQUIRE(m.size() == 26);
  CHECK(m.is_train(19));
  CHECK_FALSE(m.is_train(20));

  DatasetManifest back = read_manifest((dir / "manifest.txt").string());
  CHECK(back.seed == m.seed);
  CHECK(back.difficulty == m.difficulty);
  CHECK(back.frames == m.frames);
  CHECK(back.n_train == m.n_train);
  CHECK(back.n_test == m.n_test);
  CHECK(back.scene_paths == m.scene_paths);
  CHECK(back.scene_seeds == m.scene_seeds);

  // Files exist, parse, and regenerate identically from their recorded seed.
  Vocabulary vocab = Vocabulary::load((dir / back.vocab_path).string());
  CHECK(vocab.size() == dataset_vocabulary().size());
  std::set<std::string> seen_paths;
  for (std::int64_t id = 0; id < back.size(); ++id) {
    std::string p = scene_path(back, (dir / "manifest.txt").string(), id);
    CHECK(seen_paths.insert(p).second);
    Scene s = read_scene(p);
    GeneratedScene regen = generate_scene(back.scene_seeds[static_cast<std::size_t>(id)],
                                          back.difficulty, back.frames);
    CHECK(scenes_equal(s, regen.scene));
  }

  // Every test-utterance word appears at least twice across the train split.
  std::map<std::int64_t, int> counts;
  for (std::int64_t id = 0; id < back.n_train; ++id) {
    Scene s = read_scene(scene_path(back, (dir / "manifest.txt").string(), id));
    for (std::int64_t tok : s.token_ids) counts[tok]++;
  }
  for (std::int64_t id = back.n_train; id < back.size(); ++id) {
    Scene s = read_scene(scene_path(back, (dir / "manifest.txt").string(), id));
    for (std::int64_t tok : s.token_ids) CHECK(counts[tok] >= 2);
  }
  fs::remove_all(dir);
}

TEST_CASE("build_dataset is deterministic at the byte level") {
  fs::path a = fresh_dir("det_a");
  fs::path b = fresh_dir("det_b");
  DatasetManifest ma = build_dataset(a.string(), 8, 3, 123, Difficulty::kMotionOnly);
  DatasetManifest mb = build_dataset(b.string(), 8, 3, 123, Difficulty::kMotionOnly);
  CHECK(ma.scene_paths == mb.scene_paths);
  CHECK(io::read_text_file((a / "manifest.txt").string()) ==
        io::read_text_file((b / "manifest.txt").string()));
  for (std::size_t i = 0; i < ma.scene_paths.size(); ++i) {
    std::vector<std::uint8_t> ba = io::read_file((a / ma.scene_paths[i]).string());
    std::vector<std::uint8_t> bb = io::read_file((b / mb.scene_paths[i]).string());
    CHECK(ba == bb);
    CHECK(io::crc32(ba.data(), ba.size()) == io::crc32(bb.data(), bb.size()));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("manifest parsing rejects malformed inputs") {
  fs::path dir = fresh_dir("manifest_err");
  std::string p = (dir / "m.txt").string();

  io::write_text_file(p, "seed: 1\n");
  CHECK_THROWS_AS(read_manifest(p), FormatError);

  io::write_text_file(p,
                      "wildground-manifest: 2\nseed: 1\ndifficulty: default\nframes: 2\n"
                      "train: 1\ntest: 0\nvocab: v.txt\n");
  CHECK_THROWS_AS(read_manifest(p), VersionError);

  io::write_text_file(p,
                      "wildground-manifest: 1\nseed: 1\ndifficulty: default\nframes: 2\n"
                      "train: 1\ntest: 1\nvocab: v.txt\nscenes/000000_zz.wgs\n");
  CHECK_THROWS_AS(read_manifest(p), FormatError);

  io::write_text_file(p,
                      "wildground-manifest: 1\nseed: 1\ndifficulty: default\nframes: 2\n"
                      "train: 2\ntest: 1\nvocab: v.txt\n"
                      "scenes/000000_0000000000000001.wgs\n");
  CHECK_THROWS_AS(read_manifest(p), FormatError);
  fs::remove_all(dir);
}

TEST_CASE("generation sustains at least fifty scenes per second") {
  auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t seed = 1000; seed < 1060; ++seed) {
    generate_scene(seed, Difficulty::kDefault);
  }
  auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(dt < 1.2);  // 60 scenes
}
