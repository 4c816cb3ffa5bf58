// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#include "wildground/synthscenes.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "wildground/errors.hpp"
#include "wildground/io.hpp"
#include "wildground/rng.hpp"

namespace wg {
namespace {

constexpr double kPi = 3.14159265358979323846;

// World layout. Actors live in an annulus around the sensor at the origin;
// the whole scene fits comfortably inside the 30 m working range the
// position encoding is scaled for.
constexpr double kActorRangeMin = 3.0;
constexpr double kActorRangeMax = 13.0;
constexpr double kRangeHardLimit = 13.5;  // after motion, at every frame
constexpr double kInitialSeparation = 5.0;
constexpr double kFrameSeparation = 2.5;
constexpr int kMinActors = 3, kActorSpread = 6;  // 3..8 actors

// Spatial predicate bands, with dead zones so scenes are never borderline.
constexpr double kSideMargin = 0.5;  // |y| below this is neither left nor right
constexpr double kNearLimit = 8.0;
constexpr double kFarLimit = 11.0;

// Per-frame point budget.
constexpr std::size_t kMinFramePoints = 500;
constexpr std::size_t kMaxFramePoints = 4000;

// Reflectance classes. Intensity is sampled independently of color so the
// point branch carries no appearance shortcut; color lives in the images.
constexpr double kIntensityBuckets[3] = {2.0 / 7.0, 3.0 / 7.0, 6.0 / 7.0};
constexpr double kGroundIntensity = 0.05;
constexpr double kBlockIntensity = 0.15;
constexpr double kCarriedIntensity = 0.5;

// Bird's-eye-view image raster: 64x64 over a [-16, 16) m window (2 px/m).
constexpr int kImageSize = 64;
constexpr double kImageHalfExtent = 16.0;
constexpr double kBlobRadiusPx = 2.2;

const std::string kColorWords[] = {"red", "blue", "green", "purple", "yellow", "gray"};
const std::uint8_t kColorRgb[][3] = {{220, 50, 47}, {38, 89, 235},   {60, 180, 75},
                                     {150, 60, 200}, {230, 220, 50}, {160, 160, 160}};
const std::string kMotionWords[] = {"standing", "walking", "riding", "sitting", "waving"};
const std::string kCarriedWords[] = {"backpack", "umbrella", "box"};
const std::string kSpatialPhrases[] = {"on the left", "on the right", "nearby", "far away"};

struct Block {
  std::array<double, 2> center{};
  double l = 1, w = 1, h = 0.5;
};

double planar_range(const std::array<double, 3>& p) { return std::hypot(p[0], p[1]); }

double planar_dist(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

bool spatial_holds(const Actor& a, int rel) {
  const std::array<double, 3>& cur = a.positions.back();
  switch (rel) {
    case 0: return cur[1] > kSideMargin;
    case 1: return cur[1] < -kSideMargin;
    case 2: return planar_range(cur) < kNearLimit;
    case 3: return planar_range(cur) > kFarLimit;
    default: throw ConfigError("spatial relation out of range: " + std::to_string(rel));
  }
}

// Per-frame step length (metres) for a motion class.
double sample_step(Rng& rng, MotionClass m) {
  switch (m) {
    case MotionClass::kWalking: return rng.uniform(0.5, 1.2);
    case MotionClass::kRiding: return rng.uniform(1.2, 1.8);
    default: return rng.uniform(0.0, 0.04);  // standing / sitting / waving jitter
  }
}

void sample_shape(Rng& rng, Actor& a) {
  switch (a.motion) {
    case MotionClass::kSitting:
      a.side = rng.uniform(0.78, 0.9);
      a.radius = rng.uniform(0.24, 0.3);
      a.height = rng.uniform(1.15, 1.35);
      break;
    case MotionClass::kRiding:
      a.side = rng.uniform(1.8, 1.95);
      a.radius = rng.uniform(0.18, 0.22);
      a.height = rng.uniform(1.35, 1.65);
      break;
    default:
      a.side = rng.uniform(0.6, 0.75);
      a.radius = rng.uniform(0.18, 0.24);
      a.height = rng.uniform(1.55, 1.9);
      break;
  }
}

std::array<double, 2> sample_annulus_point(Rng& rng) {
  double r = std::sqrt(rng.uniform(kActorRangeMin * kActorRangeMin,
                                   kActorRangeMax * kActorRangeMax));
  double phi = rng.uniform(-kPi, kPi);
  return {r * std::cos(phi), r * std::sin(phi)};
}

// Picks motion/color assignments honoring the difficulty contract: under
// color-only the target's color is unique in the scene, under motion-only
// its motion class is.
void assign_attributes(Rng& rng, std::vector<Actor>& actors, int target,
                       Difficulty difficulty) {
  const int n_colors = color_count();
  const int n_motions = 5;
  for (std::size_t i = 0; i < actors.size(); ++i) {
    Actor& a = actors[i];
    a.color = static_cast<int>(rng.uniform_int(n_colors));
    a.motion = static_cast<MotionClass>(rng.uniform_int(n_motions));
    a.carried = rng.bernoulli(0.4) ? static_cast<int>(rng.uniform_int(carried_count())) : -1;
    a.intensity_bucket = static_cast<int>(rng.uniform_int(3));
  }
  if (difficulty == Difficulty::kColorOnly) {
    int tc = actors[target].color;
    for (std::size_t i = 0; i < actors.size(); ++i) {
      if (static_cast<int>(i) == target || actors[i].color != tc) continue;
      int k = static_cast<int>(rng.uniform_int(n_colors - 1));
      actors[i].color = k >= tc ? k + 1 : k;
    }
  } else if (difficulty == Difficulty::kMotionOnly) {
    int tm = static_cast<int>(actors[target].motion);
    for (std::size_t i = 0; i < actors.size(); ++i) {
      if (static_cast<int>(i) == target || static_cast<int>(actors[i].motion) != tm) continue;
      int k = static_cast<int>(rng.uniform_int(n_motions - 1));
      actors[i].motion = static_cast<MotionClass>(k >= tm ? k + 1 : k);
    }
  }
}

// Base positions plus per-frame trajectories; false when the rejection
// budgets run out and the caller should restart from a fresh child seed.
bool place_actors(Rng& rng, std::vector<Actor>& actors, int frames) {
  std::vector<std::array<double, 2>> base;
  for (std::size_t i = 0; i < actors.size(); ++i) {
    bool placed = false;
    for (int tries = 0; tries < 120 && !placed; ++tries) {
      std::array<double, 2> p = sample_annulus_point(rng);
      placed = true;
      for (const auto& q : base) {
        if (std::hypot(p[0] - q[0], p[1] - q[1]) < kInitialSeparation) {
          placed = false;
          break;
        }
      }
      if (placed) base.push_back(p);
    }
    if (!placed) return false;
  }

  auto build_track = [&](Actor& a, const std::array<double, 2>& origin) {
    double step = sample_step(rng, a.motion);
    a.positions.clear();
    for (int f = 0; f < frames; ++f) {
      double d = step * f;
      a.positions.push_back({origin[0] + d * std::cos(a.heading),
                             origin[1] + d * std::sin(a.heading), 0.0});
    }
  };

  for (std::size_t i = 0; i < actors.size(); ++i) {
    actors[i].heading = rng.uniform(-kPi, kPi);
    build_track(actors[i], base[i]);
  }

  auto violation = [&]() -> int {
    for (std::size_t i = 0; i < actors.size(); ++i) {
      for (int f = 0; f < frames; ++f) {
        double r = planar_range(actors[i].positions[f]);
        if (r > kRangeHardLimit || r < kActorRangeMin - 0.5) return static_cast<int>(i);
        for (std::size_t j = 0; j < i; ++j) {
          if (planar_dist(actors[i].positions[f], actors[j].positions[f]) < kFrameSeparation) {
            return static_cast<int>(i);
          }
        }
      }
    }
    return -1;
  };

  for (int tries = 0; tries < 60; ++tries) {
    int bad = violation();
    if (bad < 0) return true;
    actors[bad].heading = rng.uniform(-kPi, kPi);
    build_track(actors[bad], base[bad]);
  }
  return false;
}

std::vector<Block> place_blocks(Rng& rng, const std::vector<Actor>& actors) {
  std::vector<Block> blocks;
  std::size_t want = 2 + rng.uniform_int(3);
  for (std::size_t b = 0; b < want; ++b) {
    for (int tries = 0; tries < 80; ++tries) {
      Block blk;
      std::array<double, 2> c = sample_annulus_point(rng);
      blk.center = c;
      blk.l = rng.uniform(0.8, 1.6);
      blk.w = rng.uniform(0.8, 1.6);
      blk.h = rng.uniform(0.4, 0.8);
      bool ok = true;
      for (const Actor& a : actors) {
        for (const auto& p : a.positions) {
          if (std::hypot(p[0] - c[0], p[1] - c[1]) < kFrameSeparation) ok = false;
        }
      }
      for (const Block& other : blocks) {
        if (std::hypot(other.center[0] - c[0], other.center[1] - c[1]) < kFrameSeparation) {
          ok = false;
        }
      }
      if (ok) {
        blocks.push_back(blk);
        break;
      }
    }
  }
  return blocks;
}

// Minimal uniquely-identifying attribute subset. Candidate attributes are
// shuffled once so the dataset exercises every word, then subsets are tried
// smallest first; subsets naming two spatial relations are skipped (the
// query has one spatial slot).
std::optional<AttributeQuery> pick_query(Rng& rng, const std::vector<Actor>& actors,
                                         int target, Difficulty difficulty) {
  const Actor& t = actors[target];
  if (difficulty == Difficulty::kColorOnly) {
    AttributeQuery q;
    q.color = t.color;
    return q;
  }
  if (difficulty == Difficulty::kMotionOnly) {
    AttributeQuery q;
    q.motion = static_cast<int>(t.motion);
    return q;
  }

  struct Candidate {
    int kind;  // 0 color, 1 motion, 2 carried, 3 spatial
    int value;
  };
  std::vector<Candidate> cands;
  cands.push_back({0, t.color});
  cands.push_back({1, static_cast<int>(t.motion)});
  if (t.carried >= 0) cands.push_back({2, t.carried});
  for (int rel = 0; rel < spatial_count(); ++rel) {
    if (spatial_holds(t, rel)) cands.push_back({3, rel});
  }
  rng.shuffle(cands);

  const int m = static_cast<int>(cands.size());
  for (int size = 1; size <= m; ++size) {
    for (unsigned mask = 1; mask < (1u << m); ++mask) {
      if (std::popcount(mask) != size) continue;
      AttributeQuery q;
      bool valid = true;
      for (int i = 0; i < m && valid; ++i) {
        if (!(mask & (1u << i))) continue;
        const Candidate& c = cands[static_cast<std::size_t>(i)];
        switch (c.kind) {
          case 0: valid = q.color < 0; q.color = c.value; break;
          case 1: valid = q.motion < 0; q.motion = c.value; break;
          case 2: valid = q.carried < 0; q.carried = c.value; break;
          default: valid = q.spatial < 0; q.spatial = c.value; break;
        }
      }
      if (!valid) continue;
      std::vector<int> hits = resolve(actors, q);
      if (hits.size() == 1 && hits[0] == actors[static_cast<std::size_t>(target)].id) return q;
    }
  }
  return std::nullopt;
}

void add_point(PointCloud& pc, double x, double y, double z, double intensity) {
  pc.xyz.push_back({static_cast<float>(x), static_cast<float>(y), static_cast<float>(z)});
  pc.intensity.push_back(static_cast<float>(intensity));
}

void add_ground_points(Rng& rng, PointCloud& pc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double r = std::sqrt(rng.uniform(4.0, 256.0));
    double phi = rng.uniform(-kPi, kPi);
    add_point(pc, r * std::cos(phi), r * std::sin(phi), rng.uniform(0.0, 0.03),
              kGroundIntensity);
  }
}

void add_block_points(Rng& rng, PointCloud& pc, const Block& b) {
  std::size_t n = 60 + rng.uniform_int(41);
  double top = b.l * b.w;
  double side_x = 2.0 * b.l * b.h;  // the two faces normal to y
  double side_y = 2.0 * b.w * b.h;  // the two faces normal to x
  double total = top + side_x + side_y;
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.uniform(0.0, total);
    double x, y, z;
    if (u < top) {
      x = rng.uniform(-0.5, 0.5) * b.l;
      y = rng.uniform(-0.5, 0.5) * b.w;
      z = b.h;
    } else if (u < top + side_x) {
      x = rng.uniform(-0.5, 0.5) * b.l;
      y = (rng.bernoulli(0.5) ? 0.5 : -0.5) * b.w;
      z = rng.uniform(0.0, b.h);
    } else {
      x = (rng.bernoulli(0.5) ? 0.5 : -0.5) * b.l;
      y = rng.uniform(-0.5, 0.5) * b.w;
      z = rng.uniform(0.0, b.h);
    }
    add_point(pc, b.center[0] + x + rng.normal() * 0.01, b.center[1] + y + rng.normal() * 0.01,
              std::max(0.0, z + rng.normal() * 0.01), kBlockIntensity);
  }
}

// Sensor-facing capsule shell plus class-specific extras (bike frame, raised
// arm) and the carried object.
void add_actor_points(Rng& rng, PointCloud& pc, const Actor& a, int frame) {
  const std::array<double, 3>& p = a.positions[static_cast<std::size_t>(frame)];
  double range = std::max(planar_range(p), 1.0);
  int np = std::clamp(static_cast<int>(2400.0 / range), 80, 300);
  double phi_sensor = std::atan2(-p[1], -p[0]);
  double dirx = std::cos(a.heading), diry = std::sin(a.heading);
  double intensity = kIntensityBuckets[a.intensity_bucket];

  int n_bike = a.motion == MotionClass::kRiding ? np * 2 / 5 : 0;
  int n_arm = a.motion == MotionClass::kWaving ? np * 3 / 20 : 0;
  int n_torso = np - n_bike - n_arm;
  double z0 = a.motion == MotionClass::kRiding ? 0.55 : 0.0;

  for (int i = 0; i < n_torso; ++i) {
    double phi = phi_sensor + rng.uniform(-kPi / 2, kPi / 2);
    double z = rng.uniform(z0, a.height);
    double rr = a.radius;
    if (z > a.height - a.radius) {
      double d = z - (a.height - a.radius);
      rr = std::sqrt(std::max(a.radius * a.radius - d * d, 0.0));
    }
    add_point(pc, p[0] + rr * std::cos(phi) + rng.normal() * 0.02,
              p[1] + rr * std::sin(phi) + rng.normal() * 0.02,
              std::max(0.0, z + rng.normal() * 0.02), intensity);
  }
  for (int i = 0; i < n_bike; ++i) {
    double along = rng.uniform(-0.8, 0.8);
    double lat = rng.uniform(-0.1, 0.1);
    double z = rng.uniform(0.3, 0.9);
    add_point(pc, p[0] + along * dirx - lat * diry + rng.normal() * 0.02,
              p[1] + along * diry + lat * dirx + rng.normal() * 0.02,
              z + rng.normal() * 0.02, intensity);
  }
  if (n_arm > 0) {
    double arm_phi = a.heading + kPi / 2;
    double ax = std::cos(arm_phi), ay = std::sin(arm_phi);
    for (int i = 0; i < n_arm; ++i) {
      double d = rng.uniform(0.25, 0.7);
      double z = a.height * rng.uniform(0.78, 1.02);
      add_point(pc, p[0] + d * ax + rng.normal() * 0.02, p[1] + d * ay + rng.normal() * 0.02,
                z + rng.normal() * 0.02, intensity);
    }
  }

  if (a.carried >= 0) {
    int n_obj = 12 + static_cast<int>(rng.uniform_int(7));
    for (int i = 0; i < n_obj; ++i) {
      double x, y, z;
      if (a.carried == 0) {  // backpack behind the torso
        double off = a.radius + 0.12;
        x = p[0] - off * dirx + rng.uniform(-0.14, 0.14);
        y = p[1] - off * diry + rng.uniform(-0.14, 0.14);
        z = rng.uniform(0.95, 1.35);
      } else if (a.carried == 1) {  // umbrella disc above the head
        double rr = 0.45 * std::sqrt(rng.uniform());
        double phi = rng.uniform(-kPi, kPi);
        x = p[0] + rr * std::cos(phi);
        y = p[1] + rr * std::sin(phi);
        z = a.height + 0.25 + rng.uniform(0.0, 0.04);
      } else {  // box held out front
        double off = a.radius + 0.2;
        x = p[0] + off * dirx + rng.uniform(-0.15, 0.15);
        y = p[1] + off * diry + rng.uniform(-0.15, 0.15);
        z = rng.uniform(0.95, 1.25);
      }
      add_point(pc, x + rng.normal() * 0.01, y + rng.normal() * 0.01, z + rng.normal() * 0.01,
                kCarriedIntensity);
    }
  }
}

// Enforces the per-frame budget: pads with extra ground clutter, or keeps an
// evenly strided subset when over. `track` is a [begin, end) index range to
// remap (-1, -1 when dropped entirely).
void enforce_budget(Rng& rng, PointCloud& pc, std::array<std::int64_t, 2>& track) {
  if (pc.size() < kMinFramePoints) {
    add_ground_points(rng, pc, kMinFramePoints - pc.size());
    return;
  }
  if (pc.size() <= kMaxFramePoints) return;
  std::size_t count = pc.size();
  PointCloud kept;
  kept.frame_time = pc.frame_time;
  std::int64_t new_begin = -1, new_end = -1;
  for (std::size_t i = 0; i < kMaxFramePoints; ++i) {
    std::size_t src = i * count / kMaxFramePoints;
    if (static_cast<std::int64_t>(src) >= track[0] && static_cast<std::int64_t>(src) < track[1]) {
      if (new_begin < 0) new_begin = static_cast<std::int64_t>(kept.size());
      new_end = static_cast<std::int64_t>(kept.size()) + 1;
    }
    kept.xyz.push_back(pc.xyz[src]);
    kept.intensity.push_back(pc.intensity[src]);
  }
  track = {new_begin, new_end};
  pc = std::move(kept);
}

int pixel_of(double world) {
  return static_cast<int>(std::floor((world + kImageHalfExtent) *
                                     (kImageSize / (2.0 * kImageHalfExtent))));
}

void fill_rect(Image& img, double x0, double x1, double y0, double y1, const std::uint8_t rgb[3]) {
  int c0 = std::max(pixel_of(x0), 0), c1 = std::min(pixel_of(x1), kImageSize - 1);
  int r0 = std::max(pixel_of(y0), 0), r1 = std::min(pixel_of(y1), kImageSize - 1);
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      for (int k = 0; k < 3; ++k) {
        img.rgb[(static_cast<std::size_t>(r) * kImageSize + static_cast<std::size_t>(c)) * 3 +
                static_cast<std::size_t>(k)] = static_cast<float>(rgb[k]) / 255.0f;
      }
    }
  }
}

void fill_disc(Image& img, double x, double y, const std::uint8_t rgb[3]) {
  double cc = (x + kImageHalfExtent) * (kImageSize / (2.0 * kImageHalfExtent));
  double cr = (y + kImageHalfExtent) * (kImageSize / (2.0 * kImageHalfExtent));
  int lo_r = std::max(static_cast<int>(std::floor(cr - kBlobRadiusPx)), 0);
  int hi_r = std::min(static_cast<int>(std::ceil(cr + kBlobRadiusPx)), kImageSize - 1);
  int lo_c = std::max(static_cast<int>(std::floor(cc - kBlobRadiusPx)), 0);
  int hi_c = std::min(static_cast<int>(std::ceil(cc + kBlobRadiusPx)), kImageSize - 1);
  for (int r = lo_r; r <= hi_r; ++r) {
    for (int c = lo_c; c <= hi_c; ++c) {
      double dr = r + 0.5 - cr, dc = c + 0.5 - cc;
      if (dr * dr + dc * dc > kBlobRadiusPx * kBlobRadiusPx) continue;
      for (int k = 0; k < 3; ++k) {
        img.rgb[(static_cast<std::size_t>(r) * kImageSize + static_cast<std::size_t>(c)) * 3 +
                static_cast<std::size_t>(k)] = static_cast<float>(rgb[k]) / 255.0f;
      }
    }
  }
}

Image render_frame(const std::vector<Actor>& actors, const std::vector<Block>& blocks,
                   int frame) {
  Image img;
  img.h = img.w = kImageSize;
  img.rgb.assign(static_cast<std::size_t>(kImageSize) * kImageSize * 3, 0.0f);
  const std::uint8_t bg[3] = {18, 18, 22};
  const std::uint8_t block_rgb[3] = {80, 80, 85};
  fill_rect(img, -kImageHalfExtent, kImageHalfExtent, -kImageHalfExtent, kImageHalfExtent, bg);
  for (const Block& b : blocks) {
    fill_rect(img, b.center[0] - b.l / 2, b.center[0] + b.l / 2, b.center[1] - b.w / 2,
              b.center[1] + b.w / 2, block_rgb);
  }
  for (const Actor& a : actors) {
    const auto& p = a.positions[static_cast<std::size_t>(frame)];
    fill_disc(img, p[0], p[1], kColorRgb[a.color]);
  }
  return img;
}

std::vector<std::string> utterance_words(const AttributeQuery& q) {
  std::vector<std::string> words;
  words.push_back("the");
  if (q.color >= 0) words.push_back(color_word(q.color));
  if (q.motion >= 0) words.push_back(motion_word(static_cast<MotionClass>(q.motion)));
  words.push_back("person");
  if (q.carried >= 0) {
    words.push_back("carrying");
    words.push_back(carried_word(q.carried));
  }
  if (q.spatial >= 0) {
    std::istringstream ss(spatial_phrase(q.spatial));
    std::string w;
    while (ss >> w) words.push_back(w);
  }
  return words;
}

std::optional<GeneratedScene> try_generate(Rng rng, Difficulty difficulty, int frames) {
  GeneratedScene out;
  int n = kMinActors + static_cast<int>(rng.uniform_int(kActorSpread));
  int target = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));

  std::vector<Actor> actors(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) actors[static_cast<std::size_t>(i)].id = i;
  assign_attributes(rng, actors, target, difficulty);
  for (Actor& a : actors) sample_shape(rng, a);
  if (!place_actors(rng, actors, frames)) return std::nullopt;
  std::vector<Block> blocks = place_blocks(rng, actors);

  std::optional<AttributeQuery> q = pick_query(rng, actors, target, difficulty);
  if (!q) return std::nullopt;

  Scene scene;
  scene.gt_box = actor_box(actors[static_cast<std::size_t>(target)]);
  std::array<std::int64_t, 2> target_track{-1, -1};
  for (int f = 0; f < frames; ++f) {
    PointCloud pc;
    pc.frame_time = f;
    add_ground_points(rng, pc, 250 + rng.uniform_int(150));
    for (const Block& b : blocks) add_block_points(rng, pc, b);
    std::array<std::int64_t, 2> track{-1, -1};
    for (const Actor& a : actors) {
      if (a.id == target) track[0] = static_cast<std::int64_t>(pc.size());
      add_actor_points(rng, pc, a, f);
      if (a.id == target) track[1] = static_cast<std::int64_t>(pc.size());
    }
    enforce_budget(rng, pc, track);
    if (f == frames - 1) target_track = track;
    scene.clouds.push_back(std::move(pc));
    scene.images.push_back(render_frame(actors, blocks, f));
  }

  // The current-frame box must hold a healthy chunk of its actor's points.
  const PointCloud& cur = scene.clouds.back();
  int inside = 0;
  if (target_track[0] >= 0) {
    std::vector<std::array<float, 3>> shell(
        cur.xyz.begin() + target_track[0], cur.xyz.begin() + target_track[1]);
    for (bool in : points_in_box(shell, scene.gt_box)) inside += in ? 1 : 0;
  }
  if (inside < 30) return std::nullopt;

  Vocabulary vocab = dataset_vocabulary();
  std::vector<std::string> words = utterance_words(*q);
  for (const std::string& w : words) scene.token_ids.push_back(vocab.id(w));
  scene.token_ids.push_back(vocab.terminal_id());
  std::int64_t nw = static_cast<std::int64_t>(words.size());
  scene.spans = {{0, nw}, {nw, nw + 1}};

  out.scene = std::move(scene);
  out.actors = std::move(actors);
  out.target_actor = target;
  out.query = *q;
  out.difficulty = difficulty;
  return out;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string scene_file_name(std::int64_t id, std::uint64_t seed) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%06lld", static_cast<long long>(id));
  return std::string("scenes/") + buf + "_" + hex16(seed) + ".wgs";
}

}  // namespace

Difficulty difficulty_from_string(const std::string& s) {
  if (s == "default") return Difficulty::kDefault;
  if (s == "color-only") return Difficulty::kColorOnly;
  if (s == "motion-only") return Difficulty::kMotionOnly;
  throw ConfigError("unknown difficulty: " + s +
                    " (expected default, color-only, or motion-only)");
}

std::string to_string(Difficulty d) {
  switch (d) {
    case Difficulty::kDefault: return "default";
    case Difficulty::kColorOnly: return "color-only";
    case Difficulty::kMotionOnly: return "motion-only";
  }
  throw ConfigError("invalid difficulty value");
}

int color_count() { return 6; }

const std::string& color_word(int color) {
  if (color < 0 || color >= color_count()) {
    throw ConfigError("color index out of range: " + std::to_string(color));
  }
  return kColorWords[color];
}

const std::string& motion_word(MotionClass m) {
  int i = static_cast<int>(m);
  if (i < 0 || i >= 5) throw ConfigError("motion class out of range: " + std::to_string(i));
  return kMotionWords[i];
}

int carried_count() { return 3; }

const std::string& carried_word(int carried) {
  if (carried < 0 || carried >= carried_count()) {
    throw ConfigError("carried index out of range: " + std::to_string(carried));
  }
  return kCarriedWords[carried];
}

int spatial_count() { return 4; }

const std::string& spatial_phrase(int spatial) {
  if (spatial < 0 || spatial >= spatial_count()) {
    throw ConfigError("spatial index out of range: " + std::to_string(spatial));
  }
  return kSpatialPhrases[spatial];
}

std::vector<int> resolve(const std::vector<Actor>& actors, const AttributeQuery& query) {
  std::vector<int> hits;
  for (const Actor& a : actors) {
    if (query.color >= 0 && a.color != query.color) continue;
    if (query.motion >= 0 && static_cast<int>(a.motion) != query.motion) continue;
    if (query.carried >= 0 && a.carried != query.carried) continue;
    if (query.spatial >= 0 && !spatial_holds(a, query.spatial)) continue;
    hits.push_back(a.id);
  }
  return hits;
}

// Every parameter is snapped through float so the f32 file round-trip is
// exact and oracle boxes compare bit-equal to stored ones.
Box3D actor_box(const Actor& a) {
  const auto& cur = a.positions.back();
  Box3D b;
  b.x = static_cast<float>(cur[0]);
  b.y = static_cast<float>(cur[1]);
  b.z = static_cast<float>(a.height / 2);
  b.l = static_cast<float>(a.side);
  b.w = static_cast<float>(a.side);
  b.h = static_cast<float>(a.height + 0.1);
  b.theta = static_cast<float>(normalize_yaw(a.heading));
  return b;
}

GeneratedScene generate_scene(std::uint64_t seed, Difficulty difficulty, int frames) {
  if (frames < 1 || frames > 8) {
    throw ConfigError("frame count out of range: " + std::to_string(frames));
  }
  Rng root(seed);
  for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
    std::optional<GeneratedScene> g = try_generate(root.child(attempt), difficulty, frames);
    if (g) {
      g->seed = seed;
      return std::move(*g);
    }
  }
  throw ConfigError("scene synthesis failed to find an unambiguous layout for seed " +
                    std::to_string(seed));
}

Vocabulary dataset_vocabulary() {
  std::vector<std::string> words = {"the", "person"};
  for (int c = 0; c < color_count(); ++c) words.push_back(color_word(c));
  for (int m = 0; m < 5; ++m) words.push_back(motion_word(static_cast<MotionClass>(m)));
  words.push_back("carrying");
  for (int c = 0; c < carried_count(); ++c) words.push_back(carried_word(c));
  words.insert(words.end(), {"on", "left", "right", "nearby", "far", "away"});
  words.push_back(Vocabulary::kTerminal);
  return Vocabulary::from_words(std::move(words));
}

void write_scene(const GeneratedScene& scene, const std::string& path) {
  const Scene& s = scene.scene;
  if (scene.actors.empty()) {
    throw ConfigError("write_scene: refusing a scene without generator state");
  }
  if (s.clouds.size() != s.images.size() || s.clouds.empty()) {
    throw ConfigError("write_scene: clouds and images must pair up per frame");
  }
  if (s.token_ids.size() > 0xffff || s.spans.size() > 0xff) {
    throw ConfigError("write_scene: utterance too long for the format");
  }
  io::Writer w;
  w.str("WGSCN1");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(s.clouds.size()));
  for (const PointCloud& pc : s.clouds) {
    w.u32(static_cast<std::uint32_t>(pc.size()));
    for (std::size_t i = 0; i < pc.size(); ++i) {
      w.f32(pc.xyz[i][0]);
      w.f32(pc.xyz[i][1]);
      w.f32(pc.xyz[i][2]);
      w.f32(pc.intensity[i]);
    }
  }
  for (const Image& img : s.images) {
    w.u16(static_cast<std::uint16_t>(img.h));
    w.u16(static_cast<std::uint16_t>(img.w));
    for (float c : img.rgb) {
      w.u8(static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0f, 1.0f) * 255.0f)));
    }
  }
  w.u16(static_cast<std::uint16_t>(s.token_ids.size()));
  for (std::int64_t id : s.token_ids) {
    if (id < 0 || id > 0xffff) throw ConfigError("write_scene: token id out of range");
    w.u16(static_cast<std::uint16_t>(id));
  }
  w.u8(static_cast<std::uint8_t>(s.spans.size()));
  for (const TokenSpan& span : s.spans) {
    w.u16(static_cast<std::uint16_t>(span.begin));
    w.u16(static_cast<std::uint16_t>(span.end));
  }
  w.f32(static_cast<float>(s.gt_box.x));
  w.f32(static_cast<float>(s.gt_box.y));
  w.f32(static_cast<float>(s.gt_box.z));
  w.f32(static_cast<float>(s.gt_box.l));
  w.f32(static_cast<float>(s.gt_box.w));
  w.f32(static_cast<float>(s.gt_box.h));
  w.f32(static_cast<float>(s.gt_box.theta));
  std::uint32_t crc = io::crc32(w.buffer().data(), w.size());
  w.u32(crc);
  io::write_file(path, w.buffer());
}

Scene read_scene(const std::string& path) {
  std::vector<std::uint8_t> bytes = io::read_file(path);
  if (bytes.size() < 4) {
    throw TruncatedError(path + ": too small to hold the checksum trailer");
  }
  io::Reader r(bytes.data(), bytes.size() - 4, path);
  std::string magic = r.str(6);
  if (magic != "WGSCN1") throw FormatError(path + ": not a wildground scene file");
  std::uint32_t version = r.u32();
  if (version != 1) {
    throw VersionError(path + ": unsupported scene version " + std::to_string(version));
  }
  std::uint32_t frames = r.u32();
  if (frames == 0 || frames > 64) {
    throw FormatError(path + ": implausible frame count " + std::to_string(frames));
  }
  Scene s;
  for (std::uint32_t f = 0; f < frames; ++f) {
    std::uint32_t count = r.u32();
    if (static_cast<std::size_t>(count) * 16 > r.remaining()) {
      throw TruncatedError(path + ": point payload truncated");
    }
    PointCloud pc;
    pc.frame_time = static_cast<int>(f);
    pc.xyz.reserve(count);
    pc.intensity.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      float x = r.f32(), y = r.f32(), z = r.f32(), inten = r.f32();
      pc.xyz.push_back({x, y, z});
      pc.intensity.push_back(inten);
    }
    s.clouds.push_back(std::move(pc));
  }
  for (std::uint32_t f = 0; f < frames; ++f) {
    Image img;
    img.h = r.u16();
    img.w = r.u16();
    std::size_t n = static_cast<std::size_t>(img.h) * static_cast<std::size_t>(img.w) * 3;
    if (n > r.remaining()) throw TruncatedError(path + ": image payload truncated");
    img.rgb.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      img.rgb.push_back(static_cast<float>(r.u8()) / 255.0f);
    }
    s.images.push_back(std::move(img));
  }
  std::uint16_t n_tokens = r.u16();
  for (std::uint16_t i = 0; i < n_tokens; ++i) s.token_ids.push_back(r.u16());
  std::uint8_t n_spans = r.u8();
  for (std::uint8_t i = 0; i < n_spans; ++i) {
    TokenSpan span;
    span.begin = r.u16();
    span.end = r.u16();
    s.spans.push_back(span);
  }
  s.gt_box.x = r.f32();
  s.gt_box.y = r.f32();
  s.gt_box.z = r.f32();
  s.gt_box.l = r.f32();
  s.gt_box.w = r.f32();
  s.gt_box.h = r.f32();
  s.gt_box.theta = r.f32();
  if (r.remaining() != 0) {
    throw FormatError(path + ": trailing bytes after the scene payload");
  }
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  std::uint32_t computed = io::crc32(bytes.data(), bytes.size() - 4);
  if (stored != computed) {
    throw ChecksumError(path + ": checksum mismatch (file corrupted)");
  }
  return s;
}

SceneInput scene_to_input(const Scene& scene) {
  SceneInput in;
  in.clouds = scene.clouds;
  in.images = scene.images;
  in.token_ids = scene.token_ids;
  in.spans = scene.spans;
  return in;
}

DatasetManifest build_dataset(const std::string& out_dir, std::int64_t n_train,
                              std::int64_t n_test, std::uint64_t seed, Difficulty difficulty,
                              int frames) {
  if (n_train < 2 || n_test < 1) {
    throw ConfigError("build_dataset: need at least 2 train and 1 test scene");
  }
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "scenes");

  DatasetManifest m;
  m.seed = seed;
  m.difficulty = difficulty;
  m.frames = frames;
  m.n_train = n_train;
  m.n_test = n_test;
  m.vocab_path = "vocab.txt";

  Vocabulary vocab = dataset_vocabulary();
  Rng root(seed);
  auto seed_for = [&](std::int64_t id, std::uint64_t attempt) {
    return root.child(static_cast<std::uint64_t>(id)).child(attempt).state();
  };

  std::unordered_map<std::int64_t, std::int64_t> train_counts;
  auto emit = [&](std::int64_t id, std::uint64_t scene_seed, const GeneratedScene& g) {
    std::string rel = scene_file_name(id, scene_seed);
    write_scene(g, (fs::path(out_dir) / rel).string());
    m.scene_paths.push_back(rel);
    m.scene_seeds.push_back(scene_seed);
  };

  for (std::int64_t id = 0; id < n_train; ++id) {
    std::uint64_t s = seed_for(id, 0);
    GeneratedScene g = generate_scene(s, difficulty, frames);
    for (std::int64_t tok : g.scene.token_ids) ++train_counts[tok];
    emit(id, s, g);
  }
  for (std::int64_t id = n_train; id < n_train + n_test; ++id) {
    bool done = false;
    for (std::uint64_t attempt = 0; attempt < 50 && !done; ++attempt) {
      std::uint64_t s = seed_for(id, attempt);
      GeneratedScene g = generate_scene(s, difficulty, frames);
      bool covered = true;
      for (std::int64_t tok : g.scene.token_ids) {
        if (train_counts[tok] < 2) {
          covered = false;
          break;
        }
      }
      if (!covered) continue;
      emit(id, s, g);
      done = true;
    }
    if (!done) {
      throw ConfigError(
          "build_dataset: test utterances cannot be covered by the train split; "
          "increase the train size");
    }
  }

  vocab.save((fs::path(out_dir) / m.vocab_path).string());
  write_manifest(m, (fs::path(out_dir) / "manifest.txt").string());
  return m;
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
  std::ostringstream out;
  out << "wildground-manifest: 1\n";
  out << "seed: " << manifest.seed << "\n";
  out << "difficulty: " << to_string(manifest.difficulty) << "\n";
  out << "frames: " << manifest.frames << "\n";
  out << "train: " << manifest.n_train << "\n";
  out << "test: " << manifest.n_test << "\n";
  out << "vocab: " << manifest.vocab_path << "\n";
  for (const std::string& p : manifest.scene_paths) out << p << "\n";
  io::write_text_file(path, out.str());
}

DatasetManifest read_manifest(const std::string& path) {
  std::istringstream in(io::read_text_file(path));
  DatasetManifest m;
  std::string line;
  bool header_done = false;
  bool saw_magic = false, saw_seed = false, saw_diff = false, saw_frames = false;
  bool saw_train = false, saw_test = false, saw_vocab = false;
  auto parse_int = [&](const std::string& v, const char* what) -> long long {
    try {
      std::size_t used = 0;
      long long x = std::stoll(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw FormatError(path + ": bad " + what + " value '" + v + "'");
    }
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t colon = line.find(": ");
    if (!header_done && colon != std::string::npos) {
      std::string key = line.substr(0, colon);
      std::string value = line.substr(colon + 2);
      if (key == "wildground-manifest") {
        if (value != "1") throw VersionError(path + ": unsupported manifest version " + value);
        saw_magic = true;
      } else if (key == "seed") {
        m.seed = static_cast<std::uint64_t>(parse_int(value, "seed"));
        saw_seed = true;
      } else if (key == "difficulty") {
        m.difficulty = difficulty_from_string(value);
        saw_diff = true;
      } else if (key == "frames") {
        m.frames = static_cast<int>(parse_int(value, "frames"));
        saw_frames = true;
      } else if (key == "train") {
        m.n_train = parse_int(value, "train");
        saw_train = true;
      } else if (key == "test") {
        m.n_test = parse_int(value, "test");
        saw_test = true;
      } else if (key == "vocab") {
        m.vocab_path = value;
        saw_vocab = true;
      } else {
        throw FormatError(path + ": unknown manifest key '" + key + "'");
      }
      continue;
    }
    header_done = true;
    // Scene path; the generation seed is encoded in the file name as
    // <id>_<16 hex digits>.wgs.
    std::string stem = std::filesystem::path(line).stem().string();
    std::size_t us = stem.rfind('_');
    if (us == std::string::npos || stem.size() - us - 1 != 16) {
      throw FormatError(path + ": scene path without an embedded seed: " + line);
    }
    std::uint64_t s = 0;
    try {
      std::size_t used = 0;
      s = std::stoull(stem.substr(us + 1), &used, 16);
      if (used != 16) throw std::invalid_argument(stem);
    } catch (const std::exception&) {
      throw FormatError(path + ": bad seed hex in scene path: " + line);
    }
    m.scene_paths.push_back(line);
    m.scene_seeds.push_back(s);
  }
  if (!saw_magic) throw FormatError(path + ": missing wildground-manifest header");
  if (!(saw_seed && saw_diff && saw_frames && saw_train && saw_test && saw_vocab)) {
    throw FormatError(path + ": incomplete manifest header");
  }
  if (m.size() != m.n_train + m.n_test) {
    throw FormatError(path + ": scene count does not match train+test totals");
  }
  return m;
}

std::string scene_path(const DatasetManifest& manifest, const std::string& manifest_path,
                       std::int64_t id) {
  if (id < 0 || id >= manifest.size()) {
    throw ConfigError("scene id out of range: " + std::to_string(id));
  }
  namespace fs = std::filesystem;
  return (fs::path(manifest_path).parent_path() /
          manifest.scene_paths[static_cast<std::size_t>(id)])
      .string();
}

}  // namespace wg
