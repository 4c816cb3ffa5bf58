// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "wildground/encoders.hpp"
#include "wildground/geometry.hpp"
#include "wildground/model.hpp"
#include "wildground/pointnet.hpp"

namespace wg {

enum class Difficulty {
  kDefault,    // minimal uniquely-identifying attribute set per scene
  kColorOnly,  // utterances mention only the target's color
  kMotionOnly, // utterances mention only the target's motion class
};

Difficulty difficulty_from_string(const std::string& s);
std::string to_string(Difficulty d);

enum class MotionClass : int { kStanding = 0, kWalking, kRiding, kSitting, kWaving };

// Palette indices; the words double as vocabulary entries.
int color_count();
const std::string& color_word(int color);
const std::string& motion_word(MotionClass m);
int carried_count();
const std::string& carried_word(int carried);
int spatial_count();
const std::string& spatial_phrase(int spatial);  // space-separated words

struct Actor {
  int id = 0;
  std::vector<std::array<double, 3>> positions;  // ground center per frame
  double side = 0.6;    // square footprint edge of the ground-truth box
  double height = 1.7;
  double radius = 0.2;  // capsule radius of the point shell
  double heading = 0;   // radians, world frame; also the gt box yaw
  int color = 0;
  MotionClass motion = MotionClass::kStanding;
  int carried = -1;     // carried-object index or -1
  int intensity_bucket = 0;  // reflectivity class, independent of color
};

// Attribute constraints of one utterance; -1 marks an unused attribute.
struct AttributeQuery {
  int color = -1;
  int motion = -1;
  int carried = -1;
  int spatial = -1;  // 0 left, 1 right, 2 near, 3 far
};

// The serializable payload of one grounding instance (what the scene file
// stores). Frames are chronological; the last frame is the current one and
// the ground-truth box lives in it.
struct Scene {
  std::vector<PointCloud> clouds;
  std::vector<Image> images;
  std::vector<std::int64_t> token_ids;  // terminal token appended
  std::vector<TokenSpan> spans;         // target span first, terminal last
  Box3D gt_box;
};

// A scene plus its latent generation state: the actor list the symbolic
// resolver grounds against, the utterance's attribute query, and the seed
// that reproduces everything. Only `scene` is persisted; the rest is
// recomputed from the seed when needed (e.g., the oracle evaluation).
struct GeneratedScene {
  Scene scene;
  std::vector<Actor> actors;
  int target_actor = 0;
  AttributeQuery query;
  std::uint64_t seed = 0;
  Difficulty difficulty = Difficulty::kDefault;
};

// Deterministic scene synthesis: same (seed, difficulty, frames) gives a
// byte-identical scene. Layouts whose utterance cannot uniquely identify the
// target are re-sampled internally; ambiguous scenes are never emitted.
GeneratedScene generate_scene(std::uint64_t seed, Difficulty difficulty, int frames = 2);

// Symbolic grounding oracle: ids of all actors satisfying the query at the
// current (last) frame. The generator guarantees a single match for emitted
// scenes, so this doubles as a perfect reference predictor.
std::vector<int> resolve(const std::vector<Actor>& actors, const AttributeQuery& query);

// The actor's ground-truth box at the current frame (parameters snapped
// through float, matching what scene files store).
Box3D actor_box(const Actor& a);

// The fixed dataset vocabulary (terminal word last), shared with the text
// encoder.
Vocabulary dataset_vocabulary();

// Versioned little-endian scene file ("WGSCN1", CRC-32 trailer).
void write_scene(const GeneratedScene& scene, const std::string& path);
Scene read_scene(const std::string& path);

// Adapter to the model's input structure.
SceneInput scene_to_input(const Scene& scene);

struct DatasetManifest {
  std::uint64_t seed = 0;  // master seed the per-scene seeds derive from
  Difficulty difficulty = Difficulty::kDefault;
  int frames = 2;
  std::int64_t n_train = 0, n_test = 0;
  std::string vocab_path;               // relative to the manifest directory
  std::vector<std::string> scene_paths; // relative; first n_train are train
  std::vector<std::uint64_t> scene_seeds;

  std::int64_t size() const { return static_cast<std::int64_t>(scene_paths.size()); }
  bool is_train(std::int64_t id) const { return id < n_train; }
};

// Generates train+test scenes under out_dir (scenes/ subdirectory), enforcing
// that every word of every test utterance occurs at least twice across the
// train split (under-covered test scenes are re-sampled), writes the
// vocabulary and manifest, and returns the manifest.
DatasetManifest build_dataset(const std::string& out_dir, std::int64_t n_train,
                              std::int64_t n_test, std::uint64_t seed, Difficulty difficulty,
                              int frames = 2);

void write_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

// Absolute path of scene `id` resolved against the manifest's directory.
std::string scene_path(const DatasetManifest& manifest, const std::string& manifest_path,
                       std::int64_t id);

}  // namespace wg
