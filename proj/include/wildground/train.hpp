// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wildground/checkpoint.hpp"
#include "wildground/losses.hpp"
#include "wildground/metrics.hpp"
#include "wildground/model.hpp"
#include "wildground/optim.hpp"
#include "wildground/synthscenes.hpp"

namespace wg {

// Everything one run needs, loadable from a `key = value` config file
// (# comments) with command-line overrides applied on top.
struct RunConfig {
  std::string dataset;  // manifest path
  ModelConfig model;
  LossWeights weights;
  std::int64_t epochs = 40;
  std::int64_t batch = 8;
  double lr = 1e-4;
  double lr_point = 1e-3;  // the "pointnet." parameter group
  double weight_decay = 5e-4;
  double lr_decay_at = 0.75;  // fraction of epochs after which lr drops
  double lr_decay_factor = 0.1;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_every = 0;   // epochs; 0 keeps only best + last
  std::int64_t max_train_scenes = 0;   // 0 = full split (smoke runs cap it)
  std::int64_t max_eval_scenes = 0;    // cap for the per-epoch validation pass
  bool eval_every_epoch = true;        // tracks best-by-val-Acc@0.25
};

RunConfig load_run_config(const std::string& path);
// Applies one key to the config; throws ConfigError on unknown keys or
// unparsable values. Shared by the file loader and CLI overrides.
void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value);
// The full configuration as re-loadable `key = value` lines.
std::string config_echo(const RunConfig& cfg);

// WILDGROUND_THREADS cap (>= 1); parallelism is only ever used across
// independent scenes/tapes, so results do not depend on it.
int worker_threads();

// Compile-time build identifier for run reports.
std::string build_id();

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalOptions {
  bool test_split = true;
  std::int64_t max_scenes = 0;  // 0 = whole split
};

struct EvalResult {
  EvalSummary summary;  // rotated-IoU metrics
  EvalSummary aabb;     // axis-aligned diagnostic (theta ignored)
  std::vector<EvalRecord> records;
  double mean_latency_ms = 0;  // forward + box selection, per scene
};

// Runs the model over one split of the manifest's scenes.
EvalResult evaluate_model(const WildreferModel& model, const DatasetManifest& m,
                          const std::string& manifest_path, const EvalOptions& opts);
// Symbolic-resolver ceiling: regenerates each scene from its recorded seed
// and grounds the query without looking at the model.
EvalResult evaluate_oracle(const DatasetManifest& m, const std::string& manifest_path,
                           const EvalOptions& opts);
// Chance floor: a plausibility-prior random box per scene.
EvalResult evaluate_random(const DatasetManifest& m, const std::string& manifest_path,
                           std::uint64_t seed, const EvalOptions& opts);

// summary.csv (metric,value) + records.csv (scene_id,iou,success_025,success_05).
void write_eval_outputs(const EvalResult& r, const std::string& out_dir);
// Recompute the headline metrics from a persisted records.csv.
EvalSummary summarize_records_csv(const std::string& records_csv);

// ---------------------------------------------------------------------------
// Checkpoint bridge
// ---------------------------------------------------------------------------

// Model parameters, optimizer moments, counters, RNG streams and the full
// run configuration (cfg.*), so a resumed run continues the exact trajectory.
Checkpoint snapshot_run(const ParamStore& store, AdamW& opt, const RunConfig& cfg,
                        std::int64_t vocab_size, std::int64_t epoch, double best_acc,
                        std::uint64_t order_rng_state, std::uint64_t dropout_rng_state);

struct RestoredMeta {
  RunConfig cfg;  // dataset path omitted (not stored); model/loss/lr fields set
  std::int64_t vocab_size = 0;
  std::int64_t epoch = 0;
  double best_acc = -1;
  std::uint64_t order_rng_state = 0;
  std::uint64_t dropout_rng_state = 0;
};

RestoredMeta restore_meta(const Checkpoint& ck);
void restore_params(const Checkpoint& ck, ParamStore& store);
void restore_optimizer(const Checkpoint& ck, const ParamStore& store, AdamW& opt);

// Convenience: rebuild a model (fresh store) from a checkpoint file.
struct LoadedModel {
  ParamStore store;
  WildreferModel model;
  RestoredMeta meta;
};
LoadedModel load_model(const std::string& checkpoint_path);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainResult {
  std::int64_t steps = 0;
  std::int64_t epochs_run = 0;
  double wall_seconds = 0;
  double best_val_acc = -1;
  EvalSummary final_eval;  // last validation pass (empty when eval disabled)
  bool aborted = false;    // non-finite loss
  std::int64_t abort_step = -1;
  std::string last_checkpoint;
  std::string best_checkpoint;
};

// Full training loop: shuffled epochs, per-scene backward with batch-mean
// scaling, AdamW with the point-encoder lr group, step-decay schedule,
// per-step loss log (step,L_s,L_giou,L_box,L_c,L_st,total), per-epoch
// validation, best/last/periodic checkpoints and a run report under out_dir.
// `resume` continues from a snapshot (step counter and RNG streams intact).
TrainResult train_run(const RunConfig& cfg, const std::string& out_dir,
                      const std::string& resume = "");

}  // namespace wg
