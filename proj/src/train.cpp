// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#include "wildground/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <thread>

#include "wildground/errors.hpp"
#include "wildground/io.hpp"
#include "wildground/ops.hpp"
#include "wildground/rng.hpp"

#ifndef WILDGROUND_BUILD_ID
#define WILDGROUND_BUILD_ID "0.1.0+local"
#endif

namespace wg {
namespace fs = std::filesystem;

namespace {

long long parse_ll(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Keep only the most recent k frames (the model consumes exactly K).
SceneInput trim_frames(SceneInput in, int k) {
  if (static_cast<int>(in.clouds.size()) < k) {
    throw ConfigError("dataset provides " + std::to_string(in.clouds.size()) +
                      " frames but the model consumes " + std::to_string(k));
  }
  std::size_t drop = in.clouds.size() - static_cast<std::size_t>(k);
  in.clouds.erase(in.clouds.begin(), in.clouds.begin() + static_cast<std::ptrdiff_t>(drop));
  in.images.erase(in.images.begin(), in.images.begin() + static_cast<std::ptrdiff_t>(drop));
  return in;
}

std::vector<std::int64_t> split_ids(const DatasetManifest& m, const EvalOptions& o) {
  std::int64_t lo = o.test_split ? m.n_train : 0;
  std::int64_t hi = o.test_split ? m.size() : m.n_train;
  if (o.max_scenes > 0) hi = std::min(hi, lo + o.max_scenes);
  std::vector<std::int64_t> ids;
  for (std::int64_t id = lo; id < hi; ++id) ids.push_back(id);
  if (ids.empty()) throw ConfigError("evaluation split is empty");
  return ids;
}

EvalResult finish_eval(std::vector<EvalRecord> records, double total_latency_ms) {
  EvalResult r;
  r.mean_latency_ms = total_latency_ms / static_cast<double>(records.size());
  std::vector<EvalRecord> aabb_records = records;
  for (EvalRecord& rec : aabb_records) rec.iou = aabb_iou(rec.pred, rec.gt);
  r.summary = summarize(records);
  r.aabb = summarize(aabb_records);
  r.records = std::move(records);
  return r;
}

// Runs fn(i) over [0, n) on worker_threads() threads; each call owns slot i.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
  int threads = worker_threads();
  if (threads <= 1 || n < 2) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<std::int64_t> next{0};
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (std::int64_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (std::thread& t : pool) t.join();
}

void put_scalar(Checkpoint& ck, const std::string& key, double v) {
  ck[key] = CheckpointRecord{{1}, {v}};
}

double get_scalar(const Checkpoint& ck, const std::string& key) {
  auto it = ck.find(key);
  if (it == ck.end()) throw ConfigError("checkpoint is missing record '" + key + "'");
  if (it->second.values.size() != 1) {
    throw ConfigError("checkpoint record '" + key + "' is not a scalar");
  }
  return it->second.values[0];
}

}  // namespace

void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  ModelConfig& m = cfg.model;
  PointEncoderConfig& pn = m.pointnet;
  LossWeights& w = cfg.weights;
  if (key == "dataset") cfg.dataset = value;
  else if (key == "epochs") cfg.epochs = parse_ll(value, key);
  else if (key == "batch") cfg.batch = parse_ll(value, key);
  else if (key == "lr") cfg.lr = parse_double(value, key);
  else if (key == "lr_point") cfg.lr_point = parse_double(value, key);
  else if (key == "weight_decay") cfg.weight_decay = parse_double(value, key);
  else if (key == "lr_decay_at") cfg.lr_decay_at = parse_double(value, key);
  else if (key == "lr_decay_factor") cfg.lr_decay_factor = parse_double(value, key);
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_ll(value, key));
  else if (key == "checkpoint_every") cfg.checkpoint_every = parse_ll(value, key);
  else if (key == "max_train_scenes") cfg.max_train_scenes = parse_ll(value, key);
  else if (key == "max_eval_scenes") cfg.max_eval_scenes = parse_ll(value, key);
  else if (key == "eval_every_epoch") cfg.eval_every_epoch = parse_bool(value, key);
  else if (key == "loss.alpha") w.alpha = parse_double(value, key);
  else if (key == "loss.beta") w.beta = parse_double(value, key);
  else if (key == "loss.gamma") w.gamma = parse_double(value, key);
  else if (key == "loss.lambda") w.lambda = parse_double(value, key);
  else if (key == "loss.mu") w.mu = parse_double(value, key);
  else if (key == "model.dim") m.dim = parse_ll(value, key);
  else if (key == "model.heads") m.heads = parse_ll(value, key);
  else if (key == "model.ffn_dim") m.ffn_dim = parse_ll(value, key);
  else if (key == "model.dropout") m.dropout = parse_double(value, key);
  else if (key == "model.dve_layers") m.dve_layers = parse_ll(value, key);
  else if (key == "model.tfi_layers") m.tfi_layers = parse_ll(value, key);
  else if (key == "model.decoder_layers") m.decoder_layers = parse_ll(value, key);
  else if (key == "model.frames") m.frames = static_cast<int>(parse_ll(value, key));
  else if (key == "model.queries") m.queries = parse_ll(value, key);
  else if (key == "model.proj_dim") m.proj_dim = parse_ll(value, key);
  else if (key == "model.temperature") m.temperature = parse_double(value, key);
  else if (key == "model.temporal") m.temporal = temporal_mode_from_string(value);
  else if (key == "model.tfi") m.tfi_enabled = parse_bool(value, key);
  else if (key == "model.fusion") m.fusion = fusion_mode_from_string(value);
  else if (key == "model.pn.s1") pn.s1 = parse_ll(value, key);
  else if (key == "model.pn.s2") pn.s2 = parse_ll(value, key);
  else if (key == "model.pn.radius1") pn.radius1 = parse_double(value, key);
  else if (key == "model.pn.radius2") pn.radius2 = parse_double(value, key);
  else if (key == "model.pn.neighbors") pn.neighbors = static_cast<int>(parse_ll(value, key));
  else if (key == "model.pn.mlp1_hidden") pn.mlp1_hidden = parse_ll(value, key);
  else if (key == "model.pn.mlp1_out") pn.mlp1_out = parse_ll(value, key);
  else if (key == "model.pn.mlp2_hidden") pn.mlp2_hidden = parse_ll(value, key);
  else if (key == "model.pn.mlp2_out") pn.mlp2_out = parse_ll(value, key);
  else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig load_run_config(const std::string& path) {
  RunConfig cfg;
  std::istringstream in(io::read_text_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    set_config_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

std::string config_echo(const RunConfig& cfg) {
  const ModelConfig& m = cfg.model;
  const PointEncoderConfig& pn = m.pointnet;
  std::ostringstream out;
  out << "dataset = " << cfg.dataset << "\n";
  out << "epochs = " << cfg.epochs << "\n";
  out << "batch = " << cfg.batch << "\n";
  out << "lr = " << fmt(cfg.lr) << "\n";
  out << "lr_point = " << fmt(cfg.lr_point) << "\n";
  out << "weight_decay = " << fmt(cfg.weight_decay) << "\n";
  out << "lr_decay_at = " << fmt(cfg.lr_decay_at) << "\n";
  out << "lr_decay_factor = " << fmt(cfg.lr_decay_factor) << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "checkpoint_every = " << cfg.checkpoint_every << "\n";
  out << "max_train_scenes = " << cfg.max_train_scenes << "\n";
  out << "max_eval_scenes = " << cfg.max_eval_scenes << "\n";
  out << "eval_every_epoch = " << (cfg.eval_every_epoch ? 1 : 0) << "\n";
  out << "loss.alpha = " << fmt(cfg.weights.alpha) << "\n";
  out << "loss.beta = " << fmt(cfg.weights.beta) << "\n";
  out << "loss.gamma = " << fmt(cfg.weights.gamma) << "\n";
  out << "loss.lambda = " << fmt(cfg.weights.lambda) << "\n";
  out << "loss.mu = " << fmt(cfg.weights.mu) << "\n";
  out << "model.dim = " << m.dim << "\n";
  out << "model.heads = " << m.heads << "\n";
  out << "model.ffn_dim = " << m.ffn_dim << "\n";
  out << "model.dropout = " << fmt(m.dropout) << "\n";
  out << "model.dve_layers = " << m.dve_layers << "\n";
  out << "model.tfi_layers = " << m.tfi_layers << "\n";
  out << "model.decoder_layers = " << m.decoder_layers << "\n";
  out << "model.frames = " << m.frames << "\n";
  out << "model.queries = " << m.queries << "\n";
  out << "model.proj_dim = " << m.proj_dim << "\n";
  out << "model.temperature = " << fmt(m.temperature) << "\n";
  out << "model.temporal = " << to_string(m.temporal) << "\n";
  out << "model.tfi = " << (m.tfi_enabled ? 1 : 0) << "\n";
  out << "model.fusion = " << to_string(m.fusion) << "\n";
  out << "model.pn.s1 = " << pn.s1 << "\n";
  out << "model.pn.s2 = " << pn.s2 << "\n";
  out << "model.pn.radius1 = " << fmt(pn.radius1) << "\n";
  out << "model.pn.radius2 = " << fmt(pn.radius2) << "\n";
  out << "model.pn.neighbors = " << pn.neighbors << "\n";
  out << "model.pn.mlp1_hidden = " << pn.mlp1_hidden << "\n";
  out << "model.pn.mlp1_out = " << pn.mlp1_out << "\n";
  out << "model.pn.mlp2_hidden = " << pn.mlp2_hidden << "\n";
  out << "model.pn.mlp2_out = " << pn.mlp2_out << "\n";
  return out.str();
}

int worker_threads() {
  const char* env = std::getenv("WILDGROUND_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  long long n = parse_ll(env, "WILDGROUND_THREADS");
  if (n < 1 || n > 256) throw ConfigError("WILDGROUND_THREADS out of range: " + std::string(env));
  return static_cast<int>(n);
}

std::string build_id() { return WILDGROUND_BUILD_ID; }

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

EvalResult evaluate_model(const WildreferModel& model, const DatasetManifest& m,
                          const std::string& manifest_path, const EvalOptions& opts) {
  std::vector<std::int64_t> ids = split_ids(m, opts);
  std::vector<EvalRecord> records(ids.size());
  std::vector<double> latency(ids.size(), 0.0);
  Context ctx;  // evaluation mode: no dropout
  parallel_for(static_cast<std::int64_t>(ids.size()), [&](std::int64_t i) {
    std::int64_t id = ids[static_cast<std::size_t>(i)];
    Scene scene = read_scene(scene_path(m, manifest_path, id));
    SceneInput in = trim_frames(scene_to_input(scene), model.config().frames);
    auto t0 = std::chrono::steady_clock::now();
    Predictions preds = model.forward(in, ctx);
    auto [query, box] = select_target(preds);
    (void)query;
    auto t1 = std::chrono::steady_clock::now();
    latency[static_cast<std::size_t>(i)] =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    EvalRecord& rec = records[static_cast<std::size_t>(i)];
    rec.scene_id = id;
    rec.pred = box;
    rec.gt = scene.gt_box;
    rec.iou = rotated_iou_3d(box, scene.gt_box);
  });
  return finish_eval(std::move(records), std::accumulate(latency.begin(), latency.end(), 0.0));
}

EvalResult evaluate_oracle(const DatasetManifest& m, const std::string& manifest_path,
                           const EvalOptions& opts) {
  std::vector<std::int64_t> ids = split_ids(m, opts);
  std::vector<EvalRecord> records(ids.size());
  std::vector<double> latency(ids.size(), 0.0);
  parallel_for(static_cast<std::int64_t>(ids.size()), [&](std::int64_t i) {
    std::int64_t id = ids[static_cast<std::size_t>(i)];
    Scene scene = read_scene(scene_path(m, manifest_path, id));
    auto t0 = std::chrono::steady_clock::now();
    GeneratedScene g =
        generate_scene(m.scene_seeds[static_cast<std::size_t>(id)], m.difficulty, m.frames);
    std::vector<int> hits = resolve(g.actors, g.query);
    if (hits.size() != 1) {
      throw ConfigError("oracle: scene " + std::to_string(id) + " resolved to " +
                        std::to_string(hits.size()) + " actors");
    }
    Box3D box = actor_box(g.actors[static_cast<std::size_t>(hits[0])]);
    auto t1 = std::chrono::steady_clock::now();
    latency[static_cast<std::size_t>(i)] =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    EvalRecord& rec = records[static_cast<std::size_t>(i)];
    rec.scene_id = id;
    rec.pred = box;
    rec.gt = scene.gt_box;
    rec.iou = rotated_iou_3d(box, scene.gt_box);
  });
  return finish_eval(std::move(records), std::accumulate(latency.begin(), latency.end(), 0.0));
}

EvalResult evaluate_random(const DatasetManifest& m, const std::string& manifest_path,
                           std::uint64_t seed, const EvalOptions& opts) {
  std::vector<std::int64_t> ids = split_ids(m, opts);
  std::vector<EvalRecord> records(ids.size());
  std::vector<double> latency(ids.size(), 0.0);
  constexpr double kPi = 3.14159265358979323846;
  parallel_for(static_cast<std::int64_t>(ids.size()), [&](std::int64_t i) {
    std::int64_t id = ids[static_cast<std::size_t>(i)];
    Scene scene = read_scene(scene_path(m, manifest_path, id));
    auto t0 = std::chrono::steady_clock::now();
    // A box drawn from the same priors the generator uses, so the floor is a
    // fair "guess without looking" baseline.
    Rng rng = Rng(seed).child(static_cast<std::uint64_t>(id));
    double r = std::sqrt(rng.uniform(9.0, 169.0));
    double phi = rng.uniform(-kPi, kPi);
    Box3D box;
    box.x = r * std::cos(phi);
    box.y = r * std::sin(phi);
    double height = rng.uniform(1.15, 1.9);
    box.z = height / 2;
    box.l = box.w = rng.uniform(0.6, 2.0);
    box.h = height + 0.1;
    box.theta = rng.uniform(-kPi, kPi);
    auto t1 = std::chrono::steady_clock::now();
    latency[static_cast<std::size_t>(i)] =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    EvalRecord& rec = records[static_cast<std::size_t>(i)];
    rec.scene_id = id;
    rec.pred = box;
    rec.gt = scene.gt_box;
    rec.iou = rotated_iou_3d(box, scene.gt_box);
  });
  return finish_eval(std::move(records), std::accumulate(latency.begin(), latency.end(), 0.0));
}

void write_eval_outputs(const EvalResult& r, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ostringstream summary;
  summary << "metric,value\n";
  summary << "scenes," << r.summary.n_samples << "\n";
  summary << "acc_at_0.25," << fmt(r.summary.acc_025) << "\n";
  summary << "acc_at_0.5," << fmt(r.summary.acc_05) << "\n";
  summary << "mean_iou," << fmt(r.summary.miou) << "\n";
  summary << "aabb_acc_at_0.25," << fmt(r.aabb.acc_025) << "\n";
  summary << "aabb_acc_at_0.5," << fmt(r.aabb.acc_05) << "\n";
  summary << "aabb_mean_iou," << fmt(r.aabb.miou) << "\n";
  summary << "mean_latency_ms," << fmt(r.mean_latency_ms) << "\n";
  io::write_text_file((fs::path(out_dir) / "summary.csv").string(), summary.str());

  std::ostringstream records;
  records << "scene_id,iou,success_025,success_05\n";
  for (const EvalRecord& rec : r.records) {
    records << rec.scene_id << "," << fmt(rec.iou) << "," << (rec.iou >= 0.25 ? 1 : 0) << ","
            << (rec.iou >= 0.5 ? 1 : 0) << "\n";
  }
  io::write_text_file((fs::path(out_dir) / "records.csv").string(), records.str());
}

EvalSummary summarize_records_csv(const std::string& records_csv) {
  std::istringstream in(io::read_text_file(records_csv));
  std::string line;
  if (!std::getline(in, line) || line != "scene_id,iou,success_025,success_05") {
    throw FormatError(records_csv + ": unexpected records header");
  }
  std::vector<EvalRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    EvalRecord rec;
    if (!std::getline(row, field, ',')) throw FormatError(records_csv + ": bad row: " + line);
    rec.scene_id = parse_ll(field, "scene_id");
    if (!std::getline(row, field, ',')) throw FormatError(records_csv + ": bad row: " + line);
    rec.iou = parse_double(field, "iou");
    records.push_back(rec);
  }
  EvalSummary s;
  s.acc_025 = accuracy_at(records, 0.25);
  s.acc_05 = accuracy_at(records, 0.5);
  s.miou = mean_iou(records);
  s.n_samples = static_cast<std::int64_t>(records.size());
  s.pr_valid = false;  // boxes are not persisted in records.csv
  return s;
}

// ---------------------------------------------------------------------------
// Checkpoint bridge
// ---------------------------------------------------------------------------

Checkpoint snapshot_run(const ParamStore& store, AdamW& opt, const RunConfig& cfg,
                        std::int64_t vocab_size, std::int64_t epoch, double best_acc,
                        std::uint64_t order_rng_state, std::uint64_t dropout_rng_state) {
  Checkpoint ck;
  const auto& params = store.all();
  for (const auto& [name, tensor] : params) {
    ck[name] = CheckpointRecord{tensor.shape(), tensor.values()};
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    ck["opt.m." + params[i].first] =
        CheckpointRecord{params[i].second.shape(), opt.first_moments()[i]};
    ck["opt.v." + params[i].first] =
        CheckpointRecord{params[i].second.shape(), opt.second_moments()[i]};
  }
  put_scalar(ck, "meta.step", static_cast<double>(opt.step_count()));
  put_scalar(ck, "meta.epoch", static_cast<double>(epoch));
  put_scalar(ck, "meta.best_acc", best_acc);
  put_scalar(ck, "meta.lr_scale", opt.lr_scale());
  put_scalar(ck, "meta.vocab_size", static_cast<double>(vocab_size));
  put_scalar(ck, "meta.order_rng", pack_u64(order_rng_state));
  put_scalar(ck, "meta.dropout_rng", pack_u64(dropout_rng_state));
  put_scalar(ck, "cfg.epochs", static_cast<double>(cfg.epochs));
  put_scalar(ck, "cfg.batch", static_cast<double>(cfg.batch));
  put_scalar(ck, "cfg.lr", cfg.lr);
  put_scalar(ck, "cfg.lr_point", cfg.lr_point);
  put_scalar(ck, "cfg.weight_decay", cfg.weight_decay);
  put_scalar(ck, "cfg.lr_decay_at", cfg.lr_decay_at);
  put_scalar(ck, "cfg.lr_decay_factor", cfg.lr_decay_factor);
  put_scalar(ck, "cfg.seed", pack_u64(cfg.seed));
  put_scalar(ck, "cfg.loss.alpha", cfg.weights.alpha);
  put_scalar(ck, "cfg.loss.beta", cfg.weights.beta);
  put_scalar(ck, "cfg.loss.gamma", cfg.weights.gamma);
  put_scalar(ck, "cfg.loss.lambda", cfg.weights.lambda);
  put_scalar(ck, "cfg.loss.mu", cfg.weights.mu);
  const ModelConfig& mc = cfg.model;
  put_scalar(ck, "cfg.model.dim", static_cast<double>(mc.dim));
  put_scalar(ck, "cfg.model.heads", static_cast<double>(mc.heads));
  put_scalar(ck, "cfg.model.ffn_dim", static_cast<double>(mc.ffn_dim));
  put_scalar(ck, "cfg.model.dropout", mc.dropout);
  put_scalar(ck, "cfg.model.dve_layers", static_cast<double>(mc.dve_layers));
  put_scalar(ck, "cfg.model.tfi_layers", static_cast<double>(mc.tfi_layers));
  put_scalar(ck, "cfg.model.decoder_layers", static_cast<double>(mc.decoder_layers));
  put_scalar(ck, "cfg.model.frames", static_cast<double>(mc.frames));
  put_scalar(ck, "cfg.model.queries", static_cast<double>(mc.queries));
  put_scalar(ck, "cfg.model.proj_dim", static_cast<double>(mc.proj_dim));
  put_scalar(ck, "cfg.model.temperature", mc.temperature);
  put_scalar(ck, "cfg.model.temporal", static_cast<double>(static_cast<int>(mc.temporal)));
  put_scalar(ck, "cfg.model.tfi", mc.tfi_enabled ? 1.0 : 0.0);
  put_scalar(ck, "cfg.model.fusion", static_cast<double>(static_cast<int>(mc.fusion)));
  const PointEncoderConfig& pn = mc.pointnet;
  put_scalar(ck, "cfg.model.pn.s1", static_cast<double>(pn.s1));
  put_scalar(ck, "cfg.model.pn.s2", static_cast<double>(pn.s2));
  put_scalar(ck, "cfg.model.pn.radius1", pn.radius1);
  put_scalar(ck, "cfg.model.pn.radius2", pn.radius2);
  put_scalar(ck, "cfg.model.pn.neighbors", static_cast<double>(pn.neighbors));
  put_scalar(ck, "cfg.model.pn.mlp1_hidden", static_cast<double>(pn.mlp1_hidden));
  put_scalar(ck, "cfg.model.pn.mlp1_out", static_cast<double>(pn.mlp1_out));
  put_scalar(ck, "cfg.model.pn.mlp2_hidden", static_cast<double>(pn.mlp2_hidden));
  put_scalar(ck, "cfg.model.pn.mlp2_out", static_cast<double>(pn.mlp2_out));
  return ck;
}

RestoredMeta restore_meta(const Checkpoint& ck) {
  RestoredMeta r;
  RunConfig& cfg = r.cfg;
  cfg.epochs = static_cast<std::int64_t>(get_scalar(ck, "cfg.epochs"));
  cfg.batch = static_cast<std::int64_t>(get_scalar(ck, "cfg.batch"));
  cfg.lr = get_scalar(ck, "cfg.lr");
  cfg.lr_point = get_scalar(ck, "cfg.lr_point");
  cfg.weight_decay = get_scalar(ck, "cfg.weight_decay");
  cfg.lr_decay_at = get_scalar(ck, "cfg.lr_decay_at");
  cfg.lr_decay_factor = get_scalar(ck, "cfg.lr_decay_factor");
  cfg.seed = unpack_u64(get_scalar(ck, "cfg.seed"));
  cfg.weights.alpha = get_scalar(ck, "cfg.loss.alpha");
  cfg.weights.beta = get_scalar(ck, "cfg.loss.beta");
  cfg.weights.gamma = get_scalar(ck, "cfg.loss.gamma");
  cfg.weights.lambda = get_scalar(ck, "cfg.loss.lambda");
  cfg.weights.mu = get_scalar(ck, "cfg.loss.mu");
  ModelConfig& mc = cfg.model;
  mc.dim = static_cast<std::int64_t>(get_scalar(ck, "cfg.model.dim"));
  mc.heads = static_cast<std::int64_t>(get_scalar(ck, "cfg.model.heads"));
  mc.ffn_dim = static_cast<std::int64_t>(get_scalar(ck, "cfg.model.ffn_dim"));
  mc.dropout = get_scalar(ck, "cfg.model.dropout");
  mc.dve_layers = static_cast<std::int64_t>(get_scalar(ck, "cfg.model.dve_layers"));
  mc.tfi_layers = static_cast<std::int64_t>(get_scalar(ck, "cfg.model.tfi_layers"));
  mc.decoder_layers = static_cast<std::int64_t>(get_scalar(ck, "cfg.model.decoder_layers"));
  mc.frames = static_cast<int>(get_scalar(ck, "cfg.model.frames"));
  mc.queries = static_cast<std::int64_t>(get_scalar(ck, "cfg.model.queries"));
  mc.proj_dim = static_cast<std::int64_t>(get_scalar(ck, "cfg.model.proj_dim"));
  mc.temperature = get_scalar(ck, "cfg.model.temperature");
  mc.temporal = static_cast<TemporalMode>(static_cast<int>(get_scalar(ck, "cfg.model.temporal")));
  mc.tfi_enabled = get_scalar(ck, "cfg.model.tfi") != 0.0;
  mc.fusion = static_cast<FusionMode>(static_cast<int>(get_scalar(ck, "cfg.model.fusion")));
  PointEncoderConfig& pn = mc.pointnet;
  pn.s1 = static_cast<std::int64_t>(get_scalar(ck, "cfg.model.pn.s1"));
  pn.s2 = static_cast<std::int64_t>(get_scalar(ck, "cfg.model.pn.s2"));
  pn.radius1 = get_scalar(ck, "cfg.model.pn.radius1");
  pn.radius2 = get_scalar(ck, "cfg.model.pn.radius2");
  pn.neighbors = static_cast<int>(get_scalar(ck, "cfg.model.pn.neighbors"));
  pn.mlp1_hidden = static_cast<std::int64_t>(get_scalar(ck, "cfg.model.pn.mlp1_hidden"));
  pn.mlp1_out = static_cast<std::int64_t>(get_scalar(ck, "cfg.model.pn.mlp1_out"));
  pn.mlp2_hidden = static_cast<std::int64_t>(get_scalar(ck, "cfg.model.pn.mlp2_hidden"));
  pn.mlp2_out = static_cast<std::int64_t>(get_scalar(ck, "cfg.model.pn.mlp2_out"));
  r.vocab_size = static_cast<std::int64_t>(get_scalar(ck, "meta.vocab_size"));
  r.epoch = static_cast<std::int64_t>(get_scalar(ck, "meta.epoch"));
  r.best_acc = get_scalar(ck, "meta.best_acc");
  r.order_rng_state = unpack_u64(get_scalar(ck, "meta.order_rng"));
  r.dropout_rng_state = unpack_u64(get_scalar(ck, "meta.dropout_rng"));
  return r;
}

void restore_params(const Checkpoint& ck, ParamStore& store) {
  for (const auto& [name, tensor] : store.all()) {
    auto it = ck.find(name);
    if (it == ck.end()) {
      throw ConfigError("checkpoint does not match the model: missing parameter '" + name + "'");
    }
    store.load_values(name, it->second.shape, it->second.values);
    (void)tensor;
  }
}

void restore_optimizer(const Checkpoint& ck, const ParamStore& store, AdamW& opt) {
  const auto& params = store.all();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto mi = ck.find("opt.m." + params[i].first);
    auto vi = ck.find("opt.v." + params[i].first);
    if (mi == ck.end() || vi == ck.end()) {
      throw ConfigError("checkpoint has no optimizer state for '" + params[i].first + "'");
    }
    if (mi->second.values.size() != opt.first_moments()[i].size() ||
        vi->second.values.size() != opt.second_moments()[i].size()) {
      throw ShapeError("optimizer state size mismatch for '" + params[i].first + "'");
    }
    opt.first_moments()[i] = mi->second.values;
    opt.second_moments()[i] = vi->second.values;
  }
  opt.set_step_count(static_cast<std::int64_t>(get_scalar(ck, "meta.step")));
  opt.set_lr_scale(get_scalar(ck, "meta.lr_scale"));
}

LoadedModel load_model(const std::string& checkpoint_path) {
  Checkpoint ck = load_checkpoint(checkpoint_path);
  RestoredMeta meta = restore_meta(ck);
  ParamStore store;
  Rng init(0);  // immediately overwritten by the checkpoint values
  WildreferModel model(store, meta.cfg.model, meta.vocab_size, init);
  restore_params(ck, store);
  return LoadedModel{std::move(store), std::move(model), std::move(meta)};
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

void write_report(const std::string& out_dir, const RunConfig& cfg, const TrainResult& res) {
  std::ostringstream out;
  out << "wildground run report\n";
  out << "build: " << build_id() << "\n";
  out << "wall_seconds: " << fmt(res.wall_seconds) << "\n";
  out << "steps: " << res.steps << "\n";
  out << "epochs_run: " << res.epochs_run << "\n";
  out << "aborted: " << (res.aborted ? 1 : 0) << "\n";
  if (res.aborted) out << "abort_step: " << res.abort_step << "\n";
  out << "best_val_acc_025: " << fmt(res.best_val_acc) << "\n";
  out << "final_val_acc_025: " << fmt(res.final_eval.acc_025) << "\n";
  out << "final_val_acc_05: " << fmt(res.final_eval.acc_05) << "\n";
  out << "final_val_miou: " << fmt(res.final_eval.miou) << "\n";
  out << "last_checkpoint: " << res.last_checkpoint << "\n";
  out << "best_checkpoint: " << res.best_checkpoint << "\n";
  out << "--- config ---\n";
  out << config_echo(cfg);
  io::write_text_file((fs::path(out_dir) / "report.txt").string(), out.str());
}

}  // namespace

TrainResult train_run(const RunConfig& cfg_in, const std::string& out_dir,
                      const std::string& resume) {
  RunConfig cfg = cfg_in;
  cfg.model.validate();
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (cfg.batch < 1) throw ConfigError("batch must be >= 1");
  fs::create_directories(out_dir);

  DatasetManifest manifest = read_manifest(cfg.dataset);
  if (manifest.frames < cfg.model.frames) {
    throw ConfigError("dataset has " + std::to_string(manifest.frames) +
                      " frames per scene; the model consumes " +
                      std::to_string(cfg.model.frames));
  }
  Vocabulary vocab = Vocabulary::load(
      (fs::path(cfg.dataset).parent_path() / manifest.vocab_path).string());

  ParamStore store;
  Rng init_rng(cfg.seed);
  Rng order_rng = Rng(cfg.seed).child(1);
  Rng dropout_rng = Rng(cfg.seed).child(2);
  std::int64_t start_epoch = 0;
  double best_acc = -1.0;

  WildreferModel model(store, cfg.model, vocab.size(), init_rng);
  AdamWConfig oc;
  oc.lr = cfg.lr;
  oc.weight_decay = cfg.weight_decay;
  AdamW opt(store, oc, {{"pointnet.", cfg.lr_point}});

  if (!resume.empty()) {
    Checkpoint ck = load_checkpoint(resume);
    RestoredMeta meta = restore_meta(ck);
    if (meta.vocab_size != vocab.size()) {
      throw ConfigError("checkpoint vocabulary size " + std::to_string(meta.vocab_size) +
                        " != dataset vocabulary " + std::to_string(vocab.size()));
    }
    if (meta.cfg.model.dim != cfg.model.dim || meta.cfg.model.frames != cfg.model.frames ||
        meta.cfg.model.queries != cfg.model.queries ||
        meta.cfg.model.temporal != cfg.model.temporal ||
        meta.cfg.model.fusion != cfg.model.fusion ||
        meta.cfg.model.tfi_enabled != cfg.model.tfi_enabled) {
      throw ConfigError("checkpoint model configuration does not match the run config");
    }
    restore_params(ck, store);
    restore_optimizer(ck, store, opt);
    start_epoch = meta.epoch;
    best_acc = meta.best_acc;
    order_rng.set_state(meta.order_rng_state);
    dropout_rng.set_state(meta.dropout_rng_state);
  }

  // Preload the training split; scenes are small and epochs revisit them.
  std::int64_t n_train = manifest.n_train;
  if (cfg.max_train_scenes > 0) n_train = std::min(n_train, cfg.max_train_scenes);
  std::vector<SceneInput> inputs;
  std::vector<Box3D> gts;
  inputs.reserve(static_cast<std::size_t>(n_train));
  for (std::int64_t id = 0; id < n_train; ++id) {
    Scene s = read_scene(scene_path(manifest, cfg.dataset, id));
    inputs.push_back(trim_frames(scene_to_input(s), cfg.model.frames));
    gts.push_back(s.gt_box);
  }

  std::string log_path = (fs::path(out_dir) / "loss_log.csv").string();
  std::ofstream log(log_path, resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw IoError("cannot open loss log: " + log_path);
  if (resume.empty()) log << "step,L_s,L_giou,L_box,L_c,L_st,total\n";

  std::string last_path = (fs::path(out_dir) / "last.wgckpt").string();
  std::string best_path = (fs::path(out_dir) / "best.wgckpt").string();
  auto save = [&](const std::string& path, std::int64_t epoch) {
    save_checkpoint(path, snapshot_run(store, opt, cfg, vocab.size(), epoch, best_acc,
                                       order_rng.state(), dropout_rng.state()));
  };
  // A step-zero snapshot guarantees a "last good" checkpoint exists from the
  // first moment a non-finite loss could abort the run.
  if (resume.empty()) save(last_path, 0);

  TrainResult res;
  res.last_checkpoint = last_path;
  auto t_start = std::chrono::steady_clock::now();
  std::int64_t decay_epoch = static_cast<std::int64_t>(
      std::floor(static_cast<double>(cfg.epochs) * cfg.lr_decay_at));

  for (std::int64_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    opt.set_lr_scale(epoch >= decay_epoch ? cfg.lr_decay_factor : 1.0);
    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), 0u);
    order_rng.shuffle(order);

    for (std::size_t chunk = 0; chunk < order.size(); chunk += static_cast<std::size_t>(cfg.batch)) {
      std::size_t chunk_end = std::min(order.size(), chunk + static_cast<std::size_t>(cfg.batch));
      double n = static_cast<double>(chunk_end - chunk);
      store.zero_grad();
      double sums[6] = {0, 0, 0, 0, 0, 0};
      auto abort_run = [&]() {
        res.aborted = true;
        res.abort_step = opt.step_count() + 1;
        res.steps = opt.step_count();
        res.epochs_run = epoch - start_epoch;
        res.best_val_acc = best_acc;
        res.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        log.flush();
        write_report(out_dir, cfg, res);
        return res;  // last.wgckpt still holds the previous good state
      };
      try {
        for (std::size_t k = chunk; k < chunk_end; ++k) {
          const SceneInput& in = inputs[order[k]];
          Context ctx;
          ctx.training = true;
          ctx.rng = &dropout_rng;
          Predictions preds = model.forward(in, ctx);
          LossBreakdown lb = compute_losses(preds, gts[order[k]], cfg.weights,
                                            cfg.model.temperature);
          double total = lb.total.item();
          if (!std::isfinite(total)) return abort_run();
          mul_scalar(lb.total, 1.0 / n).backward();
          sums[0] += lb.l_s.item();
          sums[1] += lb.l_giou.item();
          sums[2] += lb.l_box.item();
          sums[3] += lb.l_c.item();
          sums[4] += lb.l_st.item();
          sums[5] += total;
        }
        opt.step();
      } catch (const NumericError&) {
        // With finite checks enabled an overflow throws inside the graph
        // before the loss scalar is ever materialized.
        return abort_run();
      }
      log << opt.step_count() << "," << fmt(sums[0] / n) << "," << fmt(sums[1] / n) << ","
          << fmt(sums[2] / n) << "," << fmt(sums[3] / n) << "," << fmt(sums[4] / n) << ","
          << fmt(sums[5] / n) << "\n";
    }
    log.flush();

    if (cfg.eval_every_epoch) {
      EvalOptions eo;
      eo.test_split = true;
      eo.max_scenes = cfg.max_eval_scenes;
      EvalResult ev = evaluate_model(model, manifest, cfg.dataset, eo);
      res.final_eval = ev.summary;
      if (ev.summary.acc_025 > best_acc) {
        best_acc = ev.summary.acc_025;
        save(best_path, epoch + 1);
        res.best_checkpoint = best_path;
      }
    }
    save(last_path, epoch + 1);
    if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
      char buf[48];
      std::snprintf(buf, sizeof buf, "epoch_%04lld.wgckpt", static_cast<long long>(epoch + 1));
      save((fs::path(out_dir) / buf).string(), epoch + 1);
    }
    res.epochs_run = epoch - start_epoch + 1;
  }

  res.steps = opt.step_count();
  res.best_val_acc = best_acc;
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  write_report(out_dir, cfg, res);
  return res;
}

}  // namespace wg
