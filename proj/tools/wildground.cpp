// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface: dataset generation, training, evaluation, inference,
// gradient checking and ablation orchestration.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wildground/errors.hpp"
#include "wildground/gradcheck.hpp"
#include "wildground/io.hpp"
#include "wildground/train.hpp"

namespace fs = std::filesystem;
using namespace wg;

namespace {

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& sets) {
  for (const std::string& kv : sets) {
    std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    }
    std::string key = kv.substr(0, eq);
    std::string value = kv.substr(eq + 1);
    auto strip = [](std::string s) {
      std::size_t b = s.find_first_not_of(" \t");
      std::size_t e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    set_config_key(cfg, strip(key), strip(value));
  }
}

void print_summary(const char* label, const EvalResult& r) {
  std::printf("%s: Acc@0.25 %.4f  Acc@0.5 %.4f  mIOU %.4f  (%lld scenes, %.2f ms/scene)\n",
              label, r.summary.acc_025, r.summary.acc_05, r.summary.miou,
              static_cast<long long>(r.summary.n_samples), r.mean_latency_ms);
}

int cmd_generate(const std::string& out, std::int64_t train, std::int64_t test,
                 std::uint64_t seed, const std::string& difficulty, int frames) {
  DatasetManifest m =
      build_dataset(out, train, test, seed, difficulty_from_string(difficulty), frames);
  Vocabulary vocab = dataset_vocabulary();
  std::printf("wrote %lld scenes (%lld train / %lld test) under %s\n",
              static_cast<long long>(m.size()), static_cast<long long>(m.n_train),
              static_cast<long long>(m.n_test), out.c_str());
  std::printf("difficulty %s, %d frames, vocabulary %lld words\n",
              to_string(m.difficulty).c_str(), m.frames,
              static_cast<long long>(vocab.size()));
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& out, const std::string& resume) {
  fs::create_directories(out);
  io::write_text_file((fs::path(out) / "config.txt").string(), config_echo(cfg));
  TrainResult res = train_run(cfg, out, resume);
  if (res.aborted) {
    std::fprintf(stderr,
                 "training aborted: non-finite loss at step %lld; "
                 "last good checkpoint retained at %s\n",
                 static_cast<long long>(res.abort_step), res.last_checkpoint.c_str());
    return 3;
  }
  std::printf("trained %lld steps over %lld epochs in %.1f s\n",
              static_cast<long long>(res.steps), static_cast<long long>(res.epochs_run),
              res.wall_seconds);
  if (cfg.eval_every_epoch) {
    std::printf("validation: best Acc@0.25 %.4f, final Acc@0.25 %.4f  Acc@0.5 %.4f  mIOU %.4f\n",
                res.best_val_acc, res.final_eval.acc_025, res.final_eval.acc_05,
                res.final_eval.miou);
  }
  std::printf("checkpoints: %s%s%s\n", res.last_checkpoint.c_str(),
              res.best_checkpoint.empty() ? "" : ", best: ",
              res.best_checkpoint.c_str());
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& dataset, const std::string& out,
             const std::string& mode, const std::string& split, std::int64_t max_scenes,
             std::uint64_t seed) {
  DatasetManifest m = read_manifest(dataset);
  EvalOptions opts;
  opts.test_split = split == "test";
  opts.max_scenes = max_scenes;
  EvalResult r;
  if (mode == "model") {
    if (checkpoint.empty()) throw ConfigError("--checkpoint is required for --mode model");
    LoadedModel lm = load_model(checkpoint);
    r = evaluate_model(lm.model, m, dataset, opts);
  } else if (mode == "oracle") {
    r = evaluate_oracle(m, dataset, opts);
  } else if (mode == "random") {
    r = evaluate_random(m, dataset, seed, opts);
  } else {
    throw ConfigError("unknown eval mode '" + mode + "' (model | oracle | random)");
  }
  write_eval_outputs(r, out);
  print_summary(mode.c_str(), r);
  std::printf("axis-aligned diagnostic: Acc@0.25 %.4f  Acc@0.5 %.4f  mIOU %.4f\n",
              r.aabb.acc_025, r.aabb.acc_05, r.aabb.miou);
  std::printf("wrote %s and %s\n", (fs::path(out) / "summary.csv").string().c_str(),
              (fs::path(out) / "records.csv").string().c_str());
  return 0;
}

int cmd_infer(const std::string& checkpoint, const std::string& scene_file) {
  LoadedModel lm = load_model(checkpoint);
  Scene scene = read_scene(scene_file);
  SceneInput in = scene_to_input(scene);
  int k = lm.model.config().frames;
  if (static_cast<int>(in.clouds.size()) > k) {
    in.clouds.erase(in.clouds.begin(),
                    in.clouds.begin() + static_cast<std::ptrdiff_t>(in.clouds.size() - k));
    in.images.erase(in.images.begin(),
                    in.images.begin() + static_cast<std::ptrdiff_t>(in.images.size() - k));
  }
  Context ctx;
  Predictions preds = lm.model.forward(in, ctx);
  auto [query, box] = select_target(preds);
  std::printf("selected query %lld of %lld\n", static_cast<long long>(query),
              static_cast<long long>(preds.boxes.size()));
  std::printf("predicted box: center (%.3f, %.3f, %.3f)  size (%.3f, %.3f, %.3f)\n", box.x,
              box.y, box.z, box.l, box.w, box.h);
  double iou = rotated_iou_3d(box, scene.gt_box);
  std::printf("stored ground truth IoU: %.4f  (success@0.25: %s)\n", iou,
              iou >= 0.25 ? "yes" : "no");
  return 0;
}

int cmd_gradcheck(const std::string& scope, int instances, double tol, std::uint64_t seed,
                  const std::string& corrupt_op) {
  std::vector<GradCheckReport> reports = run_gradcheck(scope, instances, tol, seed, corrupt_op);
  if (reports.empty()) {
    std::fprintf(stderr, "no gradient checks matched scope '%s'\n", scope.c_str());
    return 1;
  }
  bool all_pass = true;
  for (const GradCheckReport& r : reports) {
    std::printf("%-28s %-9s max_rel_err %.3e over %d instances  %s\n", r.name.c_str(),
                r.scope.c_str(), r.max_rel_err, r.instances, r.pass ? "PASS" : "FAIL");
    all_pass = all_pass && r.pass;
  }
  std::printf("%zu ops checked, tolerance %.1e: %s\n", reports.size(), tol,
              all_pass ? "all pass" : "FAILURES");
  return all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// Ablation suite
// ---------------------------------------------------------------------------

struct AblationVariant {
  std::string name;
  Difficulty difficulty;
  // Model switches relative to the reduced ablation profile.
  TemporalMode temporal = TemporalMode::kDve;
  bool tfi = true;
  FusionMode fusion = FusionMode::kOurs;
  int frames = 2;
};

struct VariantScore {
  bool ok = false;
  std::string error;
  EvalSummary summary;
};

// Reduced profile: small enough that the whole suite runs on a desk, big
// enough that the architectural contrasts show.
RunConfig ablation_profile(const RunConfig& base) {
  RunConfig cfg = base;
  ModelConfig& m = cfg.model;
  m.dim = 96;
  m.heads = 8;
  m.ffn_dim = 128;
  m.dve_layers = 1;
  m.tfi_layers = 2;
  m.decoder_layers = 3;
  m.queries = 12;
  m.proj_dim = 32;
  m.pointnet.s1 = 192;
  m.pointnet.s2 = 48;
  m.pointnet.mlp1_hidden = 24;
  m.pointnet.mlp1_out = 48;
  m.pointnet.mlp2_hidden = 96;
  m.pointnet.mlp2_out = 96;
  return cfg;
}

std::vector<AblationVariant> suite_variants(const std::string& suite, Difficulty difficulty) {
  std::vector<AblationVariant> v;
  auto add = [&](std::string name, Difficulty d, TemporalMode t, bool tfi, FusionMode f,
                 int frames) {
    v.push_back({std::move(name), d, t, tfi, f, frames});
  };
  if (suite == "matrix" || suite == "full") {
    for (int k = 1; k <= 3; ++k) {
      std::string kk = "_k" + std::to_string(k);
      add("baseline" + kk, difficulty, TemporalMode::kNone, false, FusionMode::kOurs, k);
      add("dve" + kk, difficulty, TemporalMode::kDve, false, FusionMode::kOurs, k);
      add("dve_tfi" + kk, difficulty, TemporalMode::kDve, true, FusionMode::kOurs, k);
    }
  }
  if (suite == "fusion" || suite == "full") {
    add("fusion_ours", difficulty, TemporalMode::kDve, true, FusionMode::kOurs, 2);
    add("fusion_vision_first", difficulty, TemporalMode::kDve, true, FusionMode::kVisionFirst, 2);
    add("fusion_image_dominant", difficulty, TemporalMode::kDve, true,
        FusionMode::kImageDominant, 2);
    add("fusion_concat", difficulty, TemporalMode::kDve, true, FusionMode::kConcat, 2);
  }
  if (suite == "temporal" || suite == "full") {
    add("in_con_k2", difficulty, TemporalMode::kInCon, true, FusionMode::kOurs, 2);
    add("fe_con_k2", difficulty, TemporalMode::kFeCon, true, FusionMode::kOurs, 2);
  }
  if (suite == "acceptance") {
    // The four directional contrasts, each on its matched difficulty.
    add("baseline_k1", Difficulty::kMotionOnly, TemporalMode::kNone, false, FusionMode::kOurs, 1);
    add("dve_k2", Difficulty::kMotionOnly, TemporalMode::kDve, false, FusionMode::kOurs, 2);
    add("dve_k2", Difficulty::kColorOnly, TemporalMode::kDve, false, FusionMode::kOurs, 2);
    add("dve_tfi_k2", Difficulty::kColorOnly, TemporalMode::kDve, true, FusionMode::kOurs, 2);
    add("fusion_ours", Difficulty::kDefault, TemporalMode::kDve, true, FusionMode::kOurs, 2);
    add("fusion_concat", Difficulty::kDefault, TemporalMode::kDve, true, FusionMode::kConcat, 2);
    add("fusion_image_dominant", Difficulty::kDefault, TemporalMode::kDve, true,
        FusionMode::kImageDominant, 2);
  }
  if (v.empty()) throw ConfigError("unknown ablation suite '" + suite + "'");
  return v;
}

struct SeedStats {
  double mean = 0, stddev = 0;
  int n = 0;
};

SeedStats stats(const std::vector<double>& xs) {
  SeedStats s;
  s.n = static_cast<int>(xs.size());
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  double var = 0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  if (xs.size() > 1) var /= static_cast<double>(xs.size() - 1);
  s.stddev = std::sqrt(var);
  return s;
}

int cmd_ablate(const RunConfig& base, const std::string& out, const std::string& suite,
               const std::string& difficulty, int repeats, std::int64_t n_train,
               std::int64_t n_test) {
  fs::create_directories(out);
  RunConfig profile = ablation_profile(base);
  std::vector<AblationVariant> variants = suite_variants(suite, difficulty_from_string(difficulty));

  // One dataset per (difficulty, frames) pair, shared by every variant that
  // needs it so comparisons are matched.
  std::map<std::pair<int, int>, std::string> datasets;
  auto dataset_for = [&](Difficulty d, int frames) -> std::string {
    auto key = std::make_pair(static_cast<int>(d), frames);
    auto it = datasets.find(key);
    if (it != datasets.end()) return it->second;
    fs::path dir = fs::path(out) / "data" / (to_string(d) + "_f" + std::to_string(frames));
    build_dataset(dir.string(), n_train, n_test, profile.seed, d, frames);
    std::string manifest = (dir / "manifest.txt").string();
    datasets[key] = manifest;
    return manifest;
  };

  std::ostringstream rows;
  rows << "suite,variant,difficulty,seed,status,acc_025,acc_05,miou\n";
  std::map<std::string, std::vector<double>> acc_by_variant;
  std::map<std::string, std::string> variant_difficulty;

  for (const AblationVariant& var : variants) {
    std::string key = to_string(var.difficulty) + "/" + var.name;
    variant_difficulty[key] = to_string(var.difficulty);
    for (int rep = 0; rep < repeats; ++rep) {
      RunConfig cfg = profile;
      cfg.model.temporal = var.temporal;
      cfg.model.tfi_enabled = var.tfi;
      cfg.model.fusion = var.fusion;
      cfg.model.frames = var.frames;
      cfg.seed = profile.seed + 1000 * static_cast<std::uint64_t>(rep + 1);
      cfg.eval_every_epoch = false;  // one clean eval at the end
      std::uint64_t run_seed = cfg.seed;
      std::string run_dir =
          (fs::path(out) / "runs" / (to_string(var.difficulty) + "_" + var.name) /
           ("seed" + std::to_string(run_seed)))
              .string();
      std::string status = "ok";
      EvalSummary summary;
      try {
        cfg.dataset = dataset_for(var.difficulty, std::max(var.frames, 2));
        TrainResult res = train_run(cfg, run_dir);
        if (res.aborted) throw NumericError("non-finite loss at step " +
                                            std::to_string(res.abort_step));
        LoadedModel lm = load_model(res.last_checkpoint);
        DatasetManifest m = read_manifest(cfg.dataset);
        EvalOptions eo;
        EvalResult ev = evaluate_model(lm.model, m, cfg.dataset, eo);
        write_eval_outputs(ev, run_dir);
        summary = ev.summary;
      } catch (const std::exception& e) {
        status = std::string("failed: ") + e.what();
      }
      rows << suite << "," << var.name << "," << to_string(var.difficulty) << "," << run_seed
           << ",";
      if (status == "ok") {
        rows << "ok," << summary.acc_025 << "," << summary.acc_05 << "," << summary.miou << "\n";
        acc_by_variant[key].push_back(summary.acc_025);
        std::printf("%-28s %-12s seed %-8llu Acc@0.25 %.4f  mIOU %.4f\n", var.name.c_str(),
                    to_string(var.difficulty).c_str(),
                    static_cast<unsigned long long>(run_seed), summary.acc_025, summary.miou);
      } else {
        std::string quoted = status;
        for (char& c : quoted) {
          if (c == ',' || c == '\n') c = ';';
        }
        rows << quoted << ",,,\n";
        std::fprintf(stderr, "%-28s %-12s seed %llu %s\n", var.name.c_str(),
                     to_string(var.difficulty).c_str(),
                     static_cast<unsigned long long>(run_seed), status.c_str());
      }
      io::write_text_file((fs::path(out) / "ablation.csv").string(), rows.str());
    }
  }

  std::ostringstream summary_csv;
  summary_csv << "variant,difficulty,repeats,acc_025_mean,acc_025_std\n";
  for (const auto& [key, accs] : acc_by_variant) {
    SeedStats s = stats(accs);
    std::string name = key.substr(key.find('/') + 1);
    summary_csv << name << "," << variant_difficulty[key] << "," << s.n << "," << s.mean << ","
                << s.stddev << "\n";
    std::printf("%-28s %-12s mean Acc@0.25 %.4f +/- %.4f over %d seeds\n", name.c_str(),
                variant_difficulty[key].c_str(), s.mean, s.stddev, s.n);
  }
  io::write_text_file((fs::path(out) / "ablation_summary.csv").string(), summary_csv.str());

  // Directional contrasts, reported whenever both sides ran.
  struct Contrast {
    const char* better;
    const char* worse;
    const char* difficulty;
    bool strict;
  };
  const Contrast contrasts[] = {
      {"dve_k2", "baseline_k1", "motion-only", true},
      {"dve_tfi_k2", "dve_k2", "color-only", true},
      {"fusion_ours", "fusion_concat", "default", true},
      {"fusion_ours", "fusion_image_dominant", "default", false},
  };
  for (const Contrast& c : contrasts) {
    auto a = acc_by_variant.find(std::string(c.difficulty) + "/" + c.better);
    auto b = acc_by_variant.find(std::string(c.difficulty) + "/" + c.worse);
    if (a == acc_by_variant.end() || b == acc_by_variant.end()) continue;
    SeedStats sa = stats(a->second), sb = stats(b->second);
    double pooled = std::sqrt((sa.stddev * sa.stddev + sb.stddev * sb.stddev) / 2.0);
    double gap = sa.mean - sb.mean;
    bool pass = c.strict ? gap > pooled : gap >= -pooled;
    std::printf("contrast [%s] %s (%.4f) vs %s (%.4f): gap %+.4f, pooled std %.4f -> %s\n",
                c.difficulty, c.better, sa.mean, c.worse, sb.mean, gap, pooled,
                pass ? "PASS" : "MISS");
  }
  std::printf("wrote %s\n", (fs::path(out) / "ablation.csv").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wildground: multi-frame 3D visual grounding on synthetic dynamic scenes"};
  app.require_subcommand(1);

  // generate ----------------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "Synthesize a scene dataset with a manifest");
  std::string gen_out;
  std::int64_t gen_train = 500, gen_test = 125;
  std::uint64_t gen_seed = 0;
  std::string gen_difficulty = "default";
  int gen_frames = 2;
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_option("--train", gen_train, "Training scene count");
  gen->add_option("--test", gen_test, "Held-out scene count");
  gen->add_option("--seed", gen_seed, "Master seed");
  gen->add_option("--difficulty", gen_difficulty, "default | color-only | motion-only");
  gen->add_option("--frames", gen_frames, "Frames per scene");

  // train -------------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "Train a model on a generated dataset");
  std::string tr_config, tr_out, tr_resume, tr_dataset;
  std::vector<std::string> tr_sets;
  std::int64_t tr_epochs = -1, tr_batch = -1, tr_max_train = -1, tr_max_eval = -1;
  long long tr_seed = -1;
  tr->add_option("--config", tr_config, "key = value config file");
  tr->add_option("--out", tr_out, "Run directory (checkpoints, logs, report)")->required();
  tr->add_option("--dataset", tr_dataset, "Dataset manifest path");
  tr->add_option("--epochs", tr_epochs, "Override epoch count");
  tr->add_option("--batch", tr_batch, "Override batch size");
  tr->add_option("--seed", tr_seed, "Override seed");
  tr->add_option("--max-train-scenes", tr_max_train, "Cap the train split (smoke runs)");
  tr->add_option("--max-eval-scenes", tr_max_eval, "Cap the validation split");
  tr->add_option("--resume", tr_resume, "Checkpoint to resume from");
  tr->add_option("--set", tr_sets, "Extra config overrides, key=value")->take_all();

  // eval --------------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint, the oracle, or a random baseline");
  std::string ev_ckpt, ev_dataset, ev_out, ev_mode = "model", ev_split = "test";
  std::int64_t ev_max = 0;
  std::uint64_t ev_seed = 0;
  ev->add_option("--checkpoint", ev_ckpt, "Model checkpoint (--mode model)");
  ev->add_option("--dataset", ev_dataset, "Dataset manifest path")->required();
  ev->add_option("--out", ev_out, "Output directory for summary.csv / records.csv")->required();
  ev->add_option("--mode", ev_mode, "model | oracle | random");
  ev->add_option("--split", ev_split, "test | train");
  ev->add_option("--max-scenes", ev_max, "Cap the evaluated scene count");
  ev->add_option("--seed", ev_seed, "Seed for the random baseline");

  // infer -------------------------------------------------------------------
  auto* in = app.add_subcommand("infer", "Ground one scene file with a checkpoint");
  std::string in_ckpt, in_scene;
  in->add_option("--checkpoint", in_ckpt, "Model checkpoint")->required();
  in->add_option("--scene", in_scene, "Scene file (.wgs)")->required();

  // gradcheck ---------------------------------------------------------------
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  std::string gc_scope = "all", gc_corrupt;
  int gc_instances = 3;
  double gc_tol = 1e-4;
  std::uint64_t gc_seed = 0;
  gc->add_option("--scope", gc_scope, "core | geometry | model | loss | all");
  gc->add_option("--instances", gc_instances, "Randomized instances per op");
  gc->add_option("--tol", gc_tol, "Relative-error tolerance");
  gc->add_option("--seed", gc_seed, "Instance seed");
  gc->add_option("--corrupt-op", gc_corrupt, "Test fixture: corrupt this op's gradient")
      ->group("");  // hidden

  // ablate ------------------------------------------------------------------
  auto* ab = app.add_subcommand("ablate", "Train and score the ablation variant matrix");
  std::string ab_out, ab_suite = "full", ab_difficulty = "default", ab_config;
  std::vector<std::string> ab_sets;
  int ab_repeats = 3;
  std::int64_t ab_train = 160, ab_test = 48, ab_epochs = 10;
  std::uint64_t ab_seed = 0;
  ab->add_option("--out", ab_out, "Suite output directory")->required();
  ab->add_option("--suite", ab_suite, "full | matrix | fusion | temporal | acceptance");
  ab->add_option("--difficulty", ab_difficulty, "Dataset difficulty for matrix/fusion/temporal");
  ab->add_option("--repeats", ab_repeats, "Seeds per variant");
  ab->add_option("--train", ab_train, "Train scenes per dataset");
  ab->add_option("--test", ab_test, "Test scenes per dataset");
  ab->add_option("--epochs", ab_epochs, "Epochs per run");
  ab->add_option("--seed", ab_seed, "Base seed");
  ab->add_option("--config", ab_config, "Base config file for the runs");
  ab->add_option("--set", ab_sets, "Extra config overrides, key=value")->take_all();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return cmd_generate(gen_out, gen_train, gen_test, gen_seed, gen_difficulty, gen_frames);
    }
    if (tr->parsed()) {
      RunConfig cfg = tr_config.empty() ? RunConfig{} : load_run_config(tr_config);
      apply_overrides(cfg, tr_sets);
      if (!tr_dataset.empty()) cfg.dataset = tr_dataset;
      if (tr_epochs >= 0) cfg.epochs = tr_epochs;
      if (tr_batch >= 0) cfg.batch = tr_batch;
      if (tr_seed >= 0) cfg.seed = static_cast<std::uint64_t>(tr_seed);
      if (tr_max_train >= 0) cfg.max_train_scenes = tr_max_train;
      if (tr_max_eval >= 0) cfg.max_eval_scenes = tr_max_eval;
      if (cfg.dataset.empty()) throw ConfigError("no dataset given (--dataset or config file)");
      return cmd_train(cfg, tr_out, tr_resume);
    }
    if (ev->parsed()) {
      return cmd_eval(ev_ckpt, ev_dataset, ev_out, ev_mode, ev_split, ev_max, ev_seed);
    }
    if (in->parsed()) return cmd_infer(in_ckpt, in_scene);
    if (gc->parsed()) return cmd_gradcheck(gc_scope, gc_instances, gc_tol, gc_seed, gc_corrupt);
    if (ab->parsed()) {
      RunConfig base = ab_config.empty() ? RunConfig{} : load_run_config(ab_config);
      apply_overrides(base, ab_sets);
      base.epochs = ab_epochs;
      base.seed = ab_seed;
      return cmd_ablate(base, ab_out, ab_suite, ab_difficulty, ab_repeats, ab_train, ab_test);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
