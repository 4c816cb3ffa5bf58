// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#include "wildground/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wildground/errors.hpp"
#include "wildground/ops.hpp"

namespace wg {

FusionMode fusion_mode_from_string(const std::string& s) {
  if (s == "ours") return FusionMode::kOurs;
  if (s == "vision_first") return FusionMode::kVisionFirst;
  if (s == "image_dominant") return FusionMode::kImageDominant;
  if (s == "concat") return FusionMode::kConcat;
  throw ConfigError("unknown fusion mode \"" + s + "\"");
}

TemporalMode temporal_mode_from_string(const std::string& s) {
  if (s == "none") return TemporalMode::kNone;
  if (s == "dve") return TemporalMode::kDve;
  if (s == "in_con") return TemporalMode::kInCon;
  if (s == "fe_con") return TemporalMode::kFeCon;
  throw ConfigError("unknown temporal mode \"" + s + "\"");
}

std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::kOurs: return "ours";
    case FusionMode::kVisionFirst: return "vision_first";
    case FusionMode::kImageDominant: return "image_dominant";
    case FusionMode::kConcat: return "concat";
  }
  throw ConfigError("bad fusion mode value");
}

std::string to_string(TemporalMode m) {
  switch (m) {
    case TemporalMode::kNone: return "none";
    case TemporalMode::kDve: return "dve";
    case TemporalMode::kInCon: return "in_con";
    case TemporalMode::kFeCon: return "fe_con";
  }
  throw ConfigError("bad temporal mode value");
}

void ModelConfig::validate() const {
  if (dim <= 0 || heads <= 0 || dim % heads != 0)
    throw ConfigError("model config: dim must be a positive multiple of heads");
  if (dim % 6 != 0 || dim % 4 != 0)
    throw ConfigError("model config: dim must be divisible by 4 and 6 for positional embeddings");
  if (frames < 1) throw ConfigError("model config: frames must be >= 1");
  if (queries <= 0 || queries > pointnet.s2)
    throw ConfigError("model config: queries must be in [1, seed count]");
  if (dve_layers < 1 || tfi_layers < 1 || decoder_layers < 1)
    throw ConfigError("model config: layer counts must be >= 1");
  if (proj_dim <= 0 || temperature <= 0)
    throw ConfigError("model config: projection dim and temperature must be positive");
  if (dropout < 0 || dropout >= 1) throw ConfigError("model config: dropout must be in [0,1)");
  if (pointnet.mlp2_out != dim)
    throw ConfigError("model config: point encoder output dim must equal the model dim");
}

std::vector<std::int64_t> top_n_by_score(const std::vector<double>& scores, std::int64_t n) {
  if (n < 0 || n > static_cast<std::int64_t>(scores.size()))
    throw ConfigError("top_n_by_score: n out of range");
  std::vector<std::int64_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    const double sa = scores[static_cast<std::size_t>(a)];
    const double sb = scores[static_cast<std::size_t>(b)];
    if (sa != sb) return sa > sb;
    return a < b;
  });
  order.resize(static_cast<std::size_t>(n));
  return order;
}

// ---------------------------------------------------------------------------
// DynamicVisualEncoder
// ---------------------------------------------------------------------------

DynamicVisualEncoder::DynamicVisualEncoder(ParamStore& store, const std::string& prefix,
                                           const ModelConfig& cfg, Rng& rng) {
  for (std::int64_t l = 0; l < cfg.dve_layers; ++l) {
    Layer layer;
    const std::string base = prefix + ".layer" + std::to_string(l);
    layer.spatial = AttentionBlock(store, base + ".spatial", cfg.dim, cfg.heads, cfg.ffn_dim,
                                   cfg.dropout, rng);
    for (int f = 0; f + 1 < cfg.frames; ++f)
      layer.temporal.emplace_back(store, base + ".temporal" + std::to_string(f), cfg.dim,
                                  cfg.heads, cfg.ffn_dim, cfg.dropout, rng);
    layers_.push_back(std::move(layer));
  }
}

Tensor DynamicVisualEncoder::forward(const Tensor& current, const std::vector<Tensor>& previous,
                                     const std::vector<Tensor>& previous_pos,
                                     const Context& ctx) const {
  if (previous.size() != previous_pos.size())
    throw ShapeError("dynamic encoder: previous features/positions misaligned");
  if (layers_.empty()) throw ConfigError("dynamic encoder: not constructed");
  if (previous.size() != layers_.front().temporal.size())
    throw ShapeError("dynamic encoder: expected " +
                     std::to_string(layers_.front().temporal.size()) + " previous frames, got " +
                     std::to_string(previous.size()));
  Tensor x = current;
  for (const auto& layer : layers_) {
    x = layer.spatial.forward(x, x, ctx);
    for (std::size_t f = 0; f < layer.temporal.size(); ++f) {
      Tensor kv = add(previous[f], previous_pos[f]);
      x = layer.temporal[f].forward(x, kv, ctx);
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// TripleModalInteraction
// ---------------------------------------------------------------------------

TripleModalInteraction::TripleModalInteraction(ParamStore& store, const std::string& prefix,
                                               const ModelConfig& cfg, Rng& rng)
    : mode_(cfg.fusion) {
  for (std::int64_t l = 0; l < cfg.tfi_layers; ++l) {
    pl_blocks_.emplace_back(store, prefix + ".pl" + std::to_string(l), cfg.dim, cfg.heads,
                            cfg.ffn_dim, cfg.dropout, rng);
    lv_blocks_.emplace_back(store, prefix + ".lv" + std::to_string(l), cfg.dim, cfg.heads,
                            cfg.ffn_dim, cfg.dropout, rng);
  }
  if (mode_ == FusionMode::kConcat)
    concat_mlp_ = Mlp2(store, prefix + ".concat", 2 * cfg.dim, cfg.dim, cfg.dim, rng);
  else
    img_fuse_ = AttentionBlock(store, prefix + ".img", cfg.dim, cfg.heads, cfg.ffn_dim,
                               cfg.dropout, rng);
}

std::pair<Tensor, Tensor> TripleModalInteraction::forward(const Tensor& f_p, const Tensor& f_i,
                                                          const Tensor& f_l,
                                                          const Context& ctx) const {
  // the "visual side" of the paired layers: points, except when the image is
  // dominant, in which case image tokens interact with language and points
  // only query the result at the end.
  Tensor vis = mode_ == FusionMode::kImageDominant ? f_i : f_p;
  if (mode_ == FusionMode::kVisionFirst) vis = img_fuse_.forward(vis, f_i, ctx);

  Tensor lang = f_l;
  for (std::size_t l = 0; l < pl_blocks_.size(); ++l) {
    Tensor vis_next = pl_blocks_[l].forward(vis, lang, ctx);
    Tensor lang_next = lv_blocks_[l].forward(lang, vis, ctx);
    vis = vis_next;
    lang = lang_next;
  }

  Tensor f_v;
  switch (mode_) {
    case FusionMode::kOurs:
      f_v = img_fuse_.forward(vis, f_i, ctx);
      break;
    case FusionMode::kVisionFirst:
      f_v = vis;  // image was fused before the language interaction
      break;
    case FusionMode::kImageDominant:
      f_v = img_fuse_.forward(f_p, vis, ctx);
      break;
    case FusionMode::kConcat: {
      Tensor pooled = mean_rows(f_i);  // 1×C
      Tensor ones = Tensor::full({vis.rows(), 1}, 1.0);
      Tensor tiled = matmul(ones, pooled);
      f_v = concat_mlp_.forward(concat_cols({vis, tiled}));
      break;
    }
  }
  return {f_v, lang};
}

// ---------------------------------------------------------------------------
// DecoderLayer
// ---------------------------------------------------------------------------

DecoderLayer::DecoderLayer(ParamStore& store, const std::string& prefix, const ModelConfig& cfg,
                           Rng& rng) {
  self_att_ = MultiHeadAttention(store, prefix + ".self", cfg.dim, cfg.heads, rng);
  cross_lang_ = MultiHeadAttention(store, prefix + ".lang", cfg.dim, cfg.heads, rng);
  cross_vis_ = MultiHeadAttention(store, prefix + ".vis", cfg.dim, cfg.heads, rng);
  ln1_ = LayerNorm(store, prefix + ".ln1", cfg.dim);
  ln2_ = LayerNorm(store, prefix + ".ln2", cfg.dim);
  ln3_ = LayerNorm(store, prefix + ".ln3", cfg.dim);
  ln4_ = LayerNorm(store, prefix + ".ln4", cfg.dim);
  ffn_ = FeedForward(store, prefix + ".ffn", cfg.dim, cfg.ffn_dim, cfg.dropout, rng);
}

Tensor DecoderLayer::forward(Tensor q, const Tensor& f_lv, const Tensor& f_v,
                             const Context& ctx) const {
  q = ln1_.forward(add(q, self_att_.forward(q, q, q)));
  q = ln2_.forward(add(q, cross_lang_.forward(q, f_lv, f_lv)));
  q = ln3_.forward(add(q, cross_vis_.forward(q, f_v, f_v)));
  q = ln4_.forward(add(q, ffn_.forward(q, ctx)));
  return q;
}

// ---------------------------------------------------------------------------
// WildreferModel
// ---------------------------------------------------------------------------

WildreferModel::WildreferModel(ParamStore& store, const ModelConfig& cfg, std::int64_t vocab_size,
                               Rng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  EncoderConfig enc;
  enc.dim = cfg.dim;
  enc.heads = cfg.heads;
  enc.ffn_dim = cfg.ffn_dim;
  enc.dropout = cfg.dropout;

  point_enc_ = PointEncoder(store, "pointnet", cfg.pointnet, rng);
  text_enc_ = TextEncoder(store, "text", vocab_size, enc, rng);
  if (cfg.tfi_enabled) {
    image_enc_ = ImageEncoder(store, "image", enc, rng);
    tfi_ = TripleModalInteraction(store, "tfi", cfg_, rng);
  }
  if (cfg.temporal == TemporalMode::kDve) {
    point_dve_ = DynamicVisualEncoder(store, "dve.point", cfg_, rng);
    if (cfg.tfi_enabled) image_dve_ = DynamicVisualEncoder(store, "dve.image", cfg_, rng);
  }
  if (cfg.temporal == TemporalMode::kFeCon && cfg.frames > 1)
    fe_con_mlp_ = Mlp2(store, "fecon", cfg.frames * cfg.dim, cfg.dim, cfg.dim, rng);

  for (std::int64_t l = 0; l < cfg.decoder_layers; ++l)
    decoder_.emplace_back(store, "decoder.layer" + std::to_string(l), cfg_, rng);

  score_mlp_ = Mlp2(store, "heads.score", cfg.dim, 64, 1, rng);
  center_head_ = Mlp2(store, "heads.center", cfg.dim, cfg.dim, 3, rng);
  size_head_ = Mlp2(store, "heads.size", cfg.dim, cfg.dim, 3, rng);
  span_q_ = Linear(store, "heads.span_q", cfg.dim, cfg.proj_dim, rng);
  span_w_ = Linear(store, "heads.span_w", cfg.dim, cfg.proj_dim, rng);
  contrast_q_ = Linear(store, "heads.contrast_q", cfg.dim, cfg.proj_dim, rng);
  contrast_w_ = Linear(store, "heads.contrast_w", cfg.dim, cfg.proj_dim, rng);
}

namespace {
Tensor fourier_of(const std::vector<std::array<double, 3>>& pos, std::int64_t dim) {
  return fourier3d(pos, dim);
}

PointCloud splice_clouds(const std::vector<const PointCloud*>& frames) {
  PointCloud merged;
  for (const PointCloud* pc : frames) {
    merged.xyz.insert(merged.xyz.end(), pc->xyz.begin(), pc->xyz.end());
    merged.intensity.insert(merged.intensity.end(), pc->intensity.begin(), pc->intensity.end());
  }
  merged.frame_time = frames.back()->frame_time;
  return merged;
}

std::vector<std::int64_t> nearest_indices(const std::vector<std::array<double, 3>>& from,
                                          const std::vector<std::array<double, 3>>& to) {
  std::vector<std::int64_t> out(from.size(), 0);
  for (std::size_t i = 0; i < from.size(); ++i) {
    double best = 1e300;
    for (std::size_t j = 0; j < to.size(); ++j) {
      const double dx = from[i][0] - to[j][0];
      const double dy = from[i][1] - to[j][1];
      const double dz = from[i][2] - to[j][2];
      const double d = dx * dx + dy * dy + dz * dz;
      if (d < best) {
        best = d;
        out[i] = static_cast<std::int64_t>(j);
      }
    }
  }
  return out;
}
}  // namespace

Tensor WildreferModel::encode_visual_points(const SceneInput& in,
                                            std::vector<std::array<double, 3>>& seed_pos,
                                            const Context& ctx) const {
  const int k = cfg_.temporal == TemporalMode::kNone ? 1 : cfg_.frames;
  const auto total = static_cast<int>(in.clouds.size());
  std::vector<const PointCloud*> frames;  // chronological, last = current
  for (int f = total - k; f < total; ++f)
    frames.push_back(&in.clouds[static_cast<std::size_t>(f)]);

  switch (cfg_.temporal) {
    case TemporalMode::kNone: {
      SeedSet seeds = point_enc_.forward(*frames.back());
      seed_pos = seeds.positions;
      return seeds.features;
    }
    case TemporalMode::kInCon: {
      SeedSet seeds = point_enc_.forward(splice_clouds(frames));
      seed_pos = seeds.positions;
      return seeds.features;
    }
    case TemporalMode::kFeCon: {
      SeedSet current = point_enc_.forward(*frames.back());
      seed_pos = current.positions;
      if (frames.size() == 1) return current.features;
      std::vector<Tensor> parts = {current.features};
      for (int f = static_cast<int>(frames.size()) - 2; f >= 0; --f) {
        SeedSet prev = point_enc_.forward(*frames[static_cast<std::size_t>(f)]);
        parts.push_back(gather_rows(prev.features, nearest_indices(current.positions,
                                                                   prev.positions)));
      }
      return fe_con_mlp_.forward(concat_cols(parts));
    }
    case TemporalMode::kDve: {
      SeedSet current = point_enc_.forward(*frames.back());
      seed_pos = current.positions;
      std::vector<Tensor> prev_feats, prev_pos;
      for (int f = static_cast<int>(frames.size()) - 2; f >= 0; --f) {
        SeedSet prev = point_enc_.forward(*frames[static_cast<std::size_t>(f)]);
        prev_feats.push_back(prev.features);
        prev_pos.push_back(fourier_of(prev.positions, cfg_.dim));
      }
      return point_dve_.forward(current.features, prev_feats, prev_pos, ctx);
    }
  }
  throw ConfigError("bad temporal mode value");
}

Tensor WildreferModel::encode_visual_images(const SceneInput& in, const Context& ctx) const {
  const auto total = static_cast<int>(in.images.size());
  if (cfg_.temporal != TemporalMode::kDve) {
    return image_enc_.forward(in.images[static_cast<std::size_t>(total - 1)], ctx).tokens;
  }
  const int k = cfg_.frames;
  ImageGridFeatures current =
      image_enc_.forward(in.images[static_cast<std::size_t>(total - 1)], ctx);
  std::vector<Tensor> prev_feats, prev_pos;
  for (int f = total - 2; f >= total - k; --f) {
    ImageGridFeatures prev = image_enc_.forward(in.images[static_cast<std::size_t>(f)], ctx);
    prev_feats.push_back(prev.tokens);
    prev_pos.push_back(sine2d(prev.grid_h, prev.grid_w, cfg_.dim));
  }
  return image_dve_.forward(current.tokens, prev_feats, prev_pos, ctx);
}

Predictions WildreferModel::forward(const SceneInput& in, const Context& ctx) const {
  if (in.clouds.empty() || in.clouds.size() != in.images.size())
    throw ShapeError("scene input: clouds/images must be non-empty and aligned");
  const int needed = cfg_.temporal == TemporalMode::kNone ? 1 : cfg_.frames;
  if (static_cast<int>(in.clouds.size()) < needed)
    throw ShapeError("scene input: model needs " + std::to_string(needed) + " frames, got " +
                     std::to_string(in.clouds.size()));

  std::vector<std::array<double, 3>> seed_pos;
  Tensor f_p = encode_visual_points(in, seed_pos, ctx);
  // Seed tokens carry their coordinates into every later attention stage,
  // mirroring the planar encoding the image tokens receive.
  f_p = add(f_p, fourier_of(seed_pos, cfg_.dim));
  TextFeatures text = text_enc_.forward(in.token_ids, in.spans, ctx);

  Tensor f_v, f_lv;
  if (cfg_.tfi_enabled) {
    Tensor f_i = encode_visual_images(in, ctx);
    std::tie(f_v, f_lv) = tfi_.forward(f_p, f_i, text.tokens, ctx);
  } else {
    f_v = f_p;
    f_lv = text.tokens;
  }

  // non-parametric query selection
  Predictions out;
  out.seed_positions = seed_pos;
  out.queries.scores = sigmoid(score_mlp_.forward(f_v));
  out.queries.selected = top_n_by_score(out.queries.scores.values(), cfg_.queries);
  out.queries.query_feats = gather_rows(f_v, out.queries.selected);
  for (std::int64_t idx : out.queries.selected)
    out.queries.reference_positions.push_back(seed_pos[static_cast<std::size_t>(idx)]);

  Tensor q = out.queries.query_feats;
  for (const auto& layer : decoder_) q = layer.forward(q, f_lv, f_v, ctx);

  const std::int64_t n = cfg_.queries;
  std::vector<double> ref_flat;
  ref_flat.reserve(static_cast<std::size_t>(n * 3));
  for (const auto& p : out.queries.reference_positions) {
    ref_flat.push_back(p[0]);
    ref_flat.push_back(p[1]);
    ref_flat.push_back(p[2]);
  }
  Tensor center = add(center_head_.forward(q), Tensor::from({n, 3}, std::move(ref_flat)));
  Tensor size = exp_op(size_head_.forward(q));
  out.box_params = concat_cols({center, size});
  for (std::int64_t i = 0; i < n; ++i) {
    Box3D b;
    b.x = out.box_params.at(i, 0);
    b.y = out.box_params.at(i, 1);
    b.z = out.box_params.at(i, 2);
    b.l = out.box_params.at(i, 3);
    b.w = out.box_params.at(i, 4);
    b.h = out.box_params.at(i, 5);
    out.boxes.push_back(b);
  }

  out.span_logits = matmul(span_q_.forward(q), transpose(span_w_.forward(f_lv)));
  out.query_proj = l2_normalize_rows(contrast_q_.forward(q));
  out.word_proj = l2_normalize_rows(contrast_w_.forward(f_lv));
  out.spans = text.spans;
  return out;
}

std::pair<std::int64_t, Box3D> select_target(const Predictions& preds) {
  if (preds.spans.empty()) throw ConfigError("select_target: terminal span missing");
  const TokenSpan terminal = preds.spans.back();
  const std::int64_t d = preds.word_proj.cols();
  std::vector<double> mean(static_cast<std::size_t>(d), 0.0);
  for (std::int64_t r = terminal.begin; r < terminal.end; ++r)
    for (std::int64_t c = 0; c < d; ++c)
      mean[static_cast<std::size_t>(c)] += preds.word_proj.at(r, c);
  double norm = 0;
  for (double v : mean) norm += v * v;
  norm = std::sqrt(norm);

  std::int64_t best = 0;
  double best_sim = 1e300;
  for (std::int64_t i = 0; i < preds.query_proj.rows(); ++i) {
    double dot = 0;
    for (std::int64_t c = 0; c < d; ++c)
      dot += preds.query_proj.at(i, c) * mean[static_cast<std::size_t>(c)];
    // query rows are unit; an all-zero terminal mean makes every similarity 0
    const double sim = norm > 0 ? dot / norm : 0.0;
    if (sim < best_sim) {
      best_sim = sim;
      best = i;
    }
  }
  return {best, preds.boxes[static_cast<std::size_t>(best)]};
}

}  // namespace wg
