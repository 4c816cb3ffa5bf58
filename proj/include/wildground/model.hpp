// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wildground/encoders.hpp"
#include "wildground/geometry.hpp"
#include "wildground/nn.hpp"
#include "wildground/pointnet.hpp"

namespace wg {

// How image features are fused with point/language features.
enum class FusionMode {
  kOurs,           // language interaction first, then image cross-attention
  kVisionFirst,    // image cross-attention before language interaction
  kImageDominant,  // language interacts with image tokens; points query last
  kConcat,         // mean-pooled image concatenated + MLP (no attention fusion)
};

// How information from previous frames enters the visual branches.
enum class TemporalMode {
  kNone,   // current frame only, no dynamic encoder blocks
  kDve,    // spatial self-attention + cross-attention to embedded past frames
  kInCon,  // splice the point clouds of all frames into one input cloud
  kFeCon,  // encode frames separately, concatenate aligned features + MLP
};

FusionMode fusion_mode_from_string(const std::string& s);
TemporalMode temporal_mode_from_string(const std::string& s);
std::string to_string(FusionMode m);
std::string to_string(TemporalMode m);

struct ModelConfig {
  std::int64_t dim = 288;
  std::int64_t heads = 8;
  std::int64_t ffn_dim = 256;
  double dropout = 0.1;
  std::int64_t dve_layers = 1;
  std::int64_t tfi_layers = 3;
  std::int64_t decoder_layers = 6;
  int frames = 2;              // K, including the current frame
  std::int64_t queries = 16;   // N
  std::int64_t proj_dim = 64;  // shared contrastive/span projection width
  double temperature = 0.07;
  TemporalMode temporal = TemporalMode::kDve;
  bool tfi_enabled = true;
  FusionMode fusion = FusionMode::kOurs;
  PointEncoderConfig pointnet;

  void validate() const;  // throws ConfigError on bad combinations
};

// One grounding instance as the model consumes it: K synchronized frames in
// chronological order (the last is the current frame) plus the tokenized
// utterance with its spans (terminal span last).
struct SceneInput {
  std::vector<PointCloud> clouds;
  std::vector<Image> images;
  std::vector<std::int64_t> token_ids;
  std::vector<TokenSpan> spans;
};

struct QueryCandidates {
  Tensor scores;                                           // S×1, sigmoid confidences
  std::vector<std::int64_t> selected;                      // N seed indices
  Tensor query_feats;                                      // N×C
  std::vector<std::array<double, 3>> reference_positions;  // N×3
};

struct Predictions {
  QueryCandidates queries;
  std::vector<std::array<double, 3>> seed_positions;  // all S seeds, for the L_s mask
  Tensor box_params;                                  // N×6 (x,y,z,l,w,h), differentiable
  std::vector<Box3D> boxes;                           // N, theta fixed to 0
  Tensor span_logits;                                 // N×M
  Tensor query_proj;                                  // N×D, unit rows
  Tensor word_proj;                                   // M×D, unit rows
  std::vector<TokenSpan> spans;                       // from the text features
};

// Top-n indices by descending score, ties broken by lower index.
std::vector<std::int64_t> top_n_by_score(const std::vector<double>& scores, std::int64_t n);

// Spatial self-attention over the current frame followed by one
// cross-attention per previous frame (most recent first), the previous
// features carrying their positional embedding on the key/value side.
class DynamicVisualEncoder {
 public:
  DynamicVisualEncoder() = default;
  DynamicVisualEncoder(ParamStore& store, const std::string& prefix, const ModelConfig& cfg,
                       Rng& rng);
  // previous/previous_pos are aligned, in reverse time order (t-1 first).
  Tensor forward(const Tensor& current, const std::vector<Tensor>& previous,
                 const std::vector<Tensor>& previous_pos, const Context& ctx) const;

 private:
  struct Layer {
    AttentionBlock spatial;
    std::vector<AttentionBlock> temporal;  // frames-1 blocks
  };
  std::vector<Layer> layers_;
};

// Paired point/language cross-attention plus image fusion, with selectable
// fusion orderings. Produces the comprehensive visual feature F_V and the
// visual-enhanced text feature F_Lv.
class TripleModalInteraction {
 public:
  TripleModalInteraction() = default;
  TripleModalInteraction(ParamStore& store, const std::string& prefix, const ModelConfig& cfg,
                         Rng& rng);
  std::pair<Tensor, Tensor> forward(const Tensor& f_p, const Tensor& f_i, const Tensor& f_l,
                                    const Context& ctx) const;

 private:
  FusionMode mode_ = FusionMode::kOurs;
  std::vector<AttentionBlock> pl_blocks_;  // visual side queries language
  std::vector<AttentionBlock> lv_blocks_;  // language queries the visual side
  AttentionBlock img_fuse_;                // image cross-attention (non-concat modes)
  Mlp2 concat_mlp_;                        // concat fusion
};

// One decoder layer: query self-attention, cross-attention to language, then
// to vision, then a feed-forward — each sublayer residual + LayerNorm.
class DecoderLayer {
 public:
  DecoderLayer() = default;
  DecoderLayer(ParamStore& store, const std::string& prefix, const ModelConfig& cfg, Rng& rng);
  Tensor forward(Tensor q, const Tensor& f_lv, const Tensor& f_v, const Context& ctx) const;

 private:
  MultiHeadAttention self_att_, cross_lang_, cross_vis_;
  LayerNorm ln1_, ln2_, ln3_, ln4_;
  FeedForward ffn_;
};

class WildreferModel {
 public:
  WildreferModel(ParamStore& store, const ModelConfig& cfg, std::int64_t vocab_size, Rng& rng);
  Predictions forward(const SceneInput& in, const Context& ctx) const;
  const ModelConfig& config() const { return cfg_; }

 private:
  Tensor encode_visual_points(const SceneInput& in, std::vector<std::array<double, 3>>& seed_pos,
                              const Context& ctx) const;
  Tensor encode_visual_images(const SceneInput& in, const Context& ctx) const;

  ModelConfig cfg_;
  PointEncoder point_enc_;
  ImageEncoder image_enc_;
  TextEncoder text_enc_;
  DynamicVisualEncoder point_dve_, image_dve_;
  Mlp2 fe_con_mlp_;
  TripleModalInteraction tfi_;
  std::vector<DecoderLayer> decoder_;
  Mlp2 score_mlp_;
  Mlp2 center_head_, size_head_;
  Linear span_q_, span_w_;
  Linear contrast_q_, contrast_w_;
};

// Query whose projected feature is least cosine-similar to the mean projected
// terminal ("not-mentioned") token; ties by lower query index.
std::pair<std::int64_t, Box3D> select_target(const Predictions& preds);

}  // namespace wg
