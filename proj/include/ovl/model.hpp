#pragma once

#include <string>
#include <vector>

#include "ovl/decoder.hpp"
#include "ovl/encoders.hpp"
#include "ovl/losses.hpp"
#include "ovl/nn.hpp"

namespace ovl {

struct ModelConfig {
  TextEncoderConfig text;
  VideoEncoderConfig video;
  DecoderConfig decoder;
  bool freeze_backbone = false;

  // Derives decoder.grid / frame table sizes and checks cross-module
  // consistency. Call after editing fields.
  void finalize();
};

// Parameter groups used by gradient verification and reporting.
enum class ParamGroup { kQueries, kFrameVectors, kDecoder, kHeads, kProjections, kEncoders };

const char* param_group_name(ParamGroup g);
ParamGroup param_group_of(const std::string& param_name);

struct ClipForward {
  FeatureMap fmap;
  SummaryVectors summaries;
  ad::Graph::Id boxes;      // (2+K)*T x 4 grid in (0,1)
  ad::Graph::Id names;      // K x embed_dim, projected
  ad::Graph::Id video_emb;  // 1 x embed_dim, projected, unnormalized
};

struct Model {
  ModelConfig cfg;
  nn::ParamStore params;

  void init(uint64_t seed);

  bool is_encoder_param(const std::string& name) const;
  bool is_trainable(const std::string& name) const;
  nn::Bound bind(ad::Graph& g, bool training) const;

  BoxGridLayout box_layout() const {
    return {cfg.decoder.hand_queries(), cfg.decoder.object_queries, cfg.decoder.frames};
  }

  // Full video path: encode, decode, all heads.
  ClipForward forward_clip(const nn::Bound& b, const VideoFrames& frames) const;

  // Video embedding only (hard negatives need no box/name heads).
  ad::Graph::Id clip_embedding(const nn::Bound& b, const VideoFrames& frames) const;

  // Projected sentence embedding for a token sequence.
  ad::Graph::Id text_embedding(const nn::Bound& b, const std::vector<int>& ids) const;

  // Projected embeddings of a list of phrases (rows follow input order).
  ad::Graph::Id phrase_embeddings(const nn::Bound& b, const Vocabulary& vocab,
                                  const std::vector<std::string>& phrases) const;

  // ---- value-level helpers (no-grad forwards) ----
  std::vector<double> embed_clip(const VideoFrames& frames) const;
  std::vector<double> embed_text(const Vocabulary& vocab, const std::string& text) const;
};

}  // namespace ovl
