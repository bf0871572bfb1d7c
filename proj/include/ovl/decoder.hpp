#pragma once

#include "ovl/encoders.hpp"
#include "ovl/geometry.hpp"
#include "ovl/nn.hpp"

namespace ovl {

// Query-based head over the video feature map. Query order in every output
// is [hand 0, hand 1, object 0..K-1, video].
struct DecoderConfig {
  int dim = 64;        // must match the video encoder dim
  int layers = 2;      // paper-scale default is 6
  int heads = 4;       // paper-scale default is 8
  int object_queries = 4;  // K; paper-scale default is 12
  int frames = 4;      // learned frame-index vectors x_i
  int text_dim = 64;   // semantic head output dim
  int embed_dim = 256; // shared similarity space
  int grid = 16;       // hp * wp of the feature map (for key positions)

  int hand_queries() const { return 2; }
  int num_queries() const { return hand_queries() + object_queries + 1; }
};

struct SummaryVectors {
  ad::Graph::Id rows;   // (2 + K) x dim: hand then object summaries
  ad::Graph::Id video;  // 1 x dim: raw video-query output
};

void decoder_register(nn::ParamStore& p, const DecoderConfig& cfg, Rng& rng);

// Runs the stacked self+cross attention blocks over the query set.
SummaryVectors decode(const nn::Bound& b, const DecoderConfig& cfg,
                      const FeatureMap& fmap);

// Per-query per-frame boxes through the box head: row (j*T + i) of the
// result holds box coordinates (cx, cy, w, h) in (0,1) for query j at
// frame i. The video query produces no box.
ad::Graph::Id predict_boxes(const nn::Bound& b, const DecoderConfig& cfg,
                            const SummaryVectors& s);

// Semantic head over object summaries only: K x text_dim.
ad::Graph::Id predict_names(const nn::Bound& b, const DecoderConfig& cfg,
                            const SummaryVectors& s);

// Projections into the similarity space (unnormalized; cosine normalization
// happens at similarity time).
ad::Graph::Id project_video(const nn::Bound& b, ad::Graph::Id video_raw);
ad::Graph::Id project_text(const nn::Bound& b, ad::Graph::Id text_raw);
ad::Graph::Id project_names(const nn::Bound& b, ad::Graph::Id names_raw);

// Readout helper: box grid values -> clamped Box structs [query][frame].
std::vector<std::vector<Box>> boxes_from_grid(const Tensor& grid, int n_queries,
                                              int frames);

}  // namespace ovl
