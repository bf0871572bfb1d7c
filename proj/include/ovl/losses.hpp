#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ovl/assignment.hpp"
#include "ovl/batch.hpp"
#include "ovl/geometry.hpp"
#include "ovl/graph.hpp"

namespace ovl {

struct LossConfig {
  double tau = 0.05;
  double lambda_word = 0.5;
  bool use_hard_negatives = true;

  void validate() const {
    if (!(tau > 0)) throw std::invalid_argument("LossConfig: tau must be positive");
    if (lambda_word < 0) throw std::invalid_argument("LossConfig: lambda_word < 0");
  }
};

// Row layout of a predicted box grid: row (j * frames + i) is query j at
// frame i, hand queries first.
struct BoxGridLayout {
  int hand_queries = 2;
  int object_queries = 4;
  int frames = 4;
};

enum class HandSide { kLeft, kRight, kUnknown };

struct HandDetection {
  Box box;
  HandSide side = HandSide::kUnknown;
  double score = 1.0;
};

struct ObjectDetection {
  Box box;
  double score = 1.0;
  // Filled only in the clean evaluation stream; empty in pseudo-labels.
  std::string noun;
  bool in_contact = false;
};

// Sparse per-frame supervision. frame_idx indexes the sampled frame slots
// [0, T) by the time it reaches a loss.
struct FrameDetections {
  int frame_idx = 0;
  std::vector<HandDetection> hands;
  std::vector<ObjectDetection> objects;
};

// ---------------------------------------------------------------- EgoNCE

// One direction of Eq.-style contrastive matching: anchors against targets
// (and optional hard-negative targets entering the denominator only).
// Returned node is the scalar loss averaged over anchors.
ad::Graph::Id egonce_direction(ad::Graph& g, ad::Graph::Id anchors,
                               ad::Graph::Id targets,
                               std::optional<ad::Graph::Id> hard_targets,
                               const BatchStructure& s, const LossConfig& cfg);

struct EgoNceLoss {
  ad::Graph::Id v2t;
  ad::Graph::Id t2v;
};

EgoNceLoss egonce(ad::Graph& g, ad::Graph::Id v, ad::Graph::Id t,
                  std::optional<ad::Graph::Id> v_hard,
                  std::optional<ad::Graph::Id> t_hard, const BatchStructure& s,
                  const LossConfig& cfg);

// Value-level convenience over constant embeddings (tests, tools).
double egonce_value(const Tensor& v, const Tensor& t, const Tensor* v_hard,
                    const Tensor* t_hard, const BatchStructure& s,
                    const LossConfig& cfg, double* v2t_out = nullptr,
                    double* t2v_out = nullptr);

// ---------------------------------------------------------------- box loss

// Matched (prediction row, ground-truth box) pairs for one clip, produced by
// per-frame Hungarian matching: hands against the 2 hand predictions and
// objects against the K object predictions, independently.
struct MatchedBoxes {
  std::vector<int> pred_rows;  // rows into the clip's box grid
  std::vector<Box> gt;
  int dropped_gt = 0;  // surplus ground truth beyond query capacity
};

MatchedBoxes match_boxes(const Tensor& grid_values, const BoxGridLayout& layout,
                         const std::vector<FrameDetections>& frames);

// Sum of box_pair_loss over matched pairs as a graph node (1x1), not yet
// normalized. pred_rows index into `grid`.
ad::Graph::Id box_pair_loss_sum(ad::Graph& g, ad::Graph::Id grid,
                                const std::vector<int>& pred_rows,
                                const std::vector<Box>& gt);

// Per-clip box loss: matched-pair sum normalized by pair count; constant 0
// when nothing is annotated.
struct BoxLoss {
  ad::Graph::Id loss;
  int matched_pairs = 0;
  int dropped_gt = 0;
};

BoxLoss box_loss(ad::Graph& g, ad::Graph::Id grid, const BoxGridLayout& layout,
                 const std::vector<FrameDetections>& frames);

double box_loss_value(const Tensor& grid, const BoxGridLayout& layout,
                      const std::vector<FrameDetections>& frames);

// ---------------------------------------------------------------- word loss

// names: K x E predicted name embeddings (projected); dict: D x E embeddings
// of the taxonomy dictionary; noun_dict_idx: dictionary row of each caption
// noun, already truncated to at most K entries in narration order.
ad::Graph::Id word_loss(ad::Graph& g, ad::Graph::Id names, ad::Graph::Id dict,
                        const std::vector<int>& noun_dict_idx,
                        const LossConfig& cfg);

double word_loss_value(const Tensor& names, const Tensor& dict,
                       const std::vector<int>& noun_dict_idx, const LossConfig& cfg);

// ---------------------------------------------------------------- total

struct LossParts {
  ad::Graph::Id v2t, t2v, box, word;
};

// L = v2t + t2v + box + lambda_word * word
ad::Graph::Id total_loss(ad::Graph& g, const LossParts& parts, const LossConfig& cfg);

}  // namespace ovl
