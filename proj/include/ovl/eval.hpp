#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ovl/data.hpp"
#include "ovl/model.hpp"

namespace ovl {

using Embedding = std::vector<double>;

double cosine(const Embedding& a, const Embedding& b);

// ---------------------------------------------------------------- MCQ

enum class McqSplit { kInter, kIntra };

struct McqQuestion {
  Embedding query;
  std::vector<Embedding> candidates;  // 5 clips
  int answer = 0;
  McqSplit split = McqSplit::kInter;
};

struct McqAccuracy {
  double inter = 0, intra = 0;
  int n_inter = 0, n_intra = 0;
};

// argmax cosine(query, candidate); ties take the lowest index.
McqAccuracy mcq_accuracy(const std::vector<McqQuestion>& questions);

// ---------------------------------------------------------------- retrieval

// Binary relevance mAP over rows (queries); rows without positives are
// excluded and counted.
double retrieval_map(const Tensor& sim, const Tensor& rel, int* skipped = nullptr);

// Graded-relevance nDCG; all-zero rows are excluded and counted.
double retrieval_ndcg(const Tensor& sim, const Tensor& rel, int* skipped = nullptr);

// rel(i,j) = mean of noun-set and verb-set Jaccard similarities; two empty
// sets count as identical (1).
Tensor caption_relevance(const std::vector<std::set<int>>& nouns_a,
                         const std::vector<std::set<int>>& verbs_a,
                         const std::vector<std::set<int>>& nouns_b,
                         const std::vector<std::set<int>>& verbs_b);

struct RetrievalSummary {
  double map_v2t = 0, map_t2v = 0, map_avg = 0;
  double ndcg_v2t = 0, ndcg_t2v = 0, ndcg_avg = 0;
  int skipped_map = 0, skipped_ndcg = 0;
};

// ---------------------------------------------------------------- classify

struct ClassifyResult {
  double top1 = 0;
  double mean_class = 0;
  int excluded_classes = 0;
};

// logits = cosine(clip, class), max-pooled over each video's clips.
ClassifyResult classify(const std::vector<std::vector<Embedding>>& videos,
                        const std::vector<Embedding>& class_embs,
                        const std::vector<int>& labels);

// ---------------------------------------------------------------- grounding

struct GroundedFrame {
  Box left_hand, right_hand;
  std::vector<Box> noun_boxes;     // one per input noun phrase
  std::vector<int> noun_query;     // object query chosen per noun
  std::vector<double> noun_score;  // cosine of noun vs matched name
};

struct GroundClipResult {
  std::vector<GroundedFrame> frames;  // T entries
};

// RGB-only readout: hand boxes from the two hand queries, nouns grounded to
// object queries by Hungarian noun alignment. Requires |nouns| <= K.
GroundClipResult ground_clip(const Model& model, const Vocabulary& vocab,
                             const VideoFrames& frames,
                             const std::vector<std::string>& noun_phrases);

// Single-image convenience: the frame is repeated T times.
GroundClipResult ground_single_image(const Model& model, const Vocabulary& vocab,
                                     const VideoFrames& one_frame,
                                     const std::vector<std::string>& noun_phrases);

struct GroundingInstance {
  // ground truth (clean stream)
  std::vector<HandDetection> gt_hands;
  std::vector<ObjectDetection> gt_objects;  // in-contact only
  // model readout, aligned with gt_objects
  std::optional<Box> pred_left_hand, pred_right_hand;
  std::vector<Box> pred_noun_boxes;
  // raw detector boxes for the baseline modes
  std::vector<HandDetection> det_hands;
  std::vector<Box> det_objects;
};

enum class AssignMode { kPredicted, kRandom, kGtMatching };

AssignMode assign_mode_from_string(const std::string& s);

// Fraction of hand+object targets whose assigned box center lies inside the
// ground truth. kRandom draws the object assignment from rng.
double localization_accuracy(const std::vector<GroundingInstance>& instances,
                             AssignMode mode, Rng* rng = nullptr);

struct RandomBaseline {
  double mean = 0, stddev = 0;
  int draws = 0;
};

RandomBaseline localization_accuracy_random(const std::vector<GroundingInstance>& instances,
                                            int n_draws, uint64_t seed);

// Builds per-frame instances from the clean detection stream; fills model
// predictions when run_model is set and detector boxes from the dataset's
// pseudo stream.
std::vector<GroundingInstance> build_grounding_instances(
    const Model& model, const Vocabulary& vocab, const Dataset& ds,
    const std::map<std::string, std::vector<FrameDetections>>& clean, bool run_model,
    int max_clips = 0);

// Mean pairwise IoU of the grounded in-contact box across frames vs the same
// statistic for identity-free pseudo-labels (Hungarian-paired per frame pair).
struct TemporalConsistency {
  double model_mean_iou = 0;
  double pseudo_mean_iou = 0;
  int clips = 0;
};

TemporalConsistency temporal_consistency(const Model& model, const Vocabulary& vocab,
                                         const Dataset& ds,
                                         const std::map<std::string, std::vector<FrameDetections>>& clean,
                                         int max_clips = 0);

// ---------------------------------------------------------------- drivers

struct EvalContext {
  const Model* model = nullptr;
  const Dataset* ds = nullptr;
  const Vocabulary* vocab = nullptr;
};

std::vector<Embedding> embed_all_clips(const EvalContext& ctx, int max_clips = 0);
std::vector<Embedding> embed_all_narrations(const EvalContext& ctx, int max_clips = 0);

std::vector<McqQuestion> build_mcq_questions(const EvalContext& ctx,
                                             const std::vector<Embedding>& clip_embs,
                                             const std::vector<Embedding>& narr_embs,
                                             int per_split, Rng& rng);

RetrievalSummary retrieval_eval(const EvalContext& ctx,
                                const std::vector<Embedding>& clip_embs,
                                const std::vector<Embedding>& narr_embs);

ClassifyResult classify_eval(const EvalContext& ctx, int clips_per_video);

// ---------------------------------------------------------------- features

struct FeatureRecord {
  std::string clip_id;
  double t_start_s = 0, t_end_s = 0;
  Embedding feature;
};

void extract_features(const EvalContext& ctx, const std::string& path, int max_clips = 0);
std::vector<FeatureRecord> read_feature_file(const std::string& path);

}  // namespace ovl
