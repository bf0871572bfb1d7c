#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ovl/data.hpp"
#include "ovl/losses.hpp"
#include "ovl/model.hpp"

namespace ovl {

struct TrainConfig {
  int batch_size = 16;      // paper regime: 128
  double lr = 3e-4;         // paper regime: 3e-5
  int epochs = 5;           // paper regime: 5
  double tau = 0.05;
  double lambda_word = 0.5;
  bool use_hard_negatives = true;
  bool freeze_backbone = false;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  bool warmup = false;
  int warmup_steps = 100;
  uint64_t seed = 7;
  std::string precision = "high";  // "standard" | "high": report thresholds only

  LossConfig loss_config() const { return {tau, lambda_word, use_hard_negatives}; }
  void validate() const;
};

// Which loss terms participate in the total; used by the per-loss gradient
// checks and the contrastive-only ablation.
struct LossToggle {
  bool ego = true;
  bool box = true;
  bool word = true;
};

struct BatchLoss {
  LossParts parts;
  ad::Graph::Id total;
  int matched_pairs = 0;
  int dropped_gt = 0;
};

// Builds the full forward graph of one batch: clip and narration embeddings
// for B (and hard negatives), EgoNCE both directions, Hungarian-matched box
// loss over B, dictionary word loss over B.
BatchLoss build_batch_loss(ad::Graph& g, const nn::Bound& b, const Model& model,
                           const Vocabulary& vocab, const Dataset& ds,
                           const Batch& batch, const LossConfig& cfg,
                           const LossToggle& toggle = {});

struct StepReport {
  double total = 0, v2t = 0, t2v = 0, box = 0, word = 0;
  double grad_norm = 0;
  int matched_pairs = 0, dropped_gt = 0;
  double wall_ms = 0;
};

struct AdamWState {
  std::map<std::string, Tensor> m, v;
  int64_t step = 0;
};

// One decoupled-weight-decay adaptive-moment update over the trainable
// parameters; bias and normalization tensors are excluded from decay.
void adamw_update(Model& model, const std::map<std::string, Tensor>& grads,
                  AdamWState& state, const TrainConfig& cfg);

StepReport train_step(Model& model, const Vocabulary& vocab, const Dataset& ds,
                      const Batch& batch, AdamWState& opt, const TrainConfig& cfg,
                      const LossToggle& toggle = {});

// ---------------------------------------------------------------- checkpoint

struct Checkpoint {
  uint32_t version = 1;
  std::string config_json;  // model + train config snapshot
  int64_t step = 0;
  std::string data_rng_state;
  nn::ParamStore params;
  std::map<std::string, Tensor> adam_m, adam_v;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds a model from a checkpoint's config snapshot and parameters.
// vocab_size must match the snapshot.
Model model_from_checkpoint(const Checkpoint& ck, int vocab_size);

// ---------------------------------------------------------------- training

struct TrainResult {
  Checkpoint final_checkpoint;
  std::vector<StepReport> log;
  int steps_run = 0;
};

// Epoch loop over sample_batch; writes metrics.jsonl and checkpoint.ckpt
// under out_dir (when non-empty). Resumes from `resume` when given; the
// saved configuration must match or loading fails.
TrainResult train(Model& model, const Vocabulary& vocab, const Dataset& ds,
                  const TrainConfig& cfg, const std::string& out_dir,
                  const std::optional<std::string>& resume = std::nullopt,
                  const LossToggle& toggle = {});

// Serialization of the config snapshot stored in checkpoints.
std::string train_snapshot_json(const Model& model, const TrainConfig& cfg);

// ---------------------------------------------------------------- grad check

struct GroupGradReport {
  std::string group;
  int checked = 0;
  double max_rel_err = 0;
  std::string worst_param;
  int worst_index = 0;
  double analytic = 0;
  double numeric = 0;
};

struct GradCheckReport {
  std::vector<GroupGradReport> groups;
  double max_rel_err = 0;
};

// Central finite differences (step 1e-4) on >= min_per_group sampled scalars
// per parameter group against the analytic gradients of the toggled total.
GradCheckReport gradient_check(Model& model, const Vocabulary& vocab, const Dataset& ds,
                               const Batch& batch, const TrainConfig& cfg,
                               const LossToggle& toggle = {}, int min_per_group = 200,
                               double step = 1e-4);

// Comparison core, exposed so detector sensitivity can be tested with a
// corrupted gradient map.
GradCheckReport compare_gradients_fd(Model& model, const Vocabulary& vocab,
                                     const Dataset& ds, const Batch& batch,
                                     const LossConfig& cfg, const LossToggle& toggle,
                                     const std::map<std::string, Tensor>& analytic,
                                     int min_per_group, double step, Rng& rng);

}  // namespace ovl
