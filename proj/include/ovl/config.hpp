#pragma once

#include <json.hpp>

#include <string>

#include "ovl/data.hpp"
#include "ovl/model.hpp"
#include "ovl/training.hpp"

namespace ovl {

// Strict (de)serialization: unknown keys are rejected, absent keys keep the
// struct defaults. Round-trips are exact.
nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json gen_config_to_json(const GenConfig& c);
GenConfig gen_config_from_json(const nlohmann::json& j);

struct EvalOptions {
  int mcq_questions = 500;
  int random_seeds = 100;       // draws for the random grounding baseline
  std::string grounding_mode = "predicted";  // predicted | random | gt_matching
  int classify_clips_per_video = 10;
  uint64_t seed = 123;
  int max_clips = 0;            // 0 = use all clips
};

nlohmann::json eval_options_to_json(const EvalOptions& c);
EvalOptions eval_options_from_json(const nlohmann::json& j);

struct RunConfig {
  std::string dataset_dir;
  std::string checkpoint;
  std::string out_dir = "out";
  ModelConfig model;
  TrainConfig train;
  GenConfig gen;
  EvalOptions eval;
};

nlohmann::json run_config_to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
void write_resolved_config(const RunConfig& c, const std::string& path);

// Paper-regime presets, recorded for reference; the desk-scale defaults live
// in the struct initializers.
ModelConfig paper_model_config();
TrainConfig paper_train_config();

}  // namespace ovl
