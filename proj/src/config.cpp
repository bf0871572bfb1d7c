#include "ovl/config.hpp"

#include <fstream>
#include <set>

namespace ovl {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument(where + ": unknown key '" + it.key() + "'");
}

template <typename T>
void get_if(const json& j, const char* key, T* out) {
  if (j.contains(key)) *out = j.at(key).get<T>();
}

}  // namespace

json model_config_to_json(const ModelConfig& c) {
  return {
      {"text",
       {{"dim", c.text.dim},
        {"layers", c.text.layers},
        {"heads", c.text.heads},
        {"ffn_dim", c.text.ffn_dim},
        {"max_len", c.text.max_len}}},
      {"video",
       {{"dim", c.video.dim},
        {"layers", c.video.layers},
        {"heads", c.video.heads},
        {"ffn_dim", c.video.ffn_dim},
        {"patch", c.video.patch},
        {"frame_h", c.video.frame_h},
        {"frame_w", c.video.frame_w},
        {"frames", c.video.frames}}},
      {"decoder",
       {{"layers", c.decoder.layers},
        {"heads", c.decoder.heads},
        {"object_queries", c.decoder.object_queries},
        {"embed_dim", c.decoder.embed_dim}}},
      {"freeze_backbone", c.freeze_backbone}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  reject_unknown_keys(j, {"text", "video", "decoder", "freeze_backbone"}, "model");
  if (j.contains("text")) {
    const json& t = j.at("text");
    reject_unknown_keys(t, {"dim", "layers", "heads", "ffn_dim", "max_len"}, "model.text");
    get_if(t, "dim", &c.text.dim);
    get_if(t, "layers", &c.text.layers);
    get_if(t, "heads", &c.text.heads);
    get_if(t, "ffn_dim", &c.text.ffn_dim);
    get_if(t, "max_len", &c.text.max_len);
  }
  if (j.contains("video")) {
    const json& v = j.at("video");
    reject_unknown_keys(
        v, {"dim", "layers", "heads", "ffn_dim", "patch", "frame_h", "frame_w", "frames"},
        "model.video");
    get_if(v, "dim", &c.video.dim);
    get_if(v, "layers", &c.video.layers);
    get_if(v, "heads", &c.video.heads);
    get_if(v, "ffn_dim", &c.video.ffn_dim);
    get_if(v, "patch", &c.video.patch);
    get_if(v, "frame_h", &c.video.frame_h);
    get_if(v, "frame_w", &c.video.frame_w);
    get_if(v, "frames", &c.video.frames);
  }
  if (j.contains("decoder")) {
    const json& d = j.at("decoder");
    reject_unknown_keys(d, {"layers", "heads", "object_queries", "embed_dim"},
                        "model.decoder");
    get_if(d, "layers", &c.decoder.layers);
    get_if(d, "heads", &c.decoder.heads);
    get_if(d, "object_queries", &c.decoder.object_queries);
    get_if(d, "embed_dim", &c.decoder.embed_dim);
  }
  get_if(j, "freeze_backbone", &c.freeze_backbone);
  // keep the derived fields consistent with the encoders
  c.decoder.dim = c.video.dim;
  c.decoder.text_dim = c.text.dim;
  c.decoder.frames = c.video.frames;
  return c;
}

json train_config_to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"lr", c.lr},
          {"epochs", c.epochs},
          {"tau", c.tau},
          {"lambda_word", c.lambda_word},
          {"use_hard_negatives", c.use_hard_negatives},
          {"freeze_backbone", c.freeze_backbone},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"weight_decay", c.weight_decay},
          {"warmup", c.warmup},
          {"warmup_steps", c.warmup_steps},
          {"seed", c.seed},
          {"precision", c.precision}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  reject_unknown_keys(j,
                      {"batch_size", "lr", "epochs", "tau", "lambda_word",
                       "use_hard_negatives", "freeze_backbone", "beta1", "beta2",
                       "adam_eps", "weight_decay", "warmup", "warmup_steps", "seed",
                       "precision"},
                      "train");
  get_if(j, "batch_size", &c.batch_size);
  get_if(j, "lr", &c.lr);
  get_if(j, "epochs", &c.epochs);
  get_if(j, "tau", &c.tau);
  get_if(j, "lambda_word", &c.lambda_word);
  get_if(j, "use_hard_negatives", &c.use_hard_negatives);
  get_if(j, "freeze_backbone", &c.freeze_backbone);
  get_if(j, "beta1", &c.beta1);
  get_if(j, "beta2", &c.beta2);
  get_if(j, "adam_eps", &c.adam_eps);
  get_if(j, "weight_decay", &c.weight_decay);
  get_if(j, "warmup", &c.warmup);
  get_if(j, "warmup_steps", &c.warmup_steps);
  get_if(j, "seed", &c.seed);
  get_if(j, "precision", &c.precision);
  return c;
}

json gen_config_to_json(const GenConfig& c) {
  return {{"clips", c.clips},
          {"clips_per_video", c.clips_per_video},
          {"frames_per_clip", c.frames_per_clip},
          {"sampled_frames", c.sampled_frames},
          {"frame_size", c.frame_size},
          {"object_vocab_size", c.object_vocab_size},
          {"hand_drop", c.hand_drop},
          {"object_drop", c.object_drop},
          {"jitter_sigma", c.jitter_sigma},
          {"p_distractor_mention", c.p_distractor_mention},
          {"p_synonym", c.p_synonym},
          {"p_hand_suffix", c.p_hand_suffix},
          {"static_scenes", c.static_scenes},
          {"seed", c.seed}};
}

GenConfig gen_config_from_json(const json& j) {
  GenConfig c;
  reject_unknown_keys(j,
                      {"clips", "clips_per_video", "frames_per_clip", "sampled_frames",
                       "frame_size", "object_vocab_size", "hand_drop", "object_drop",
                       "jitter_sigma", "p_distractor_mention", "p_synonym",
                       "p_hand_suffix", "static_scenes", "seed"},
                      "gen");
  get_if(j, "clips", &c.clips);
  get_if(j, "clips_per_video", &c.clips_per_video);
  get_if(j, "frames_per_clip", &c.frames_per_clip);
  get_if(j, "sampled_frames", &c.sampled_frames);
  get_if(j, "frame_size", &c.frame_size);
  get_if(j, "object_vocab_size", &c.object_vocab_size);
  get_if(j, "hand_drop", &c.hand_drop);
  get_if(j, "object_drop", &c.object_drop);
  get_if(j, "jitter_sigma", &c.jitter_sigma);
  get_if(j, "p_distractor_mention", &c.p_distractor_mention);
  get_if(j, "p_synonym", &c.p_synonym);
  get_if(j, "p_hand_suffix", &c.p_hand_suffix);
  get_if(j, "static_scenes", &c.static_scenes);
  get_if(j, "seed", &c.seed);
  return c;
}

json eval_options_to_json(const EvalOptions& c) {
  return {{"mcq_questions", c.mcq_questions},
          {"random_seeds", c.random_seeds},
          {"grounding_mode", c.grounding_mode},
          {"classify_clips_per_video", c.classify_clips_per_video},
          {"seed", c.seed},
          {"max_clips", c.max_clips}};
}

EvalOptions eval_options_from_json(const json& j) {
  EvalOptions c;
  reject_unknown_keys(j,
                      {"mcq_questions", "random_seeds", "grounding_mode",
                       "classify_clips_per_video", "seed", "max_clips"},
                      "eval");
  get_if(j, "mcq_questions", &c.mcq_questions);
  get_if(j, "random_seeds", &c.random_seeds);
  get_if(j, "grounding_mode", &c.grounding_mode);
  get_if(j, "classify_clips_per_video", &c.classify_clips_per_video);
  get_if(j, "seed", &c.seed);
  get_if(j, "max_clips", &c.max_clips);
  return c;
}

json run_config_to_json(const RunConfig& c) {
  return {{"dataset_dir", c.dataset_dir},
          {"checkpoint", c.checkpoint},
          {"out_dir", c.out_dir},
          {"model", model_config_to_json(c.model)},
          {"train", train_config_to_json(c.train)},
          {"gen", gen_config_to_json(c.gen)},
          {"eval", eval_options_to_json(c.eval)}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  reject_unknown_keys(
      j, {"dataset_dir", "checkpoint", "out_dir", "model", "train", "gen", "eval"},
      "config");
  get_if(j, "dataset_dir", &c.dataset_dir);
  get_if(j, "checkpoint", &c.checkpoint);
  get_if(j, "out_dir", &c.out_dir);
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  if (j.contains("gen")) c.gen = gen_config_from_json(j.at("gen"));
  if (j.contains("eval")) c.eval = eval_options_from_json(j.at("eval"));
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j;
  in >> j;
  return run_config_from_json(j);
}

void write_resolved_config(const RunConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write resolved config " + path);
  out << run_config_to_json(c).dump(2) << "\n";
}

ModelConfig paper_model_config() {
  ModelConfig c;
  c.text = {0, 768, 12, 8, 3072, 77};
  c.video = {768, 12, 8, 3072, 16, 224, 224, 4};
  c.decoder.dim = 768;
  c.decoder.layers = 6;
  c.decoder.heads = 8;
  c.decoder.object_queries = 12;
  c.decoder.frames = 4;
  c.decoder.text_dim = 768;
  c.decoder.embed_dim = 256;
  return c;
}

TrainConfig paper_train_config() {
  TrainConfig c;
  c.batch_size = 128;
  c.lr = 3e-5;
  c.epochs = 5;
  c.lambda_word = 0.5;
  c.freeze_backbone = true;
  return c;
}

}  // namespace ovl
