#include "ovl/model.hpp"

namespace ovl {

using ad::Graph;

void ModelConfig::finalize() {
  if (video.frame_h % video.patch != 0 || video.frame_w % video.patch != 0)
    throw std::invalid_argument("ModelConfig: frame size not divisible by patch");
  if (decoder.dim != video.dim)
    throw std::invalid_argument("ModelConfig: decoder dim must match video dim");
  if (decoder.text_dim != text.dim)
    throw std::invalid_argument("ModelConfig: semantic head dim must match text dim");
  if (decoder.frames != video.frames)
    throw std::invalid_argument("ModelConfig: decoder frames must match video frames");
  decoder.grid = (video.frame_h / video.patch) * (video.frame_w / video.patch);
  if (text.dim % text.heads != 0 || video.dim % video.heads != 0 ||
      decoder.dim % decoder.heads != 0)
    throw std::invalid_argument("ModelConfig: dim not divisible by heads");
}

const char* param_group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::kQueries: return "queries";
    case ParamGroup::kFrameVectors: return "frame_vectors";
    case ParamGroup::kDecoder: return "decoder";
    case ParamGroup::kHeads: return "heads";
    case ParamGroup::kProjections: return "projections";
    default: return "encoders";
  }
}

ParamGroup param_group_of(const std::string& name) {
  if (name == "queries.frame") return ParamGroup::kFrameVectors;
  if (name.rfind("queries.", 0) == 0) return ParamGroup::kQueries;
  if (name.rfind("decoder.", 0) == 0) return ParamGroup::kDecoder;
  if (name.rfind("heads.", 0) == 0) return ParamGroup::kHeads;
  if (name.rfind("proj.", 0) == 0) return ParamGroup::kProjections;
  if (name.rfind("text.", 0) == 0 || name.rfind("video.", 0) == 0)
    return ParamGroup::kEncoders;
  throw std::invalid_argument("param_group_of: unknown parameter " + name);
}

void Model::init(uint64_t seed) {
  cfg.finalize();
  params.clear();
  Rng rng(seed);
  text_register(params, cfg.text, rng);
  video_register(params, cfg.video, rng);
  decoder_register(params, cfg.decoder, rng);
}

bool Model::is_encoder_param(const std::string& name) const {
  return param_group_of(name) == ParamGroup::kEncoders;
}

bool Model::is_trainable(const std::string& name) const {
  return !(cfg.freeze_backbone && is_encoder_param(name));
}

nn::Bound Model::bind(ad::Graph& g, bool training) const {
  if (!training) return nn::bind_all(g, params, false);
  return nn::bind(g, params, [this](const std::string& n) { return is_trainable(n); });
}

ClipForward Model::forward_clip(const nn::Bound& b, const VideoFrames& frames) const {
  ClipForward out;
  out.fmap = encode_video(b, cfg.video, frames);
  out.summaries = decode(b, cfg.decoder, out.fmap);
  out.boxes = predict_boxes(b, cfg.decoder, out.summaries);
  out.names = project_names(b, predict_names(b, cfg.decoder, out.summaries));
  out.video_emb = project_video(b, out.summaries.video);
  return out;
}

ad::Graph::Id Model::clip_embedding(const nn::Bound& b, const VideoFrames& frames) const {
  FeatureMap fmap = encode_video(b, cfg.video, frames);
  SummaryVectors s = decode(b, cfg.decoder, fmap);
  return project_video(b, s.video);
}

ad::Graph::Id Model::text_embedding(const nn::Bound& b, const std::vector<int>& ids) const {
  return project_text(b, encode_sentence(b, cfg.text, ids));
}

ad::Graph::Id Model::phrase_embeddings(const nn::Bound& b, const Vocabulary& vocab,
                                       const std::vector<std::string>& phrases) const {
  if (phrases.empty()) throw std::invalid_argument("phrase_embeddings: empty list");
  std::vector<ad::Graph::Id> rows;
  rows.reserve(phrases.size());
  for (const auto& s : phrases)
    rows.push_back(encode_sentence(b, cfg.text, tokenize(s, vocab)));
  return project_text(b, b.g->concat_rows(rows));
}

std::vector<double> Model::embed_clip(const VideoFrames& frames) const {
  ad::Graph g;
  nn::Bound b = bind(g, false);
  ClipForward f = forward_clip(b, frames);
  return g.val(f.video_emb).v;
}

std::vector<double> Model::embed_text(const Vocabulary& vocab, const std::string& text) const {
  ad::Graph g;
  nn::Bound b = bind(g, false);
  return g.val(text_embedding(b, tokenize(text, vocab))).v;
}

}  // namespace ovl
