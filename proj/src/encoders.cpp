#include "ovl/encoders.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_map>

namespace ovl {

using ad::Graph;

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    unsigned char u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (std::isspace(u)) {
      if (!cur.empty()) {
        words.push_back(cur);
        cur.clear();
      }
    }
    // punctuation characters are stripped
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

Vocabulary Vocabulary::from_words(const std::vector<std::string>& words) {
  Vocabulary v;
  v.tokens = {"<unk>", "<eos>"};
  for (const auto& w : words)
    if (std::find(v.tokens.begin(), v.tokens.end(), w) == v.tokens.end())
      v.tokens.push_back(w);
  return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("Vocabulary::load: cannot open " + path);
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) v.tokens.push_back(line);
  if (v.tokens.size() < 2)
    throw std::runtime_error("Vocabulary::load: missing reserved UNK/EOS lines");
  return v;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("Vocabulary::save: cannot open " + path);
  for (const auto& t : tokens) out << t << "\n";
}

int Vocabulary::id(const std::string& word) const {
  for (int i = 0; i < size(); ++i)
    if (tokens[i] == word) return i;
  return kUnk;
}

std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab) {
  std::vector<int> ids;
  for (const auto& w : split_words(text)) ids.push_back(vocab.id(w));
  ids.push_back(Vocabulary::kEos);
  return ids;
}

// ---------------------------------------------------------------- text

void text_register(nn::ParamStore& p, const TextEncoderConfig& cfg, Rng& rng) {
  if (cfg.vocab_size < 2) throw std::invalid_argument("text_register: vocab too small");
  p["text.tok_embed"] = randn(cfg.vocab_size, cfg.dim, 0.02, rng);
  p["text.pos"] = randn(cfg.max_len, cfg.dim, 0.02, rng);
  for (int i = 0; i < cfg.layers; ++i)
    nn::register_encoder_block(p, "text.b" + std::to_string(i), cfg.dim, cfg.ffn_dim, rng);
  nn::register_layer_norm(p, "text.ln_f", cfg.dim);
}

Graph::Id text_forward(const nn::Bound& b, const TextEncoderConfig& cfg,
                       const std::vector<int>& ids) {
  Graph& g = *b.g;
  int n = static_cast<int>(ids.size());
  if (n < 1 || ids.back() != Vocabulary::kEos)
    throw std::invalid_argument("text_forward: sequence must end with EOS");
  if (n > cfg.max_len)
    throw std::invalid_argument("text_forward: sequence longer than max_len");
  for (int id : ids)
    if (id < 0 || id >= cfg.vocab_size)
      throw std::invalid_argument("text_forward: token id out of range");
  std::vector<int> pos(n);
  for (int i = 0; i < n; ++i) pos[i] = i;
  Graph::Id x = g.add(g.gather_rows(b["text.tok_embed"], ids),
                      g.gather_rows(b["text.pos"], pos));
  for (int i = 0; i < cfg.layers; ++i)
    x = nn::encoder_block(b, "text.b" + std::to_string(i), x, cfg.heads);
  return nn::layer_norm(b, "text.ln_f", x);
}

Graph::Id encode_sentence(const nn::Bound& b, const TextEncoderConfig& cfg,
                          const std::vector<int>& ids) {
  Graph& g = *b.g;
  Graph::Id seq = text_forward(b, cfg, ids);
  return g.slice_rows(seq, static_cast<int>(ids.size()) - 1, 1);
}

TextOutput encode_text(const nn::Bound& b, const TextEncoderConfig& cfg,
                       const std::vector<int>& ids,
                       const std::vector<TokenSpan>& noun_spans) {
  TextOutput out;
  out.sentence = encode_sentence(b, cfg, ids);
  int n = static_cast<int>(ids.size());
  for (const TokenSpan& s : noun_spans) {
    if (s.start < 0 || s.len < 1 || s.start + s.len > n)
      throw std::invalid_argument("encode_text: span out of range");
    std::vector<int> phrase(ids.begin() + s.start, ids.begin() + s.start + s.len);
    phrase.push_back(Vocabulary::kEos);
    out.nouns.push_back(encode_sentence(b, cfg, phrase));
  }
  return out;
}

// ---------------------------------------------------------------- video

Tensor patchify(const VideoFrames& frames, int patch) {
  if (patch < 1 || frames.h % patch != 0 || frames.w % patch != 0)
    throw std::invalid_argument("patchify: frame size not divisible by patch");
  if (frames.t < 1) throw std::invalid_argument("patchify: empty clip");
  int hp = frames.h / patch, wp = frames.w / patch;
  Tensor out(frames.t * hp * wp, patch * patch * 3);
  int row = 0;
  for (int f = 0; f < frames.t; ++f)
    for (int py = 0; py < hp; ++py)
      for (int px = 0; px < wp; ++px) {
        int col = 0;
        for (int y = 0; y < patch; ++y)
          for (int x = 0; x < patch; ++x)
            for (int c = 0; c < 3; ++c)
              out(row, col++) = frames.at(f, py * patch + y, px * patch + x, c);
        ++row;
      }
  return out;
}

void video_register(nn::ParamStore& p, const VideoEncoderConfig& cfg, Rng& rng) {
  int grid = (cfg.frame_h / cfg.patch) * (cfg.frame_w / cfg.patch);
  nn::register_linear(p, "video.patch", cfg.dim, cfg.patch * cfg.patch * 3, rng);
  p["video.pos_space"] = randn(grid, cfg.dim, 0.02, rng);
  p["video.pos_frame"] = randn(cfg.frames, cfg.dim, 0.02, rng);
  for (int i = 0; i < cfg.layers; ++i)
    nn::register_encoder_block(p, "video.b" + std::to_string(i), cfg.dim, cfg.ffn_dim, rng);
  nn::register_layer_norm(p, "video.ln_f", cfg.dim);
}

FeatureMap encode_video(const nn::Bound& b, const VideoEncoderConfig& cfg,
                        const VideoFrames& frames) {
  Graph& g = *b.g;
  if (frames.h != cfg.frame_h || frames.w != cfg.frame_w)
    throw std::invalid_argument("encode_video: frame size mismatch");
  if (frames.t > cfg.frames)
    throw std::invalid_argument("encode_video: more frames than the frame table");
  Tensor patches = patchify(frames, cfg.patch);
  int hp = frames.h / cfg.patch, wp = frames.w / cfg.patch;
  int grid = hp * wp;

  Graph::Id x = nn::linear(b, "video.patch", g.constant(std::move(patches)));
  // spatial position, tiled per frame; frame embedding, repeated per cell
  std::vector<int> space_idx(static_cast<size_t>(frames.t) * grid);
  std::vector<int> frame_idx(space_idx.size());
  for (int f = 0; f < frames.t; ++f)
    for (int s = 0; s < grid; ++s) {
      space_idx[static_cast<size_t>(f) * grid + s] = s;
      frame_idx[static_cast<size_t>(f) * grid + s] = f;
    }
  x = g.add(x, g.gather_rows(b["video.pos_space"], space_idx));
  x = g.add(x, g.gather_rows(b["video.pos_frame"], frame_idx));

  for (int i = 0; i < cfg.layers; ++i)
    x = nn::encoder_block(b, "video.b" + std::to_string(i), x, cfg.heads);
  x = nn::layer_norm(b, "video.ln_f", x);

  FeatureMap fm;
  fm.tokens = x;
  fm.t = frames.t;
  fm.hp = hp;
  fm.wp = wp;
  return fm;
}

Graph::Id mean_pool(const nn::Bound& b, const FeatureMap& fmap) {
  Graph& g = *b.g;
  int n = g.val(fmap.tokens).rows;
  return g.matmul(g.constant(Tensor::full(1, n, 1.0 / n)), fmap.tokens);
}

}  // namespace ovl
