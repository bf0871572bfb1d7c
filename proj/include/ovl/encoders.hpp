#pragma once

#include <string>
#include <vector>

#include "ovl/nn.hpp"

namespace ovl {

// Lowercases, strips punctuation characters, splits on whitespace.
std::vector<std::string> split_words(const std::string& text);

// Newline-delimited token file; ids are line numbers. Lines 0 and 1 are
// reserved for the unknown and end-of-sequence tokens.
struct Vocabulary {
  static constexpr int kUnk = 0;
  static constexpr int kEos = 1;

  std::vector<std::string> tokens;

  static Vocabulary from_words(const std::vector<std::string>& words);
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  int size() const { return static_cast<int>(tokens.size()); }
  int id(const std::string& word) const;
};

// Whitespace tokenization over the closed vocabulary; unknown words map to
// UNK and the sequence always ends with EOS.
std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab);

struct TextEncoderConfig {
  int vocab_size = 0;
  int dim = 64;
  int layers = 2;
  int heads = 4;
  int ffn_dim = 256;
  int max_len = 24;
};

// Token span (offset, length) within a token sequence, used to mark noun
// phrases inside a narration.
struct TokenSpan {
  int start = 0;
  int len = 0;
};

struct TextOutput {
  ad::Graph::Id sentence;               // 1 x dim, EOS-position output
  std::vector<ad::Graph::Id> nouns;     // one per input span, each 1 x dim
};

void text_register(nn::ParamStore& p, const TextEncoderConfig& cfg, Rng& rng);

// Full sequence output after the final layer norm (n_tokens x dim).
ad::Graph::Id text_forward(const nn::Bound& b, const TextEncoderConfig& cfg,
                           const std::vector<int>& ids);

// Sentence embedding = EOS-position row of text_forward.
ad::Graph::Id encode_sentence(const nn::Bound& b, const TextEncoderConfig& cfg,
                              const std::vector<int>& ids);

// Sentence embedding plus independently re-encoded noun-phrase embeddings.
TextOutput encode_text(const nn::Bound& b, const TextEncoderConfig& cfg,
                       const std::vector<int>& ids,
                       const std::vector<TokenSpan>& noun_spans);

// ---------------------------------------------------------------- video

struct VideoEncoderConfig {
  int dim = 64;
  int layers = 2;
  int heads = 4;
  int ffn_dim = 256;
  int patch = 8;
  int frame_h = 32;
  int frame_w = 32;
  int frames = 4;  // length of the learned frame-embedding table
};

// T x H x W x 3 clip, values in [0,1].
struct VideoFrames {
  int t = 0, h = 0, w = 0;
  std::vector<double> rgb;

  VideoFrames() = default;
  VideoFrames(int t_, int h_, int w_)
      : t(t_), h(h_), w(w_), rgb(static_cast<size_t>(t_) * h_ * w_ * 3, 0.0) {}

  double& at(int f, int y, int x, int c) {
    return rgb[((static_cast<size_t>(f) * h + y) * w + x) * 3 + c];
  }
  double at(int f, int y, int x, int c) const {
    return rgb[((static_cast<size_t>(f) * h + y) * w + x) * 3 + c];
  }
};

// Spatially downsampled feature tokens: rows ordered frame-major then
// row-major over the patch grid.
struct FeatureMap {
  ad::Graph::Id tokens;  // (t * hp * wp) x dim
  int t = 0, hp = 0, wp = 0;
};

// Frame-major rows of flattened P x P x 3 patches.
Tensor patchify(const VideoFrames& frames, int patch);

void video_register(nn::ParamStore& p, const VideoEncoderConfig& cfg, Rng& rng);

FeatureMap encode_video(const nn::Bound& b, const VideoEncoderConfig& cfg,
                        const VideoFrames& frames);

// Mean-pooled clip embedding of the backbone feature map. Computed for
// completeness; the matching embedding used everywhere comes from the
// decoder's video query.
ad::Graph::Id mean_pool(const nn::Bound& b, const FeatureMap& fmap);

}  // namespace ovl
