#include "ovl/decoder.hpp"

namespace ovl {

using ad::Graph;

void decoder_register(nn::ParamStore& p, const DecoderConfig& cfg, Rng& rng) {
  if (cfg.object_queries < 1)
    throw std::invalid_argument("decoder_register: need at least one object query");
  p["queries.hand"] = randn(cfg.hand_queries(), cfg.dim, 0.02, rng);
  p["queries.obj"] = randn(cfg.object_queries, cfg.dim, 0.02, rng);
  p["queries.video"] = randn(1, cfg.dim, 0.02, rng);
  p["queries.frame"] = randn(cfg.frames, cfg.dim, 0.02, rng);
  p["decoder.pos_space"] = randn(cfg.grid, cfg.dim, 0.02, rng);
  p["decoder.pos_frame"] = randn(cfg.frames, cfg.dim, 0.02, rng);
  for (int i = 0; i < cfg.layers; ++i)
    nn::register_decoder_block(p, "decoder.b" + std::to_string(i), cfg.dim,
                               cfg.dim * 4, rng);
  nn::register_layer_norm(p, "decoder.ln_f", cfg.dim);
  // box head: 3-layer MLP on concat(summary, frame vector)
  nn::register_linear(p, "heads.box.l1", cfg.dim, 2 * cfg.dim, rng);
  nn::register_linear(p, "heads.box.l2", cfg.dim, cfg.dim, rng);
  nn::register_linear(p, "heads.box.l3", 4, cfg.dim, rng);
  // semantic head: 2-layer MLP into the text encoder space
  nn::register_linear(p, "heads.sem.l1", cfg.text_dim, cfg.dim, rng);
  nn::register_linear(p, "heads.sem.l2", cfg.text_dim, cfg.text_dim, rng);
  // similarity-space projections
  nn::register_linear(p, "proj.video", cfg.embed_dim, cfg.dim, rng);
  nn::register_linear(p, "proj.text", cfg.embed_dim, cfg.text_dim, rng);
  nn::register_linear(p, "proj.obj", cfg.embed_dim, cfg.text_dim, rng);
}

SummaryVectors decode(const nn::Bound& b, const DecoderConfig& cfg,
                      const FeatureMap& fmap) {
  Graph& g = *b.g;
  if (g.val(fmap.tokens).cols != cfg.dim)
    throw std::invalid_argument("decode: feature dim does not match query dim");
  int grid = fmap.hp * fmap.wp;
  if (grid != cfg.grid)
    throw std::invalid_argument("decode: feature grid does not match config");
  if (fmap.t > cfg.frames)
    throw std::invalid_argument("decode: more frames than position table");

  Graph::Id queries = g.concat_rows({b["queries.hand"], b["queries.obj"],
                                     b["queries.video"]});
  // learned space+frame positions on the cross-attention keys only
  std::vector<int> space_idx(static_cast<size_t>(fmap.t) * grid);
  std::vector<int> frame_idx(space_idx.size());
  for (int f = 0; f < fmap.t; ++f)
    for (int s = 0; s < grid; ++s) {
      space_idx[static_cast<size_t>(f) * grid + s] = s;
      frame_idx[static_cast<size_t>(f) * grid + s] = f;
    }
  Graph::Id keys = g.add(fmap.tokens,
                         g.add(g.gather_rows(b["decoder.pos_space"], space_idx),
                               g.gather_rows(b["decoder.pos_frame"], frame_idx)));

  Graph::Id x = queries;
  for (int i = 0; i < cfg.layers; ++i)
    x = nn::decoder_block(b, "decoder.b" + std::to_string(i), x, fmap.tokens, keys,
                          cfg.heads);
  x = nn::layer_norm(b, "decoder.ln_f", x);

  SummaryVectors out;
  out.rows = g.slice_rows(x, 0, cfg.hand_queries() + cfg.object_queries);
  out.video = g.slice_rows(x, cfg.hand_queries() + cfg.object_queries, 1);
  return out;
}

ad::Graph::Id predict_boxes(const nn::Bound& b, const DecoderConfig& cfg,
                            const SummaryVectors& s) {
  Graph& g = *b.g;
  int q = cfg.hand_queries() + cfg.object_queries;
  int t = cfg.frames;
  // row (j*T + i) = concat(summary j, frame vector i)
  std::vector<int> sum_idx(static_cast<size_t>(q) * t), frm_idx(sum_idx.size());
  for (int j = 0; j < q; ++j)
    for (int i = 0; i < t; ++i) {
      sum_idx[static_cast<size_t>(j) * t + i] = j;
      frm_idx[static_cast<size_t>(j) * t + i] = i;
    }
  Graph::Id x = g.concat_cols({g.gather_rows(s.rows, sum_idx),
                               g.gather_rows(b["queries.frame"], frm_idx)});
  x = g.gelu(nn::linear(b, "heads.box.l1", x));
  x = g.gelu(nn::linear(b, "heads.box.l2", x));
  return g.sigmoid(nn::linear(b, "heads.box.l3", x));
}

ad::Graph::Id predict_names(const nn::Bound& b, const DecoderConfig& cfg,
                            const SummaryVectors& s) {
  Graph& g = *b.g;
  Graph::Id obj = g.slice_rows(s.rows, cfg.hand_queries(), cfg.object_queries);
  Graph::Id x = g.gelu(nn::linear(b, "heads.sem.l1", obj));
  return nn::linear(b, "heads.sem.l2", x);
}

ad::Graph::Id project_video(const nn::Bound& b, ad::Graph::Id video_raw) {
  return nn::linear(b, "proj.video", video_raw);
}

ad::Graph::Id project_text(const nn::Bound& b, ad::Graph::Id text_raw) {
  return nn::linear(b, "proj.text", text_raw);
}

ad::Graph::Id project_names(const nn::Bound& b, ad::Graph::Id names_raw) {
  return nn::linear(b, "proj.obj", names_raw);
}

std::vector<std::vector<Box>> boxes_from_grid(const Tensor& grid, int n_queries,
                                              int frames) {
  if (grid.rows != n_queries * frames || grid.cols != 4)
    throw std::invalid_argument("boxes_from_grid: bad grid shape");
  std::vector<std::vector<Box>> out(n_queries, std::vector<Box>(frames));
  for (int j = 0; j < n_queries; ++j)
    for (int i = 0; i < frames; ++i) {
      int r = j * frames + i;
      Box bx{grid(r, 0), grid(r, 1), grid(r, 2), grid(r, 3)};
      // squashed outputs are already in (0,1); clamp is a no-op guard
      CornerBox c = to_corners(bx);
      out[j][i] = from_corners(c);
    }
  return out;
}

}  // namespace ovl
