#include "ovl/nn.hpp"

#include <cmath>

namespace ovl::nn {

using ad::Graph;

Bound bind(ad::Graph& g, const ParamStore& params,
           const std::function<bool(const std::string&)>& trainable) {
  Bound b;
  b.g = &g;
  for (const auto& [name, tensor] : params)
    b.ids.emplace(name, g.leaf(tensor, trainable(name)));
  return b;
}

Bound bind_all(ad::Graph& g, const ParamStore& params, bool trainable) {
  return ovl::nn::bind(g, params, [trainable](const std::string&) { return trainable; });
}

void register_linear(ParamStore& p, const std::string& prefix, int out, int in,
                     Rng& rng) {
  p[prefix + ".w"] = randn(out, in, 0.02, rng);
  p[prefix + ".b"] = Tensor::zeros(1, out);
}

void register_layer_norm(ParamStore& p, const std::string& prefix, int dim) {
  p[prefix + ".g"] = Tensor::full(1, dim, 1.0);
  p[prefix + ".b"] = Tensor::zeros(1, dim);
}

void register_attention(ParamStore& p, const std::string& prefix, int dim, Rng& rng) {
  register_linear(p, prefix + ".q", dim, dim, rng);
  register_linear(p, prefix + ".k", dim, dim, rng);
  register_linear(p, prefix + ".v", dim, dim, rng);
  register_linear(p, prefix + ".o", dim, dim, rng);
}

void register_encoder_block(ParamStore& p, const std::string& prefix, int dim,
                            int ffn_dim, Rng& rng) {
  register_layer_norm(p, prefix + ".ln1", dim);
  register_attention(p, prefix + ".attn", dim, rng);
  register_layer_norm(p, prefix + ".ln2", dim);
  register_linear(p, prefix + ".f1", ffn_dim, dim, rng);
  register_linear(p, prefix + ".f2", dim, ffn_dim, rng);
}

void register_decoder_block(ParamStore& p, const std::string& prefix, int dim,
                            int ffn_dim, Rng& rng) {
  register_layer_norm(p, prefix + ".ln1", dim);
  register_attention(p, prefix + ".self", dim, rng);
  register_layer_norm(p, prefix + ".ln2", dim);
  register_attention(p, prefix + ".cross", dim, rng);
  register_layer_norm(p, prefix + ".ln3", dim);
  register_linear(p, prefix + ".f1", ffn_dim, dim, rng);
  register_linear(p, prefix + ".f2", dim, ffn_dim, rng);
}

Graph::Id linear(const Bound& b, const std::string& prefix, Graph::Id x) {
  Graph& g = *b.g;
  return g.add_rowvec(g.matmul_nt(x, b[prefix + ".w"]), b[prefix + ".b"]);
}

Graph::Id layer_norm(const Bound& b, const std::string& prefix, Graph::Id x) {
  Graph& g = *b.g;
  return g.add_rowvec(
      g.mul_rowvec(g.layer_norm_rows(x, kLnEps), b[prefix + ".g"]),
      b[prefix + ".b"]);
}

Graph::Id multi_head_attention(const Bound& b, const std::string& prefix,
                               Graph::Id q_in, Graph::Id k_in, Graph::Id v_in,
                               int heads) {
  Graph& g = *b.g;
  int dim = g.val(q_in).cols;
  if (dim % heads != 0)
    throw std::invalid_argument("multi_head_attention: dim not divisible by heads");
  int dh = dim / heads;
  Graph::Id q = linear(b, prefix + ".q", q_in);
  Graph::Id k = linear(b, prefix + ".k", k_in);
  Graph::Id v = linear(b, prefix + ".v", v_in);
  std::vector<Graph::Id> ctx;
  ctx.reserve(heads);
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < heads; ++h) {
    Graph::Id qh = g.slice_cols(q, h * dh, dh);
    Graph::Id kh = g.slice_cols(k, h * dh, dh);
    Graph::Id vh = g.slice_cols(v, h * dh, dh);
    Graph::Id attn = g.softmax_rows(g.scale(g.matmul_nt(qh, kh), inv_sqrt));
    ctx.push_back(g.matmul(attn, vh));
  }
  return linear(b, prefix + ".o", g.concat_cols(ctx));
}

Graph::Id encoder_block(const Bound& b, const std::string& prefix, Graph::Id x,
                        int heads) {
  Graph& g = *b.g;
  Graph::Id n1 = layer_norm(b, prefix + ".ln1", x);
  x = g.add(x, multi_head_attention(b, prefix + ".attn", n1, n1, n1, heads));
  Graph::Id n2 = layer_norm(b, prefix + ".ln2", x);
  Graph::Id f = linear(b, prefix + ".f2", g.gelu(linear(b, prefix + ".f1", n2)));
  return g.add(x, f);
}

Graph::Id decoder_block(const Bound& b, const std::string& prefix, Graph::Id x,
                        Graph::Id mem, Graph::Id mem_keys, int heads) {
  Graph& g = *b.g;
  Graph::Id n1 = layer_norm(b, prefix + ".ln1", x);
  x = g.add(x, multi_head_attention(b, prefix + ".self", n1, n1, n1, heads));
  Graph::Id n2 = layer_norm(b, prefix + ".ln2", x);
  x = g.add(x, multi_head_attention(b, prefix + ".cross", n2, mem_keys, mem, heads));
  Graph::Id n3 = layer_norm(b, prefix + ".ln3", x);
  Graph::Id f = linear(b, prefix + ".f2", g.gelu(linear(b, prefix + ".f1", n3)));
  return g.add(x, f);
}

}  // namespace ovl::nn
