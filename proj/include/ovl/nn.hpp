#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ovl/graph.hpp"
#include "ovl/tensor.hpp"

namespace ovl::nn {

// Named parameter tensors. std::map keeps iteration order stable so
// checkpoints and update loops are deterministic.
using ParamStore = std::map<std::string, Tensor>;

// Parameters bound into a graph as leaves for one forward/backward pass.
struct Bound {
  ad::Graph* g = nullptr;
  std::map<std::string, ad::Graph::Id> ids;

  ad::Graph::Id operator[](const std::string& name) const {
    auto it = ids.find(name);
    if (it == ids.end()) throw std::runtime_error("unbound parameter: " + name);
    return it->second;
  }
  bool has(const std::string& name) const { return ids.count(name) > 0; }
};

// trainable(name) decides requires_grad per parameter (backbone freezing).
Bound bind(ad::Graph& g, const ParamStore& params,
           const std::function<bool(const std::string&)>& trainable);
Bound bind_all(ad::Graph& g, const ParamStore& params, bool trainable);

// ---- registration (adds tensors to the store) ----
void register_linear(ParamStore& p, const std::string& prefix, int out, int in,
                     Rng& rng);
void register_layer_norm(ParamStore& p, const std::string& prefix, int dim);
void register_attention(ParamStore& p, const std::string& prefix, int dim, Rng& rng);
void register_encoder_block(ParamStore& p, const std::string& prefix, int dim,
                            int ffn_dim, Rng& rng);
void register_decoder_block(ParamStore& p, const std::string& prefix, int dim,
                            int ffn_dim, Rng& rng);

// ---- forward pieces (x is rows x dim) ----
ad::Graph::Id linear(const Bound& b, const std::string& prefix, ad::Graph::Id x);
ad::Graph::Id layer_norm(const Bound& b, const std::string& prefix, ad::Graph::Id x);
ad::Graph::Id multi_head_attention(const Bound& b, const std::string& prefix,
                                   ad::Graph::Id q_in, ad::Graph::Id k_in,
                                   ad::Graph::Id v_in, int heads);
// Pre-norm self-attention + feed-forward block.
ad::Graph::Id encoder_block(const Bound& b, const std::string& prefix, ad::Graph::Id x,
                            int heads);
// Pre-norm self-attention, cross-attention (keys carry mem_pos), feed-forward.
ad::Graph::Id decoder_block(const Bound& b, const std::string& prefix, ad::Graph::Id x,
                            ad::Graph::Id mem, ad::Graph::Id mem_keys, int heads);

const double kLnEps = 1e-5;

}  // namespace ovl::nn
