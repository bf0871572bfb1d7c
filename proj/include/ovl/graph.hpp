#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "ovl/tensor.hpp"

namespace ovl::ad {

// Define-by-run reverse-mode tape over 2-D double tensors. Values are
// computed eagerly when an op is recorded; backward() walks the tape in
// reverse. Single-threaded by construction, so reduction order is fixed and
// results are bitwise reproducible for a given build.
class Graph {
 public:
  using Id = int32_t;

  Id leaf(Tensor t, bool requires_grad);
  Id constant(Tensor t) { return leaf(std::move(t), false); }
  Id scalar(double x) { return constant(Tensor::full(1, 1, x)); }

  const Tensor& val(Id id) const { return nodes_[id].val; }
  const Tensor& grad(Id id) const;
  bool has_grad(Id id) const { return !nodes_[id].grad.empty(); }
  bool needs_grad(Id id) const { return nodes_[id].needs_grad; }
  size_t num_nodes() const { return nodes_.size(); }

  // root must be 1x1. Clears previous gradients.
  void backward(Id root);

  // ---- elementwise (same shape) ----
  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);
  Id div(Id a, Id b);
  Id minimum(Id a, Id b);  // ties take a's gradient
  Id maximum(Id a, Id b);  // ties take a's gradient

  // ---- broadcast over rows (v is 1xC) ----
  Id add_rowvec(Id a, Id v);
  Id mul_rowvec(Id a, Id v);

  // ---- scalar-arg ----
  Id scale(Id a, double c);
  Id add_scalar(Id a, double c);
  Id mul_const(Id a, Tensor w);  // elementwise by a constant tensor

  // ---- unary ----
  Id gelu(Id a);
  Id sigmoid(Id a);
  Id relu(Id a);
  Id abs(Id a);
  Id log(Id a);
  Id exp(Id a);

  // ---- linear algebra ----
  Id matmul(Id a, Id b);     // (n,k)x(k,m)
  Id matmul_nt(Id a, Id b);  // a * b^T : (n,k)x(m,k) -> (n,m)
  Id transpose(Id a);

  // ---- shape ----
  Id slice_rows(Id a, int r0, int n);
  Id slice_cols(Id a, int c0, int n);
  Id concat_rows(const std::vector<Id>& xs);
  Id concat_cols(const std::vector<Id>& xs);
  Id gather_rows(Id a, std::vector<int> idx);
  Id select(Id a, std::vector<std::pair<int, int>> ij);  // -> (n,1)

  // ---- rowwise ----
  Id softmax_rows(Id a);
  Id logsumexp_rows(Id a);                  // -> (n,1)
  Id layer_norm_rows(Id a, double eps);     // normalize only; affine separate
  Id l2_normalize_rows(Id a);               // throws on near-zero row norm

  // ---- reductions ----
  Id sum_all(Id a);   // -> (1,1)
  Id mean_all(Id a);  // -> (1,1)

 private:
  struct Node {
    Tensor val;
    Tensor grad;  // empty until touched in backward
    bool needs_grad = false;
    std::function<void(Graph&)> bw;  // null for leaves/constants
  };

  std::vector<Node> nodes_;

  Id push(Tensor val, bool needs, std::function<void(Graph&)> bw);
  Tensor& grad_ref(Id id);  // allocate zeros on first touch
  void accum(Id id, const Tensor& g);
};

}  // namespace ovl::ad
