#include "ovl/graph.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace ovl::ad {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const EMat> emap(const Tensor& t) {
  return Eigen::Map<const EMat>(t.v.data(), t.rows, t.cols);
}

Eigen::Map<EMat> emap(Tensor& t) {
  return Eigen::Map<EMat>(t.v.data(), t.rows, t.cols);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Graph::Id Graph::push(Tensor val, bool needs, std::function<void(Graph&)> bw) {
  Node n;
  n.val = std::move(val);
  n.needs_grad = needs;
  if (needs) n.bw = std::move(bw);
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

Graph::Id Graph::leaf(Tensor t, bool requires_grad) {
  return push(std::move(t), requires_grad, nullptr);
}

const Tensor& Graph::grad(Id id) const {
  if (nodes_[id].grad.empty())
    throw std::runtime_error("Graph::grad: node has no gradient (run backward first)");
  return nodes_[id].grad;
}

Tensor& Graph::grad_ref(Id id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor::zeros(n.val.rows, n.val.cols);
  return n.grad;
}

void Graph::accum(Id id, const Tensor& g) {
  if (!nodes_[id].needs_grad) return;
  Tensor& dst = grad_ref(id);
  check_same_shape(dst, g, "accum");
  for (size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += g.v[i];
}

void Graph::backward(Id root) {
  const Node& r = nodes_[root];
  if (r.val.rows != 1 || r.val.cols != 1)
    throw std::invalid_argument("Graph::backward: root must be scalar");
  if (!r.needs_grad)
    throw std::invalid_argument("Graph::backward: root does not require grad");
  for (auto& n : nodes_) n.grad = Tensor();
  grad_ref(root)(0, 0) = 1.0;
  for (Id i = root; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.bw && !n.grad.empty()) n.bw(*this);
  }
}

// ---------------------------------------------------------------- elementwise

Graph::Id Graph::add(Id a, Id b) {
  check_same_shape(val(a), val(b), "add");
  Tensor out = val(a);
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += val(b).v[i];
  bool needs = needs_grad(a) || needs_grad(b);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, b, id](Graph& g) {
      g.accum(a, g.nodes_[id].grad);
      g.accum(b, g.nodes_[id].grad);
    };
  return id;
}

Graph::Id Graph::sub(Id a, Id b) {
  check_same_shape(val(a), val(b), "sub");
  Tensor out = val(a);
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= val(b).v[i];
  bool needs = needs_grad(a) || needs_grad(b);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, b, id](Graph& g) {
      const Tensor& gr = g.nodes_[id].grad;
      g.accum(a, gr);
      if (g.needs_grad(b)) {
        Tensor neg = gr;
        for (double& x : neg.v) x = -x;
        g.accum(b, neg);
      }
    };
  return id;
}

Graph::Id Graph::mul(Id a, Id b) {
  check_same_shape(val(a), val(b), "mul");
  Tensor out = val(a);
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= val(b).v[i];
  bool needs = needs_grad(a) || needs_grad(b);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, b, id](Graph& g) {
      const Tensor& gr = g.nodes_[id].grad;
      if (g.needs_grad(a)) {
        Tensor da = gr;
        for (size_t i = 0; i < da.v.size(); ++i) da.v[i] *= g.val(b).v[i];
        g.accum(a, da);
      }
      if (g.needs_grad(b)) {
        Tensor db = gr;
        for (size_t i = 0; i < db.v.size(); ++i) db.v[i] *= g.val(a).v[i];
        g.accum(b, db);
      }
    };
  return id;
}

Graph::Id Graph::div(Id a, Id b) {
  check_same_shape(val(a), val(b), "div");
  Tensor out = val(a);
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] /= val(b).v[i];
  bool needs = needs_grad(a) || needs_grad(b);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, b, id](Graph& g) {
      const Tensor& gr = g.nodes_[id].grad;
      if (g.needs_grad(a)) {
        Tensor da = gr;
        for (size_t i = 0; i < da.v.size(); ++i) da.v[i] /= g.val(b).v[i];
        g.accum(a, da);
      }
      if (g.needs_grad(b)) {
        Tensor db = gr;
        for (size_t i = 0; i < db.v.size(); ++i) {
          double bv = g.val(b).v[i];
          db.v[i] *= -g.val(a).v[i] / (bv * bv);
        }
        g.accum(b, db);
      }
    };
  return id;
}

Graph::Id Graph::minimum(Id a, Id b) {
  check_same_shape(val(a), val(b), "minimum");
  Tensor out = val(a);
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = std::min(out.v[i], val(b).v[i]);
  bool needs = needs_grad(a) || needs_grad(b);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, b, id](Graph& g) {
      const Tensor& gr = g.nodes_[id].grad;
      Tensor da = Tensor::zeros(gr.rows, gr.cols);
      Tensor db = Tensor::zeros(gr.rows, gr.cols);
      for (size_t i = 0; i < gr.v.size(); ++i) {
        if (g.val(a).v[i] <= g.val(b).v[i]) da.v[i] = gr.v[i];
        else db.v[i] = gr.v[i];
      }
      g.accum(a, da);
      g.accum(b, db);
    };
  return id;
}

Graph::Id Graph::maximum(Id a, Id b) {
  check_same_shape(val(a), val(b), "maximum");
  Tensor out = val(a);
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = std::max(out.v[i], val(b).v[i]);
  bool needs = needs_grad(a) || needs_grad(b);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, b, id](Graph& g) {
      const Tensor& gr = g.nodes_[id].grad;
      Tensor da = Tensor::zeros(gr.rows, gr.cols);
      Tensor db = Tensor::zeros(gr.rows, gr.cols);
      for (size_t i = 0; i < gr.v.size(); ++i) {
        if (g.val(a).v[i] >= g.val(b).v[i]) da.v[i] = gr.v[i];
        else db.v[i] = gr.v[i];
      }
      g.accum(a, da);
      g.accum(b, db);
    };
  return id;
}

// ---------------------------------------------------------------- broadcast

Graph::Id Graph::add_rowvec(Id a, Id v) {
  const Tensor& A = val(a);
  const Tensor& V = val(v);
  if (V.rows != 1 || V.cols != A.cols)
    throw std::invalid_argument("add_rowvec: v must be 1 x cols(a)");
  Tensor out = A;
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j) out(i, j) += V(0, j);
  bool needs = needs_grad(a) || needs_grad(v);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, v, id](Graph& g) {
      const Tensor& gr = g.nodes_[id].grad;
      g.accum(a, gr);
      if (g.needs_grad(v)) {
        Tensor dv = Tensor::zeros(1, gr.cols);
        for (int i = 0; i < gr.rows; ++i)
          for (int j = 0; j < gr.cols; ++j) dv(0, j) += gr(i, j);
        g.accum(v, dv);
      }
    };
  return id;
}

Graph::Id Graph::mul_rowvec(Id a, Id v) {
  const Tensor& A = val(a);
  const Tensor& V = val(v);
  if (V.rows != 1 || V.cols != A.cols)
    throw std::invalid_argument("mul_rowvec: v must be 1 x cols(a)");
  Tensor out = A;
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j) out(i, j) *= V(0, j);
  bool needs = needs_grad(a) || needs_grad(v);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, v, id](Graph& g) {
      const Tensor& gr = g.nodes_[id].grad;
      if (g.needs_grad(a)) {
        Tensor da = gr;
        for (int i = 0; i < gr.rows; ++i)
          for (int j = 0; j < gr.cols; ++j) da(i, j) *= g.val(v)(0, j);
        g.accum(a, da);
      }
      if (g.needs_grad(v)) {
        Tensor dv = Tensor::zeros(1, gr.cols);
        for (int i = 0; i < gr.rows; ++i)
          for (int j = 0; j < gr.cols; ++j) dv(0, j) += gr(i, j) * g.val(a)(i, j);
        g.accum(v, dv);
      }
    };
  return id;
}

// ---------------------------------------------------------------- scalar-arg

Graph::Id Graph::scale(Id a, double c) {
  Tensor out = val(a);
  for (double& x : out.v) x *= c;
  bool needs = needs_grad(a);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, c, id](Graph& g) {
      Tensor da = g.nodes_[id].grad;
      for (double& x : da.v) x *= c;
      g.accum(a, da);
    };
  return id;
}

Graph::Id Graph::add_scalar(Id a, double c) {
  Tensor out = val(a);
  for (double& x : out.v) x += c;
  bool needs = needs_grad(a);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, id](Graph& g) { g.accum(a, g.nodes_[id].grad); };
  return id;
}

Graph::Id Graph::mul_const(Id a, Tensor w) {
  check_same_shape(val(a), w, "mul_const");
  Tensor out = val(a);
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= w.v[i];
  bool needs = needs_grad(a);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, w = std::move(w), id](Graph& g) {
      Tensor da = g.nodes_[id].grad;
      for (size_t i = 0; i < da.v.size(); ++i) da.v[i] *= w.v[i];
      g.accum(a, da);
    };
  return id;
}

// ---------------------------------------------------------------- unary

Graph::Id Graph::gelu(Id a) {
  const Tensor& A = val(a);
  Tensor out = A;
  for (double& x : out.v) x = 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
  bool needs = needs_grad(a);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, id](Graph& g) {
      const Tensor& gr = g.nodes_[id].grad;
      Tensor da = gr;
      for (size_t i = 0; i < da.v.size(); ++i) {
        double x = g.val(a).v[i];
        double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
        double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
        da.v[i] *= cdf + x * pdf;
      }
      g.accum(a, da);
    };
  return id;
}

Graph::Id Graph::sigmoid(Id a) {
  Tensor out = val(a);
  for (double& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
  bool needs = needs_grad(a);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, id](Graph& g) {
      const Tensor& y = g.nodes_[id].val;
      Tensor da = g.nodes_[id].grad;
      for (size_t i = 0; i < da.v.size(); ++i) da.v[i] *= y.v[i] * (1.0 - y.v[i]);
      g.accum(a, da);
    };
  return id;
}

Graph::Id Graph::relu(Id a) {
  Tensor out = val(a);
  for (double& x : out.v) x = std::max(0.0, x);
  bool needs = needs_grad(a);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, id](Graph& g) {
      Tensor da = g.nodes_[id].grad;
      for (size_t i = 0; i < da.v.size(); ++i)
        if (g.val(a).v[i] <= 0.0) da.v[i] = 0.0;
      g.accum(a, da);
    };
  return id;
}

Graph::Id Graph::abs(Id a) {
  Tensor out = val(a);
  for (double& x : out.v) x = std::abs(x);
  bool needs = needs_grad(a);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, id](Graph& g) {
      Tensor da = g.nodes_[id].grad;
      for (size_t i = 0; i < da.v.size(); ++i) {
        double x = g.val(a).v[i];
        da.v[i] *= (x > 0.0) ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
      }
      g.accum(a, da);
    };
  return id;
}

Graph::Id Graph::log(Id a) {
  Tensor out = val(a);
  for (double& x : out.v) x = std::log(x);
  bool needs = needs_grad(a);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, id](Graph& g) {
      Tensor da = g.nodes_[id].grad;
      for (size_t i = 0; i < da.v.size(); ++i) da.v[i] /= g.val(a).v[i];
      g.accum(a, da);
    };
  return id;
}

Graph::Id Graph::exp(Id a) {
  Tensor out = val(a);
  for (double& x : out.v) x = std::exp(x);
  bool needs = needs_grad(a);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, id](Graph& g) {
      const Tensor& y = g.nodes_[id].val;
      Tensor da = g.nodes_[id].grad;
      for (size_t i = 0; i < da.v.size(); ++i) da.v[i] *= y.v[i];
      g.accum(a, da);
    };
  return id;
}

// ---------------------------------------------------------------- linalg

Graph::Id Graph::matmul(Id a, Id b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  if (A.cols != B.rows) throw std::invalid_argument("matmul: inner dim mismatch");
  Tensor out(A.rows, B.cols);
  emap(out).noalias() = emap(A) * emap(B);
  bool needs = needs_grad(a) || needs_grad(b);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, b, id](Graph& g) {
      const Tensor& gr = g.nodes_[id].grad;
      if (g.needs_grad(a)) {
        Tensor da(g.val(a).rows, g.val(a).cols);
        emap(da).noalias() = emap(gr) * emap(g.val(b)).transpose();
        g.accum(a, da);
      }
      if (g.needs_grad(b)) {
        Tensor db(g.val(b).rows, g.val(b).cols);
        emap(db).noalias() = emap(g.val(a)).transpose() * emap(gr);
        g.accum(b, db);
      }
    };
  return id;
}

Graph::Id Graph::matmul_nt(Id a, Id b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  if (A.cols != B.cols) throw std::invalid_argument("matmul_nt: inner dim mismatch");
  Tensor out(A.rows, B.rows);
  emap(out).noalias() = emap(A) * emap(B).transpose();
  bool needs = needs_grad(a) || needs_grad(b);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, b, id](Graph& g) {
      const Tensor& gr = g.nodes_[id].grad;
      if (g.needs_grad(a)) {
        Tensor da(g.val(a).rows, g.val(a).cols);
        emap(da).noalias() = emap(gr) * emap(g.val(b));
        g.accum(a, da);
      }
      if (g.needs_grad(b)) {
        Tensor db(g.val(b).rows, g.val(b).cols);
        emap(db).noalias() = emap(gr).transpose() * emap(g.val(a));
        g.accum(b, db);
      }
    };
  return id;
}

Graph::Id Graph::transpose(Id a) {
  const Tensor& A = val(a);
  Tensor out(A.cols, A.rows);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j) out(j, i) = A(i, j);
  bool needs = needs_grad(a);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, id](Graph& g) {
      const Tensor& gr = g.nodes_[id].grad;
      Tensor da(gr.cols, gr.rows);
      for (int i = 0; i < gr.rows; ++i)
        for (int j = 0; j < gr.cols; ++j) da(j, i) = gr(i, j);
      g.accum(a, da);
    };
  return id;
}

// ---------------------------------------------------------------- shape

Graph::Id Graph::slice_rows(Id a, int r0, int n) {
  const Tensor& A = val(a);
  if (r0 < 0 || n < 0 || r0 + n > A.rows)
    throw std::invalid_argument("slice_rows: out of range");
  Tensor out(n, A.cols);
  std::copy(A.v.begin() + static_cast<size_t>(r0) * A.cols,
            A.v.begin() + static_cast<size_t>(r0 + n) * A.cols, out.v.begin());
  bool needs = needs_grad(a);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, r0, id](Graph& g) {
      const Tensor& gr = g.nodes_[id].grad;
      Tensor& da = g.grad_ref(a);
      for (int i = 0; i < gr.rows; ++i)
        for (int j = 0; j < gr.cols; ++j) da(r0 + i, j) += gr(i, j);
    };
  return id;
}

Graph::Id Graph::slice_cols(Id a, int c0, int n) {
  const Tensor& A = val(a);
  if (c0 < 0 || n < 0 || c0 + n > A.cols)
    throw std::invalid_argument("slice_cols: out of range");
  Tensor out(A.rows, n);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = A(i, c0 + j);
  bool needs = needs_grad(a);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, c0, id](Graph& g) {
      const Tensor& gr = g.nodes_[id].grad;
      Tensor& da = g.grad_ref(a);
      for (int i = 0; i < gr.rows; ++i)
        for (int j = 0; j < gr.cols; ++j) da(i, c0 + j) += gr(i, j);
    };
  return id;
}

Graph::Id Graph::concat_rows(const std::vector<Id>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_rows: empty");
  int cols = val(xs[0]).cols, rows = 0;
  bool needs = false;
  for (Id x : xs) {
    if (val(x).cols != cols) throw std::invalid_argument("concat_rows: cols mismatch");
    rows += val(x).rows;
    needs = needs || needs_grad(x);
  }
  Tensor out(rows, cols);
  int r = 0;
  for (Id x : xs) {
    const Tensor& X = val(x);
    std::copy(X.v.begin(), X.v.end(), out.v.begin() + static_cast<size_t>(r) * cols);
    r += X.rows;
  }
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [xs, id](Graph& g) {
      const Tensor& gr = g.nodes_[id].grad;
      int r = 0;
      for (Id x : xs) {
        int n = g.val(x).rows;
        if (g.needs_grad(x)) {
          Tensor dx(n, gr.cols);
          std::copy(gr.v.begin() + static_cast<size_t>(r) * gr.cols,
                    gr.v.begin() + static_cast<size_t>(r + n) * gr.cols, dx.v.begin());
          g.accum(x, dx);
        }
        r += n;
      }
    };
  return id;
}

Graph::Id Graph::concat_cols(const std::vector<Id>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_cols: empty");
  int rows = val(xs[0]).rows, cols = 0;
  bool needs = false;
  for (Id x : xs) {
    if (val(x).rows != rows) throw std::invalid_argument("concat_cols: rows mismatch");
    cols += val(x).cols;
    needs = needs || needs_grad(x);
  }
  Tensor out(rows, cols);
  int c = 0;
  for (Id x : xs) {
    const Tensor& X = val(x);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < X.cols; ++j) out(i, c + j) = X(i, j);
    c += X.cols;
  }
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [xs, id](Graph& g) {
      const Tensor& gr = g.nodes_[id].grad;
      int c = 0;
      for (Id x : xs) {
        int n = g.val(x).cols;
        if (g.needs_grad(x)) {
          Tensor dx(gr.rows, n);
          for (int i = 0; i < gr.rows; ++i)
            for (int j = 0; j < n; ++j) dx(i, j) = gr(i, c + j);
          g.accum(x, dx);
        }
        c += n;
      }
    };
  return id;
}

Graph::Id Graph::gather_rows(Id a, std::vector<int> idx) {
  const Tensor& A = val(a);
  for (int i : idx)
    if (i < 0 || i >= A.rows) throw std::invalid_argument("gather_rows: index out of range");
  Tensor out(static_cast<int>(idx.size()), A.cols);
  for (size_t i = 0; i < idx.size(); ++i)
    for (int j = 0; j < A.cols; ++j) out(static_cast<int>(i), j) = A(idx[i], j);
  bool needs = needs_grad(a);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, idx = std::move(idx), id](Graph& g) {
      const Tensor& gr = g.nodes_[id].grad;
      Tensor& da = g.grad_ref(a);
      for (size_t i = 0; i < idx.size(); ++i)
        for (int j = 0; j < gr.cols; ++j) da(idx[i], j) += gr(static_cast<int>(i), j);
    };
  return id;
}

Graph::Id Graph::select(Id a, std::vector<std::pair<int, int>> ij) {
  const Tensor& A = val(a);
  for (auto [i, j] : ij)
    if (i < 0 || i >= A.rows || j < 0 || j >= A.cols)
      throw std::invalid_argument("select: index out of range");
  Tensor out(static_cast<int>(ij.size()), 1);
  for (size_t k = 0; k < ij.size(); ++k) out(static_cast<int>(k), 0) = A(ij[k].first, ij[k].second);
  bool needs = needs_grad(a);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, ij = std::move(ij), id](Graph& g) {
      const Tensor& gr = g.nodes_[id].grad;
      Tensor& da = g.grad_ref(a);
      for (size_t k = 0; k < ij.size(); ++k)
        da(ij[k].first, ij[k].second) += gr(static_cast<int>(k), 0);
    };
  return id;
}

// ---------------------------------------------------------------- rowwise

Graph::Id Graph::softmax_rows(Id a) {
  const Tensor& A = val(a);
  Tensor out = A;
  for (int i = 0; i < A.rows; ++i) {
    double m = -HUGE_VAL;
    for (int j = 0; j < A.cols; ++j) m = std::max(m, A(i, j));
    double s = 0;
    for (int j = 0; j < A.cols; ++j) {
      out(i, j) = std::exp(A(i, j) - m);
      s += out(i, j);
    }
    for (int j = 0; j < A.cols; ++j) out(i, j) /= s;
  }
  bool needs = needs_grad(a);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, id](Graph& g) {
      const Tensor& p = g.nodes_[id].val;
      const Tensor& gr = g.nodes_[id].grad;
      Tensor da(p.rows, p.cols);
      for (int i = 0; i < p.rows; ++i) {
        double dot = 0;
        for (int j = 0; j < p.cols; ++j) dot += gr(i, j) * p(i, j);
        for (int j = 0; j < p.cols; ++j) da(i, j) = p(i, j) * (gr(i, j) - dot);
      }
      g.accum(a, da);
    };
  return id;
}

Graph::Id Graph::logsumexp_rows(Id a) {
  const Tensor& A = val(a);
  Tensor out(A.rows, 1);
  Tensor p = A;  // softmax kept for backward
  for (int i = 0; i < A.rows; ++i) {
    double m = -HUGE_VAL;
    for (int j = 0; j < A.cols; ++j) m = std::max(m, A(i, j));
    double s = 0;
    for (int j = 0; j < A.cols; ++j) {
      p(i, j) = std::exp(A(i, j) - m);
      s += p(i, j);
    }
    for (int j = 0; j < A.cols; ++j) p(i, j) /= s;
    out(i, 0) = m + std::log(s);
  }
  bool needs = needs_grad(a);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, p = std::move(p), id](Graph& g) {
      const Tensor& gr = g.nodes_[id].grad;
      Tensor da(p.rows, p.cols);
      for (int i = 0; i < p.rows; ++i)
        for (int j = 0; j < p.cols; ++j) da(i, j) = gr(i, 0) * p(i, j);
      g.accum(a, da);
    };
  return id;
}

Graph::Id Graph::layer_norm_rows(Id a, double eps) {
  const Tensor& A = val(a);
  if (A.cols < 1) throw std::invalid_argument("layer_norm_rows: empty rows");
  Tensor out(A.rows, A.cols);
  Tensor inv_std(A.rows, 1);
  for (int i = 0; i < A.rows; ++i) {
    double mu = 0;
    for (int j = 0; j < A.cols; ++j) mu += A(i, j);
    mu /= A.cols;
    double var = 0;
    for (int j = 0; j < A.cols; ++j) {
      double d = A(i, j) - mu;
      var += d * d;
    }
    var /= A.cols;
    double s = 1.0 / std::sqrt(var + eps);
    inv_std(i, 0) = s;
    for (int j = 0; j < A.cols; ++j) out(i, j) = (A(i, j) - mu) * s;
  }
  bool needs = needs_grad(a);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, inv_std = std::move(inv_std), id](Graph& g) {
      const Tensor& y = g.nodes_[id].val;
      const Tensor& gr = g.nodes_[id].grad;
      Tensor da(y.rows, y.cols);
      for (int i = 0; i < y.rows; ++i) {
        double mg = 0, mgy = 0;
        for (int j = 0; j < y.cols; ++j) {
          mg += gr(i, j);
          mgy += gr(i, j) * y(i, j);
        }
        mg /= y.cols;
        mgy /= y.cols;
        for (int j = 0; j < y.cols; ++j)
          da(i, j) = inv_std(i, 0) * (gr(i, j) - mg - y(i, j) * mgy);
      }
      g.accum(a, da);
    };
  return id;
}

Graph::Id Graph::l2_normalize_rows(Id a) {
  const Tensor& A = val(a);
  Tensor out(A.rows, A.cols);
  Tensor norms(A.rows, 1);
  for (int i = 0; i < A.rows; ++i) {
    double s = 0;
    for (int j = 0; j < A.cols; ++j) s += A(i, j) * A(i, j);
    double n = std::sqrt(s);
    if (!(n > 1e-12))
      throw std::invalid_argument("l2_normalize_rows: zero-norm row");
    norms(i, 0) = n;
    for (int j = 0; j < A.cols; ++j) out(i, j) = A(i, j) / n;
  }
  bool needs = needs_grad(a);
  Id id = push(std::move(out), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, norms = std::move(norms), id](Graph& g) {
      const Tensor& y = g.nodes_[id].val;
      const Tensor& gr = g.nodes_[id].grad;
      Tensor da(y.rows, y.cols);
      for (int i = 0; i < y.rows; ++i) {
        double dot = 0;
        for (int j = 0; j < y.cols; ++j) dot += gr(i, j) * y(i, j);
        for (int j = 0; j < y.cols; ++j)
          da(i, j) = (gr(i, j) - y(i, j) * dot) / norms(i, 0);
      }
      g.accum(a, da);
    };
  return id;
}

// ---------------------------------------------------------------- reductions

Graph::Id Graph::sum_all(Id a) {
  const Tensor& A = val(a);
  double s = 0;
  for (double x : A.v) s += x;
  bool needs = needs_grad(a);
  Id id = push(Tensor::full(1, 1, s), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, id](Graph& g) {
      double gr = g.nodes_[id].grad(0, 0);
      Tensor da = Tensor::full(g.val(a).rows, g.val(a).cols, gr);
      g.accum(a, da);
    };
  return id;
}

Graph::Id Graph::mean_all(Id a) {
  const Tensor& A = val(a);
  if (A.v.empty()) throw std::invalid_argument("mean_all: empty tensor");
  double s = 0;
  for (double x : A.v) s += x;
  double n = static_cast<double>(A.v.size());
  bool needs = needs_grad(a);
  Id id = push(Tensor::full(1, 1, s / n), needs, nullptr);
  if (needs)
    nodes_[id].bw = [a, n, id](Graph& g) {
      double gr = g.nodes_[id].grad(0, 0) / n;
      Tensor da = Tensor::full(g.val(a).rows, g.val(a).cols, gr);
      g.accum(a, da);
    };
  return id;
}

}  // namespace ovl::ad
