#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "ovl/graph.hpp"

using ovl::Rng;
using ovl::Tensor;
using ovl::ad::Graph;

namespace {

// FD-checks d(scalar_fn)/d(leaf) for a builder that creates one leaf from x
// and reduces to a scalar node.
void check_op_gradient(
    const std::function<Graph::Id(Graph&, Graph::Id)>& body, int rows, int cols,
    uint64_t seed, double tol = 1e-7, double lo = -2.0, double hi = 2.0) {
  Rng rng(seed);
  std::vector<double> x(static_cast<size_t>(rows) * cols);
  for (double& v : x) v = rng.uniform(lo, hi);

  auto eval = [&](const std::vector<double>& xs) {
    Graph g;
    Tensor t(rows, cols);
    t.v = xs;
    Graph::Id leaf = g.leaf(t, true);
    return g.val(body(g, leaf))(0, 0);
  };

  Graph g;
  Tensor t(rows, cols);
  t.v = x;
  Graph::Id leaf = g.leaf(t, true);
  Graph::Id root = body(g, leaf);
  g.backward(root);
  const Tensor& analytic = g.grad(leaf);

  std::vector<double> fd = oracle::finite_difference_gradient(eval, x, 1e-5);
  for (size_t i = 0; i < x.size(); ++i) {
    double denom = std::max({1.0, std::abs(analytic.v[i]), std::abs(fd[i])});
    CHECK(std::abs(analytic.v[i] - fd[i]) / denom < tol);
  }
}

Tensor random_tensor(int r, int c, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Tensor t(r, c);
  for (double& v : t.v) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("eager values: basic ops") {
  Graph g;
  auto a = g.constant(Tensor::from({{1, 2}, {3, 4}}));
  auto b = g.constant(Tensor::from({{10, 20}, {30, 40}}));
  CHECK(g.val(g.add(a, b))(1, 1) == 44);
  CHECK(g.val(g.sub(b, a))(0, 0) == 9);
  CHECK(g.val(g.mul(a, b))(0, 1) == 40);
  CHECK(g.val(g.matmul(a, b))(0, 0) == doctest::Approx(70));
  CHECK(g.val(g.matmul_nt(a, b))(0, 0) == doctest::Approx(50));
  CHECK(g.val(g.transpose(a))(0, 1) == 3);
  CHECK(g.val(g.sum_all(a))(0, 0) == 10);
  CHECK(g.val(g.mean_all(a))(0, 0) == 2.5);
}

TEST_CASE("softmax rows sum to one and match direct computation") {
  Graph g;
  Rng rng(7);
  auto x = g.constant(random_tensor(5, 9, rng));
  auto p = g.softmax_rows(x);
  for (int i = 0; i < 5; ++i) {
    double s = 0;
    for (int j = 0; j < 9; ++j) s += g.val(p)(i, j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  // logsumexp consistency: log softmax = x - lse
  auto lse = g.logsumexp_rows(x);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 9; ++j)
      CHECK(std::log(g.val(p)(i, j)) ==
            doctest::Approx(g.val(x)(i, j) - g.val(lse)(i, 0)).epsilon(1e-10));
}

TEST_CASE("gradients: elementwise and scalar ops") {
  check_op_gradient([](Graph& g, Graph::Id x) { return g.sum_all(g.gelu(x)); }, 3, 4, 1);
  check_op_gradient([](Graph& g, Graph::Id x) { return g.sum_all(g.sigmoid(x)); }, 3, 4, 2);
  check_op_gradient([](Graph& g, Graph::Id x) { return g.sum_all(g.exp(x)); }, 3, 4, 3);
  check_op_gradient([](Graph& g, Graph::Id x) { return g.sum_all(g.mul(x, x)); }, 3, 4, 4);
  check_op_gradient(
      [](Graph& g, Graph::Id x) { return g.sum_all(g.scale(g.add_scalar(x, 3.0), -1.7)); },
      2, 5, 5);
  check_op_gradient([](Graph& g, Graph::Id x) { return g.sum_all(g.log(x)); }, 3, 4, 6,
                    1e-7, 0.5, 2.0);
  check_op_gradient([](Graph& g, Graph::Id x) { return g.mean_all(g.abs(x)); }, 3, 4, 7);
  check_op_gradient(
      [](Graph& g, Graph::Id x) {
        auto c = g.constant(Tensor::full(3, 4, 0.3));
        return g.sum_all(g.div(x, g.add_scalar(g.mul(x, x), 1.0)));
      },
      3, 4, 8);
}

TEST_CASE("gradients: min/max against shifted copies") {
  check_op_gradient(
      [](Graph& g, Graph::Id x) {
        auto c = g.constant(Tensor::full(3, 4, 0.123));
        return g.sum_all(g.minimum(x, c));
      },
      3, 4, 9);
  check_op_gradient(
      [](Graph& g, Graph::Id x) {
        auto c = g.constant(Tensor::full(3, 4, -0.4));
        return g.sum_all(g.maximum(x, c));
      },
      3, 4, 10);
}

TEST_CASE("gradients: matmul family") {
  check_op_gradient(
      [](Graph& g, Graph::Id x) {
        Rng r2(77);
        auto w = g.constant(random_tensor(4, 3, r2));
        return g.sum_all(g.matmul(x, w));
      },
      3, 4, 11);
  check_op_gradient(
      [](Graph& g, Graph::Id x) {
        Rng r2(78);
        auto w = g.constant(random_tensor(5, 4, r2));
        return g.sum_all(g.gelu(g.matmul_nt(x, w)));
      },
      3, 4, 12);
  check_op_gradient(
      [](Graph& g, Graph::Id x) { return g.sum_all(g.mul(g.transpose(x), g.transpose(x))); },
      3, 4, 13);
  // both operands trainable via same leaf
  check_op_gradient([](Graph& g, Graph::Id x) { return g.sum_all(g.matmul_nt(x, x)); }, 3,
                    4, 14);
}

TEST_CASE("gradients: shape ops") {
  check_op_gradient(
      [](Graph& g, Graph::Id x) {
        auto a = g.slice_rows(x, 1, 2);
        auto b = g.slice_cols(x, 0, 3);
        return g.add(g.sum_all(g.mul(a, a)), g.sum_all(g.gelu(b)));
      },
      4, 5, 15);
  check_op_gradient(
      [](Graph& g, Graph::Id x) {
        auto c = g.concat_rows({x, x});
        auto d = g.concat_cols({x, x, x});
        return g.add(g.sum_all(g.sigmoid(c)), g.mean_all(g.mul(d, d)));
      },
      3, 4, 16);
  check_op_gradient(
      [](Graph& g, Graph::Id x) {
        auto gr = g.gather_rows(x, {2, 0, 2, 1});  // duplicate row index
        return g.sum_all(g.mul(gr, gr));
      },
      3, 4, 17);
  check_op_gradient(
      [](Graph& g, Graph::Id x) {
        auto s = g.select(x, {{0, 0}, {2, 3}, {0, 0}});  // duplicate element
        return g.sum_all(g.exp(s));
      },
      3, 4, 18);
}

TEST_CASE("gradients: rowwise ops") {
  check_op_gradient(
      [](Graph& g, Graph::Id x) {
        Rng r2(79);
        auto w = g.constant(random_tensor(4, 1, r2));
        return g.sum_all(g.mul(g.softmax_rows(x), g.matmul(w, g.constant(Tensor::full(1, 5, 1.0)))));
      },
      4, 5, 19);
  check_op_gradient(
      [](Graph& g, Graph::Id x) { return g.sum_all(g.mul(g.logsumexp_rows(x), g.logsumexp_rows(x))); },
      4, 5, 20);
  check_op_gradient(
      [](Graph& g, Graph::Id x) {
        auto y = g.layer_norm_rows(x, 1e-5);
        return g.sum_all(g.gelu(y));
      },
      4, 6, 21);
  check_op_gradient(
      [](Graph& g, Graph::Id x) {
        auto y = g.l2_normalize_rows(x);
        Rng r2(80);
        auto w = g.constant(random_tensor(4, 6, r2));
        return g.sum_all(g.mul(y, w));
      },
      4, 6, 22, 1e-7, 0.5, 2.0);
  check_op_gradient(
      [](Graph& g, Graph::Id x) {
        Rng r2(81);
        auto v = g.constant(random_tensor(1, 6, r2));
        return g.sum_all(g.sigmoid(g.add_rowvec(g.mul_rowvec(x, v), v)));
      },
      4, 6, 23);
}

TEST_CASE("gradients flow through rowvec parameters") {
  // v used as the broadcast vector; checks the reduction side of the op.
  check_op_gradient(
      [](Graph& g, Graph::Id v) {
        Rng r2(82);
        auto a = g.constant(random_tensor(5, 3, r2));
        return g.sum_all(g.gelu(g.add_rowvec(g.mul_rowvec(a, v), v)));
      },
      1, 3, 24);
}

TEST_CASE("mul_const applies constant weights") {
  check_op_gradient(
      [](Graph& g, Graph::Id x) {
        Tensor w = Tensor::from({{0.5, -1.0, 2.0, 0.0}});
        return g.sum_all(g.mul_const(x, w));
      },
      1, 4, 25);
}

TEST_CASE("backward requires scalar root and grad leaves") {
  Graph g;
  auto x = g.leaf(Tensor::full(2, 2, 1.0), true);
  CHECK_THROWS_AS(g.backward(x), std::invalid_argument);
  auto c = g.constant(Tensor::full(1, 1, 2.0));
  CHECK_THROWS_AS(g.backward(c), std::invalid_argument);
}

TEST_CASE("no-grad subgraphs stay grad-free") {
  Graph g;
  auto a = g.constant(Tensor::full(2, 2, 1.0));
  auto b = g.mul(a, a);
  CHECK_FALSE(g.needs_grad(b));
  auto x = g.leaf(Tensor::full(2, 2, 3.0), true);
  auto y = g.sum_all(g.mul(x, b));
  g.backward(y);
  CHECK(g.grad(x)(0, 0) == doctest::Approx(1.0));
  CHECK_FALSE(g.has_grad(a));
}

TEST_CASE("l2_normalize rejects zero rows") {
  Graph g;
  auto z = g.constant(Tensor::zeros(2, 3));
  CHECK_THROWS_AS(g.l2_normalize_rows(z), std::invalid_argument);
}

TEST_CASE("repeated backward resets gradients") {
  Graph g;
  auto x = g.leaf(Tensor::full(1, 1, 2.0), true);
  auto y = g.mul(x, x);
  g.backward(y);
  double g1 = g.grad(x)(0, 0);
  g.backward(y);
  CHECK(g.grad(x)(0, 0) == doctest::Approx(g1));
}
