#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "ovl/assignment.hpp"

using ovl::Assignment;
using ovl::Box;
using ovl::Rng;
using ovl::Tensor;

namespace {

Tensor random_cost(int r, int c, Rng& rng, double lo = -5.0, double hi = 5.0) {
  Tensor t(r, c);
  for (double& v : t.v) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("1x1 solve") {
  Assignment a = ovl::hungarian_solve(Tensor::from({{3.5}}));
  CHECK(a.col_of_row == std::vector<int>{0});
  CHECK(a.total_cost == doctest::Approx(3.5));
}

TEST_CASE("diagonal-zero matrix picks identity") {
  Tensor cost = Tensor::full(3, 3, 100.0);
  for (int i = 0; i < 3; ++i) cost(i, i) = 0.0;
  Assignment a = ovl::hungarian_solve(cost);
  CHECK(a.col_of_row == std::vector<int>{0, 1, 2});
  CHECK(a.total_cost == doctest::Approx(0.0));
}

TEST_CASE("empty matrix yields empty assignment") {
  Assignment a = ovl::hungarian_solve(Tensor(0, 4));
  CHECK(a.col_of_row.empty());
  CHECK(a.total_cost == 0.0);
}

TEST_CASE("invalid inputs rejected") {
  CHECK_THROWS_AS(ovl::hungarian_solve(Tensor(3, 2)), std::invalid_argument);
  Tensor bad = Tensor::full(2, 2, 1.0);
  bad(0, 1) = std::nan("");
  CHECK_THROWS_AS(ovl::hungarian_solve(bad), std::invalid_argument);
  bad(0, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(ovl::hungarian_solve(bad), std::invalid_argument);
}

TEST_CASE("optimality vs brute force, all sizes to 7x7") {
  Rng rng(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    int r = 1 + rng.uniform_int(7);
    int c = r + rng.uniform_int(8 - r);
    Tensor cost = random_cost(r, c, rng);
    Assignment a = ovl::hungarian_solve(cost);
    double ref = oracle::brute_force_assignment_cost(cost);
    CHECK(a.total_cost == doctest::Approx(ref).epsilon(1e-9));
    // injectivity
    std::set<int> cols(a.col_of_row.begin(), a.col_of_row.end());
    CHECK(cols.size() == a.col_of_row.size());
  }
}

TEST_CASE("row-constant shift moves total by the constant, stays optimal") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    int r = 2 + rng.uniform_int(4);
    int c = r + rng.uniform_int(3);
    Tensor cost = random_cost(r, c, rng);
    double base = ovl::hungarian_solve(cost).total_cost;
    double shift = rng.uniform(-3.0, 3.0);
    int row = rng.uniform_int(r);
    Tensor shifted = cost;
    for (int j = 0; j < c; ++j) shifted(row, j) += shift;
    double after = ovl::hungarian_solve(shifted).total_cost;
    CHECK(after == doctest::Approx(base + shift).epsilon(1e-9));
    CHECK(after == doctest::Approx(oracle::brute_force_assignment_cost(shifted)).epsilon(1e-9));
  }
}

TEST_CASE("ties resolve to the lexicographically smallest assignment") {
  Assignment a = ovl::hungarian_solve(Tensor::zeros(3, 5));
  CHECK(a.col_of_row == std::vector<int>{0, 1, 2});

  // Two optimal assignments: {0->0,1->1} and {0->1,1->0}, both cost 2.
  Tensor cost = Tensor::from({{1, 1}, {1, 1}});
  Assignment b = ovl::hungarian_solve(cost);
  CHECK(b.col_of_row == std::vector<int>{0, 1});
}

TEST_CASE("box match cost: loss-consistent entries") {
  Box g1{0.3, 0.3, 0.2, 0.2}, g2{0.7, 0.7, 0.2, 0.2};
  Box p1{0.31, 0.3, 0.2, 0.2}, p2{0.7, 0.72, 0.2, 0.2};
  Tensor cost = ovl::box_match_cost({g1, g2}, {p1, p2});
  CHECK(cost.rows == 2);
  CHECK(cost.cols == 2);
  CHECK(cost(0, 0) == doctest::Approx(ovl::box_pair_loss(g1, p1)));
  CHECK(cost(1, 0) == doctest::Approx(ovl::box_pair_loss(g2, p1)));
}

TEST_CASE("box match: single identical pair gives zero cost") {
  Box b{0.5, 0.5, 0.3, 0.3};
  Tensor cost = ovl::box_match_cost({b}, {b});
  CHECK(cost.rows == 1);
  CHECK(cost(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("box match: exact copies recovered at their columns") {
  Box g1{0.2, 0.2, 0.1, 0.1}, g2{0.8, 0.8, 0.15, 0.15};
  std::vector<Box> preds = {{0.5, 0.5, 0.5, 0.5}, g2, {0.9, 0.1, 0.2, 0.2}, g1};
  Assignment a = ovl::hungarian_solve(ovl::box_match_cost({g1, g2}, preds));
  CHECK(a.col_of_row == std::vector<int>{3, 1});
  CHECK(a.total_cost == doctest::Approx(0.0));
}

TEST_CASE("box match: empty gt allowed, empty pred rejected") {
  Tensor cost = ovl::box_match_cost({}, {{0.5, 0.5, 0.1, 0.1}});
  CHECK(cost.rows == 0);
  CHECK(cost.cols == 1);
  CHECK_THROWS_AS(ovl::box_match_cost({{0.5, 0.5, 0.1, 0.1}}, {}), std::invalid_argument);
}

TEST_CASE("box match against permutation oracle on random instances") {
  Rng rng(555);
  auto rb = [&]() {
    double x1 = rng.uniform(), x2 = rng.uniform(), y1 = rng.uniform(), y2 = rng.uniform();
    if (x1 > x2) std::swap(x1, x2);
    if (y1 > y2) std::swap(y1, y2);
    return ovl::from_corners({x1, y1, x2, y2});
  };
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Box> gt(3), pred(6);
    for (auto& b : gt) b = rb();
    for (auto& b : pred) b = rb();
    Tensor cost = ovl::box_match_cost(gt, pred);
    Assignment a = ovl::hungarian_solve(cost);
    CHECK(a.total_cost == doctest::Approx(oracle::brute_force_assignment_cost(cost)).epsilon(1e-9));
  }
}

TEST_CASE("noun align cost: orthonormal identity") {
  Tensor e = Tensor::from({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  Tensor cost = ovl::noun_align_cost(e, e);
  Assignment a = ovl::hungarian_solve(cost);
  CHECK(a.col_of_row == std::vector<int>{0, 1, 2});
  CHECK(a.total_cost == doctest::Approx(-3.0));
}

TEST_CASE("noun align cost: positive rescaling invariance") {
  Rng rng(31);
  Tensor nouns = random_cost(3, 8, rng), names = random_cost(5, 8, rng);
  Tensor base = ovl::noun_align_cost(nouns, names);
  Tensor nouns2 = nouns, names2 = names;
  for (int j = 0; j < 8; ++j) nouns2(1, j) *= 17.0;
  for (int j = 0; j < 8; ++j) names2(3, j) *= 0.002;
  Tensor scaled = ovl::noun_align_cost(nouns2, names2);
  for (size_t i = 0; i < base.v.size(); ++i)
    CHECK(base.v[i] == doctest::Approx(scaled.v[i]).epsilon(1e-9));
}

TEST_CASE("noun align cost: truncates surplus nouns, keeps first K") {
  Rng rng(32);
  Tensor nouns = random_cost(6, 4, rng), names = random_cost(2, 4, rng);
  Tensor cost = ovl::noun_align_cost(nouns, names);
  CHECK(cost.rows == 2);
  CHECK(cost.cols == 2);
  Tensor head = ovl::noun_align_cost(Tensor(nouns), names);
  // entries correspond to the first two noun rows
  Tensor first2(2, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j) first2(i, j) = nouns(i, j);
  Tensor expect = ovl::noun_align_cost(first2, names);
  for (size_t i = 0; i < cost.v.size(); ++i)
    CHECK(cost.v[i] == doctest::Approx(expect.v[i]));
}

TEST_CASE("noun align cost rejects zero embeddings") {
  Tensor nouns = Tensor::zeros(1, 4);
  Tensor names = Tensor::full(2, 4, 0.5);
  CHECK_THROWS_AS(ovl::noun_align_cost(nouns, names), std::invalid_argument);
  CHECK_THROWS_AS(ovl::noun_align_cost(names, Tensor::zeros(2, 4)), std::invalid_argument);
}

TEST_CASE("noun align on random unit vectors matches brute-force max similarity") {
  Rng rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor nouns(3, 12), names(12, 12);
    for (double& v : nouns.v) v = rng.normal();
    for (double& v : names.v) v = rng.normal();
    Tensor cost = ovl::noun_align_cost(nouns, names);
    Assignment a = ovl::hungarian_solve(cost);
    CHECK(a.total_cost == doctest::Approx(oracle::brute_force_assignment_cost(cost)).epsilon(1e-9));
  }
}
