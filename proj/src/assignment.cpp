#include "ovl/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ovl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest-augmenting-path Kuhn-Munkres for rows <= cols (1-indexed
// internals). Returns col_of_row; cost entries must be finite.
std::vector<int> km_solve(const Tensor& cost) {
  int n = cost.rows, m = cost.cols;
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> col_of_row(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j]) col_of_row[p[j] - 1] = j - 1;
  return col_of_row;
}

double assignment_cost(const Tensor& cost, const std::vector<int>& col_of_row) {
  double s = 0;
  for (int i = 0; i < static_cast<int>(col_of_row.size()); ++i) s += cost(i, col_of_row[i]);
  return s;
}

double optimal_cost(const Tensor& cost) {
  if (cost.rows == 0) return 0.0;
  return assignment_cost(cost, km_solve(cost));
}

}  // namespace

Assignment hungarian_solve(const Tensor& cost) {
  if (cost.rows > cost.cols)
    throw std::invalid_argument("hungarian_solve: rows > cols (pad or transpose first)");
  if (!cost.all_finite())
    throw std::invalid_argument("hungarian_solve: non-finite cost entry");
  Assignment out;
  if (cost.rows == 0) return out;

  double opt = optimal_cost(cost);
  double tol = 1e-9 * (1.0 + std::abs(opt));

  // Lexicographic refinement: fix rows in order, giving each the lowest
  // column that still admits an optimal completion.
  int R = cost.rows, C = cost.cols;
  std::vector<int> fixed(R, -1);
  std::vector<char> used_col(C, 0);
  double fixed_cost = 0.0;
  for (int i = 0; i < R; ++i) {
    for (int j = 0; j < C; ++j) {
      if (used_col[j]) continue;
      // Subproblem over rows i+1..R-1 and the remaining columns.
      std::vector<int> rem_cols;
      for (int c = 0; c < C; ++c)
        if (!used_col[c] && c != j) rem_cols.push_back(c);
      Tensor sub(R - i - 1, static_cast<int>(rem_cols.size()));
      for (int r = i + 1; r < R; ++r)
        for (size_t c = 0; c < rem_cols.size(); ++c)
          sub(r - i - 1, static_cast<int>(c)) = cost(r, rem_cols[c]);
      double total = fixed_cost + cost(i, j) + optimal_cost(sub);
      if (total <= opt + tol) {
        fixed[i] = j;
        used_col[j] = 1;
        fixed_cost += cost(i, j);
        break;
      }
    }
  }
  out.col_of_row = fixed;
  out.total_cost = assignment_cost(cost, fixed);
  return out;
}

Tensor box_match_cost(const std::vector<Box>& gt, const std::vector<Box>& pred) {
  if (gt.empty()) return Tensor(0, static_cast<int>(pred.size()));
  if (pred.empty()) throw std::invalid_argument("box_match_cost: empty prediction set");
  Tensor cost(static_cast<int>(gt.size()), static_cast<int>(pred.size()));
  for (int i = 0; i < cost.rows; ++i)
    for (int j = 0; j < cost.cols; ++j) cost(i, j) = box_pair_loss(gt[i], pred[j]);
  return cost;
}

Tensor noun_align_cost(const Tensor& nouns, const Tensor& names) {
  if (nouns.cols != names.cols)
    throw std::invalid_argument("noun_align_cost: embedding dim mismatch");
  int n = std::min(nouns.rows, names.rows);  // keep first K nouns
  int k = names.rows;
  auto row_norm = [](const Tensor& t, int i) {
    double s = 0;
    for (int j = 0; j < t.cols; ++j) s += t(i, j) * t(i, j);
    return std::sqrt(s);
  };
  std::vector<double> nn(n), kn(k);
  for (int i = 0; i < n; ++i) {
    nn[i] = row_norm(nouns, i);
    if (!(nn[i] > 1e-12)) throw std::invalid_argument("noun_align_cost: zero-norm noun");
  }
  for (int j = 0; j < k; ++j) {
    kn[j] = row_norm(names, j);
    if (!(kn[j] > 1e-12)) throw std::invalid_argument("noun_align_cost: zero-norm name");
  }
  Tensor cost(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) {
      double dot = 0;
      for (int c = 0; c < nouns.cols; ++c) dot += nouns(i, c) * names(j, c);
      cost(i, j) = -dot / (nn[i] * kn[j]);
    }
  return cost;
}

}  // namespace ovl
