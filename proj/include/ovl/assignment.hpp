#pragma once

#include <vector>

#include "ovl/geometry.hpp"
#include "ovl/tensor.hpp"

namespace ovl {

// Result of minimum-cost bipartite assignment over a rows x cols cost
// matrix with rows <= cols: col_of_row[i] is the column matched to row i,
// injective over rows.
struct Assignment {
  std::vector<int> col_of_row;
  double total_cost = 0.0;
};

// Exact Kuhn-Munkres solve. Requires rows <= cols and finite entries.
// Among all minimum-cost assignments, returns the lexicographically smallest
// one (row 0 gets the lowest feasible column, then row 1, ...).
Assignment hungarian_solve(const Tensor& cost);

// cost[i][j] = box_pair_loss(gt[i], pred[j]). Empty gt -> 0 x pred matrix.
Tensor box_match_cost(const std::vector<Box>& gt, const std::vector<Box>& pred);

// cost[i][j] = -cos(nouns[i], names[j]); both given as row matrices. Nouns
// beyond names.rows are truncated (first rows kept). Rejects zero-norm rows.
Tensor noun_align_cost(const Tensor& nouns, const Tensor& names);

}  // namespace ovl
