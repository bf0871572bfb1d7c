#pragma once

#include <set>
#include <vector>

namespace ovl {

// Contrastive bookkeeping for one training batch. Indices refer to the
// original batch B; when hard negatives are enabled the doubled batch is
// ordered [B samples, then their hard counterparts in the same order].
struct BatchStructure {
  std::vector<std::set<int>> nouns;  // noun group ids per sample
  std::vector<std::set<int>> verbs;
  std::vector<std::vector<int>> positives;  // P_m, always contains m
  bool has_hard_negatives = false;

  int size() const { return static_cast<int>(positives.size()); }
};

// P_m = samples sharing at least one noun and one verb with m, computed
// over the original batch only. Samples with empty sets fall back to
// singleton positive sets.
BatchStructure build_positive_sets(const std::vector<std::set<int>>& nouns,
                                   const std::vector<std::set<int>>& verbs);

}  // namespace ovl
