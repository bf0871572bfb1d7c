#pragma once

// Independent reference routines used only by tests. These deliberately do
// not call the library implementations they are used to check.

#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ovl/nn.hpp"
#include "ovl/tensor.hpp"

namespace oracle {

// Minimum total cost over all injective row->column mappings, by exhaustive
// search. rows <= cols <= ~8.
double brute_force_assignment_cost(const ovl::Tensor& cost);

// Same search but returns one argmin mapping (lexicographically smallest).
std::vector<int> brute_force_assignment(const ovl::Tensor& cost);

// GIoU of two center-format boxes, written out directly.
double scalar_giou(double acx, double acy, double aw, double ah,
                   double bcx, double bcy, double bw, double bh);

double scalar_box_pair_loss(double gcx, double gcy, double gw, double gh,
                            double pcx, double pcy, double pw, double ph);

// Standard InfoNCE with one positive per anchor: mean over anchors m of
// -log softmax(sim(m, pos_m)) over all candidates. Rows of v/t are
// embeddings; cosine similarities divided by tau.
double scalar_infonce(const ovl::Tensor& anchors, const ovl::Tensor& candidates,
                      const std::vector<int>& positive, double tau);

// Average precision for one query: candidates ranked by descending score
// (stable in index), binary relevance.
double scalar_average_precision(const std::vector<double>& scores,
                                const std::vector<int>& relevant);

// nDCG for one query with graded relevance.
double scalar_ndcg(const std::vector<double>& scores, const std::vector<double>& rel);

// Central finite differences of a scalar function at x.
std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double step);

}  // namespace oracle
