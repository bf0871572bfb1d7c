#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace oracle {

namespace {

void search(const ovl::Tensor& cost, int row, std::vector<char>& used, double acc,
            std::vector<int>& cur, double& best, std::vector<int>& best_map) {
  if (row == cost.rows) {
    if (acc < best) {
      best = acc;
      best_map = cur;
    }
    return;
  }
  for (int j = 0; j < cost.cols; ++j) {
    if (used[j]) continue;
    used[j] = 1;
    cur[row] = j;
    search(cost, row + 1, used, acc + cost(row, j), cur, best, best_map);
    used[j] = 0;
  }
}

}  // namespace

double brute_force_assignment_cost(const ovl::Tensor& cost) {
  if (cost.rows == 0) return 0.0;
  std::vector<int> m = brute_force_assignment(cost);
  double s = 0;
  for (size_t i = 0; i < m.size(); ++i) s += cost(static_cast<int>(i), m[i]);
  return s;
}

std::vector<int> brute_force_assignment(const ovl::Tensor& cost) {
  if (cost.rows > cost.cols) throw std::invalid_argument("oracle: rows > cols");
  std::vector<char> used(cost.cols, 0);
  std::vector<int> cur(cost.rows, -1), best_map;
  double best = std::numeric_limits<double>::infinity();
  if (cost.rows == 0) return {};
  search(cost, 0, used, 0.0, cur, best, best_map);
  return best_map;
}

double scalar_giou(double acx, double acy, double aw, double ah,
                   double bcx, double bcy, double bw, double bh) {
  double ax1 = acx - aw / 2, ay1 = acy - ah / 2, ax2 = acx + aw / 2, ay2 = acy + ah / 2;
  double bx1 = bcx - bw / 2, by1 = bcy - bh / 2, bx2 = bcx + bw / 2, by2 = bcy + bh / 2;
  double area_a = aw * ah, area_b = bw * bh;
  if (area_a == 0.0 && area_b == 0.0) return 0.0;
  double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
  double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
  double inter = iw * ih;
  double uni = area_a + area_b - inter;
  double hull = (std::max(ax2, bx2) - std::min(ax1, bx1)) *
                (std::max(ay2, by2) - std::min(ay1, by1));
  double i = uni > 0.0 ? inter / uni : 0.0;
  return hull > 0.0 ? i - (hull - uni) / hull : i;
}

double scalar_box_pair_loss(double gcx, double gcy, double gw, double gh,
                            double pcx, double pcy, double pw, double ph) {
  double l1 = std::abs(gcx - pcx) + std::abs(gcy - pcy) + std::abs(gw - pw) +
              std::abs(gh - ph);
  return (1.0 - scalar_giou(gcx, gcy, gw, gh, pcx, pcy, pw, ph)) + l1;
}

double scalar_infonce(const ovl::Tensor& anchors, const ovl::Tensor& candidates,
                      const std::vector<int>& positive, double tau) {
  auto cosine = [](const ovl::Tensor& a, int i, const ovl::Tensor& b, int j) {
    double dot = 0, na = 0, nb = 0;
    for (int c = 0; c < a.cols; ++c) {
      dot += a(i, c) * b(j, c);
      na += a(i, c) * a(i, c);
      nb += b(j, c) * b(j, c);
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
  };
  double loss = 0;
  for (int m = 0; m < anchors.rows; ++m) {
    double num = std::exp(cosine(anchors, m, candidates, positive[m]) / tau);
    double den = 0;
    for (int j = 0; j < candidates.rows; ++j)
      den += std::exp(cosine(anchors, m, candidates, j) / tau);
    loss += -std::log(num / den);
  }
  return loss / anchors.rows;
}

double scalar_average_precision(const std::vector<double>& scores,
                                const std::vector<int>& relevant) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  double hits = 0, ap = 0;
  int n_pos = 0;
  for (int r : relevant) n_pos += r ? 1 : 0;
  if (n_pos == 0) throw std::invalid_argument("oracle AP: no positives");
  for (size_t k = 0; k < order.size(); ++k) {
    if (relevant[order[k]]) {
      hits += 1;
      ap += hits / static_cast<double>(k + 1);
    }
  }
  return ap / n_pos;
}

double scalar_ndcg(const std::vector<double>& scores, const std::vector<double>& rel) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  double dcg = 0;
  for (size_t k = 0; k < order.size(); ++k)
    dcg += rel[order[k]] / std::log2(static_cast<double>(k) + 2.0);
  std::vector<double> ideal = rel;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0;
  for (size_t k = 0; k < ideal.size(); ++k)
    idcg += ideal[k] / std::log2(static_cast<double>(k) + 2.0);
  return idcg > 0 ? dcg / idcg : 0.0;
}

std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double step) {
  std::vector<double> g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    double keep = x[i];
    x[i] = keep + step;
    double hi = f(x);
    x[i] = keep - step;
    double lo = f(x);
    x[i] = keep;
    g[i] = (hi - lo) / (2 * step);
  }
  return g;
}

}  // namespace oracle
