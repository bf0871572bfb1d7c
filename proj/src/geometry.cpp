#include "ovl/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace ovl {

namespace {
double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }
}  // namespace

CornerBox to_corners(const Box& b) {
  return {clamp01(b.cx - b.w / 2), clamp01(b.cy - b.h / 2),
          clamp01(b.cx + b.w / 2), clamp01(b.cy + b.h / 2)};
}

Box from_corners(const CornerBox& c) {
  if (c.x2 < c.x1 || c.y2 < c.y1)
    throw std::invalid_argument("from_corners: inverted corners");
  return {(c.x1 + c.x2) / 2, (c.y1 + c.y2) / 2, c.x2 - c.x1, c.y2 - c.y1};
}

double iou(const Box& a, const Box& b) {
  CornerBox ca = to_corners(a), cb = to_corners(b);
  double iw = std::max(0.0, std::min(ca.x2, cb.x2) - std::max(ca.x1, cb.x1));
  double ih = std::max(0.0, std::min(ca.y2, cb.y2) - std::max(ca.y1, cb.y1));
  double inter = iw * ih;
  double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

double giou(const Box& a, const Box& b) {
  double area_a = a.area(), area_b = b.area();
  if (area_a == 0.0 && area_b == 0.0) return 0.0;
  CornerBox ca = to_corners(a), cb = to_corners(b);
  double iw = std::max(0.0, std::min(ca.x2, cb.x2) - std::max(ca.x1, cb.x1));
  double ih = std::max(0.0, std::min(ca.y2, cb.y2) - std::max(ca.y1, cb.y1));
  double inter = iw * ih;
  double uni = area_a + area_b - inter;
  double hull_w = std::max(ca.x2, cb.x2) - std::min(ca.x1, cb.x1);
  double hull_h = std::max(ca.y2, cb.y2) - std::min(ca.y1, cb.y1);
  double hull = hull_w * hull_h;
  double i = uni > 0.0 ? inter / uni : 0.0;
  if (hull <= 0.0) return i;
  return i - (hull - uni) / hull;
}

double box_pair_loss(const Box& gt, const Box& pred) {
  double l1 = std::abs(gt.cx - pred.cx) + std::abs(gt.cy - pred.cy) +
              std::abs(gt.w - pred.w) + std::abs(gt.h - pred.h);
  return (1.0 - giou(gt, pred)) + l1;
}

bool center_inside(const Box& pred, const Box& gt) {
  CornerBox c = to_corners(gt);
  return pred.cx >= c.x1 && pred.cx <= c.x2 && pred.cy >= c.y1 && pred.cy <= c.y2;
}

}  // namespace ovl
