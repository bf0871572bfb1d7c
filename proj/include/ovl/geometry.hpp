#pragma once

#include <stdexcept>

namespace ovl {

// Normalized box in center format: all fields are fractions of frame size.
// Canonical storage for every box in the project; the corner view is derived.
struct Box {
  double cx = 0, cy = 0, w = 0, h = 0;

  bool valid() const {
    return cx >= 0 && cx <= 1 && cy >= 0 && cy <= 1 && w >= 0 && w <= 1 &&
           h >= 0 && h <= 1;
  }
  double area() const { return w * h; }
};

struct CornerBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
};

// Corner view, clamped to [0,1].
CornerBox to_corners(const Box& b);

// Inverse of to_corners for unclamped boxes; requires x1 <= x2, y1 <= y2.
Box from_corners(const CornerBox& c);

double iou(const Box& a, const Box& b);

// Generalized IoU in [-1, 1]. Both boxes zero-area -> 0 by convention;
// zero-area vs positive-area uses the formula with IoU = 0.
double giou(const Box& a, const Box& b);

// (1 - giou) + component L1 in center format. The training box loss and the
// Hungarian matching cost are both this quantity.
double box_pair_loss(const Box& gt, const Box& pred);

// Closed containment: true when pred's center lies inside (or on the edge
// of) gt's corner rectangle.
bool center_inside(const Box& pred, const Box& gt);

inline void check_box(const Box& b, const char* who) {
  if (!b.valid()) throw std::invalid_argument(std::string(who) + ": invalid box");
}

}  // namespace ovl
