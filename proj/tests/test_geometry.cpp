#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "ovl/geometry.hpp"
#include "ovl/tensor.hpp"

using ovl::Box;
using ovl::CornerBox;
using ovl::Rng;

namespace {

Box random_box(Rng& rng) {
  // Sample corner form inside the frame, convert to center form.
  double x1 = rng.uniform(), x2 = rng.uniform();
  double y1 = rng.uniform(), y2 = rng.uniform();
  if (x1 > x2) std::swap(x1, x2);
  if (y1 > y2) std::swap(y1, y2);
  return ovl::from_corners({x1, y1, x2, y2});
}

}  // namespace

TEST_CASE("to_corners basics") {
  CornerBox full = ovl::to_corners({0.5, 0.5, 1, 1});
  CHECK(full.x1 == 0);
  CHECK(full.y1 == 0);
  CHECK(full.x2 == 1);
  CHECK(full.y2 == 1);

  CornerBox pt = ovl::to_corners({0.5, 0.5, 0, 0});
  CHECK(pt.x1 == 0.5);
  CHECK(pt.y1 == 0.5);
  CHECK(pt.x2 == 0.5);
  CHECK(pt.y2 == 0.5);

  CornerBox quad = ovl::to_corners({0.25, 0.25, 0.5, 0.5});
  CHECK(quad.x1 == 0);
  CHECK(quad.y1 == 0);
  CHECK(quad.x2 == 0.5);
  CHECK(quad.y2 == 0.5);
}

TEST_CASE("corner round trip is exact to an ulp") {
  Rng rng(42);
  for (int trial = 0; trial < 2000; ++trial) {
    Box b = random_box(rng);
    CornerBox c = ovl::to_corners(b);
    Box r = ovl::from_corners(c);
    CHECK(std::abs(r.cx - b.cx) <= std::abs(b.cx) * 1e-15 + 1e-300);
    CHECK(std::abs(r.cy - b.cy) <= std::abs(b.cy) * 1e-15 + 1e-300);
    CHECK(std::abs(r.w - b.w) <= std::abs(b.w) * 1e-15 + 1e-15);
    CHECK(std::abs(r.h - b.h) <= std::abs(b.h) * 1e-15 + 1e-15);
  }
}

TEST_CASE("giou identical boxes is one") {
  Box b{0.4, 0.6, 0.2, 0.3};
  CHECK(ovl::giou(b, b) == doctest::Approx(1.0));
}

TEST_CASE("giou disjoint quadrant case is -0.5") {
  Box a = ovl::from_corners({0, 0, 0.5, 0.5});
  Box b = ovl::from_corners({0.5, 0.5, 1, 1});
  CHECK(ovl::giou(a, b) == doctest::Approx(-0.5));
}

TEST_CASE("giou zero-area conventions") {
  Box zz{0.3, 0.3, 0, 0};
  CHECK(ovl::giou(zz, zz) == 0.0);
  Box pos{0.5, 0.5, 0.4, 0.4};
  double v = ovl::giou(zz, pos);
  CHECK(std::isfinite(v));
  CHECK(v <= 1e-12);  // exactly 0 when the point is inside, up to rounding
  CHECK(v >= -1.0);
}

TEST_CASE("giou random pairs: symmetry, range, oracle agreement") {
  Rng rng(7);
  for (int trial = 0; trial < 10000; ++trial) {
    Box a = random_box(rng), b = random_box(rng);
    double ab = ovl::giou(a, b);
    double ba = ovl::giou(b, a);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
    CHECK(ab >= -1.0);
    CHECK(ab <= 1.0);
    double ref = oracle::scalar_giou(a.cx, a.cy, a.w, a.h, b.cx, b.cy, b.w, b.h);
    CHECK(ab == doctest::Approx(ref).epsilon(1e-12));
  }
}

TEST_CASE("giou equals iou when one box contains the other") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    Box outer = random_box(rng);
    if (outer.w < 1e-3 || outer.h < 1e-3) continue;
    Box inner{outer.cx, outer.cy, outer.w * rng.uniform(), outer.h * rng.uniform()};
    CHECK(ovl::giou(outer, inner) == doctest::Approx(ovl::iou(outer, inner)).epsilon(1e-12));
  }
}

TEST_CASE("box_pair_loss zero at equality and nonnegative") {
  Rng rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    Box a = random_box(rng), b = random_box(rng);
    CHECK(ovl::box_pair_loss(a, a) == doctest::Approx(0.0));
    CHECK(ovl::box_pair_loss(a, b) >= 0.0);
    CHECK(ovl::box_pair_loss(a, b) == doctest::Approx(ovl::box_pair_loss(b, a)).epsilon(1e-12));
  }
}

TEST_CASE("box_pair_loss derived quadrant value 2.5") {
  Box gt = ovl::from_corners({0, 0, 0.5, 0.5});
  Box pred = ovl::from_corners({0.5, 0.5, 1, 1});
  // giou = -0.5 -> 1.5; center L1 = |0.25-0.75|*2 = 1.0
  CHECK(ovl::box_pair_loss(gt, pred) == doctest::Approx(2.5));
}

TEST_CASE("center_inside conventions") {
  Box gt{0.5, 0.5, 0.2, 0.2};
  CHECK(ovl::center_inside({0.5, 0.5, 0.9, 0.9}, gt));          // same center
  CHECK(ovl::center_inside({0.4, 0.5, 0.1, 0.1}, gt));          // on left edge
  CHECK(ovl::center_inside({0.6, 0.6, 0.0, 0.0}, gt));          // on corner
  CHECK_FALSE(ovl::center_inside({0.9, 0.9, 0.5, 0.5}, gt));    // outside
}

TEST_CASE("center_inside ignores pred extent") {
  Rng rng(17);
  Box gt = random_box(rng);
  for (int trial = 0; trial < 200; ++trial) {
    double cx = rng.uniform(), cy = rng.uniform();
    bool a = ovl::center_inside({cx, cy, rng.uniform(), rng.uniform()}, gt);
    bool b = ovl::center_inside({cx, cy, rng.uniform(), rng.uniform()}, gt);
    CHECK(a == b);
  }
}
