// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wildground/geometry.hpp"
#include "wildground/gradcheck.hpp"
#include "wildground/ops.hpp"

using namespace wg;

namespace {
Box3D random_box(Rng& rng) {
  Box3D b;
  b.x = rng.uniform(-3, 3);
  b.y = rng.uniform(-3, 3);
  b.z = rng.uniform(-1, 1);
  b.l = rng.uniform(0.4, 2.5);
  b.w = rng.uniform(0.4, 2.5);
  b.h = rng.uniform(0.4, 2.5);
  b.theta = rng.uniform(-3.14159265358979, 3.14159265358979);
  return b;
}

Box3D near_box(const Box3D& a, Rng& rng) {
  Box3D b = random_box(rng);
  b.x = a.x + rng.uniform(-1.5, 1.5);
  b.y = a.y + rng.uniform(-1.5, 1.5);
  b.z = a.z + rng.uniform(-0.8, 0.8);
  return b;
}
}  // namespace

TEST_CASE("bev corners of unit box") {
  Box3D b;
  BevPolygon p = box_corners_bev(b);
  REQUIRE(p.pts.size() == 4);
  for (const auto& pt : p.pts) {
    CHECK(std::fabs(std::fabs(pt[0]) - 0.5) < 1e-12);
    CHECK(std::fabs(std::fabs(pt[1]) - 0.5) < 1e-12);
  }
  CHECK(p.area() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("quarter turn swaps footprint extents") {
  Box3D b;
  b.l = 2.0;
  b.w = 1.0;
  b.theta = 1.5707963267948966;
  BevPolygon p = box_corners_bev(b);
  double max_x = 0, max_y = 0;
  for (const auto& pt : p.pts) {
    max_x = std::max(max_x, std::fabs(pt[0]));
    max_y = std::max(max_y, std::fabs(pt[1]));
  }
  CHECK(max_x == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(max_y == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(p.area() == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("polygon area equals l*w for random boxes") {
  Rng rng(31);
  for (int i = 0; i < 100; ++i) {
    Box3D b = random_box(rng);
    CHECK(box_corners_bev(b).area() == doctest::Approx(b.l * b.w).epsilon(1e-9));
  }
}

TEST_CASE("rotated iou hand cases") {
  Box3D a;  // unit cube at origin
  CHECK(rotated_iou_3d(a, a) == 1.0);

  Box3D b = a;
  b.x = 0.5;
  // intersection 0.5, union 1.5
  CHECK(rotated_iou_3d(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));

  Box3D c = a;
  c.x = 5.0;
  CHECK(rotated_iou_3d(a, c) == 0.0);
  Box3D d = a;
  d.z = 3.0;  // vertically disjoint
  CHECK(rotated_iou_3d(a, d) == 0.0);
}

TEST_CASE("rotated iou symmetry is exact") {
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    Box3D a = random_box(rng);
    Box3D b = near_box(a, rng);
    CHECK(rotated_iou_3d(a, b) == rotated_iou_3d(b, a));
  }
}

TEST_CASE("rotated iou translation and yaw invariance") {
  Rng rng(23);
  for (int i = 0; i < 50; ++i) {
    Box3D a = random_box(rng);
    Box3D b = near_box(a, rng);
    const double base = rotated_iou_3d(a, b);

    const double tx = rng.uniform(-20, 20), ty = rng.uniform(-20, 20), tz = rng.uniform(-5, 5);
    Box3D at = a, bt = b;
    at.x += tx;
    at.y += ty;
    at.z += tz;
    bt.x += tx;
    bt.y += ty;
    bt.z += tz;
    CHECK(rotated_iou_3d(at, bt) == doctest::Approx(base).epsilon(1e-12));

    // common yaw about the origin
    const double phi = rng.uniform(-3.0, 3.0);
    const double c = std::cos(phi), s = std::sin(phi);
    auto rot = [&](const Box3D& in) {
      Box3D o = in;
      o.x = in.x * c - in.y * s;
      o.y = in.x * s + in.y * c;
      o.theta = in.theta + phi;
      return o;
    };
    CHECK(rotated_iou_3d(rot(a), rot(b)) == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("rotated iou matches monte carlo oracle") {
  Rng rng(2027);
  Rng mc_rng(555);
  for (int i = 0; i < 60; ++i) {
    Box3D a = random_box(rng);
    Box3D b = (i % 4 == 0) ? random_box(rng) : near_box(a, rng);
    const double exact = rotated_iou_3d(a, b);
    const double mc = monte_carlo_iou(a, b, 1000000, mc_rng);
    CHECK(std::fabs(exact - mc) < 1e-2);
  }
}

TEST_CASE("aabb giou properties") {
  Box3D a;
  CHECK(aabb_giou(a, a) == doctest::Approx(1.0).epsilon(1e-12));

  // growing separation drives giou toward -1
  Box3D far = a;
  far.x = 50.0;
  CHECK(aabb_giou(a, far) < -0.9);
  Box3D farther = a;
  farther.x = 500.0;
  CHECK(aabb_giou(a, farther) < aabb_giou(a, far));
  CHECK(aabb_giou(a, farther) > -1.0);

  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    Box3D p = random_box(rng);
    Box3D q = near_box(p, rng);
    const double giou = aabb_giou(p, q);
    const double iou = aabb_iou(p, q);
    CHECK(giou <= iou + 1e-12);
    CHECK(giou <= 1.0);
    CHECK(giou > -1.0);
    // tensor version agrees with the scalar one
    Tensor center = Tensor::from({1, 3}, {p.x, p.y, p.z});
    Tensor size = Tensor::from({1, 3}, {p.l, p.w, p.h});
    CHECK(aabb_giou_t(center, size, q).item() == doctest::Approx(giou).epsilon(1e-12));
  }
}

TEST_CASE("points in box inclusive boundary") {
  Box3D b;
  b.x = 0.5;
  b.y = -1.25;
  b.z = 2.0;
  b.l = 2;
  b.w = 2;
  b.h = 2;
  CHECK(point_in_box(b.x, b.y, b.z, b));
  // axis-aligned corner exactly on the boundary: inclusive
  CHECK(point_in_box(b.x + 1.0, b.y + 1.0, b.z + 1.0, b));
  CHECK(point_in_box(b.x - 1.0, b.y - 1.0, b.z - 1.0, b));
  CHECK_FALSE(point_in_box(b.x + 1.0 + 1e-12, b.y, b.z, b));

  // rotated box: just-inside/just-outside corners classify correctly
  Box3D r = b;
  r.theta = 0.7;
  const double c = std::cos(r.theta), s = std::sin(r.theta);
  const double lx = 0.999, ly = 0.999;
  CHECK(point_in_box(r.x + lx * c - ly * s, r.y + lx * s + ly * c, r.z, r));
  CHECK_FALSE(point_in_box(r.x + 1.001 * (c - s), r.y + 1.001 * (s + c), r.z, r));
}

TEST_CASE("points in box count tracks volume fraction") {
  Rng rng(8);
  Box3D b;
  b.x = 0.3;
  b.y = -0.2;
  b.l = 1.2;
  b.w = 0.8;
  b.h = 1.5;
  b.theta = 0.5;
  const double cube = 4.0;  // sample cube [-2,2]^3
  const int n = 400000;
  std::vector<std::array<float, 3>> pts(n);
  for (auto& p : pts)
    p = {static_cast<float>(rng.uniform(-2, 2)), static_cast<float>(rng.uniform(-2, 2)),
         static_cast<float>(rng.uniform(-2, 2))};
  auto mask = points_in_box(pts, b);
  int count = 0;
  for (bool m : mask) count += m;
  const double est = static_cast<double>(count) / n * cube * cube * cube;
  CHECK(std::fabs(est - b.volume()) / b.volume() < 0.02);
}

TEST_CASE("geometry gradient cases pass") {
  auto reports = run_gradcheck("geometry", 20, 1e-4, 7);
  CHECK(reports.size() >= 1);
  for (const auto& r : reports) {
    INFO(r.name, " err ", r.max_rel_err);
    CHECK(r.pass);
  }
}
