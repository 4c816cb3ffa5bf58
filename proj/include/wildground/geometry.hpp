// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "wildground/rng.hpp"
#include "wildground/tensor.hpp"

namespace wg {

// Oriented 3D box: center (x,y,z), extents (l,w,h), yaw about +z.
// Roll/pitch are fixed to zero (7-parameter box).
struct Box3D {
  double x = 0, y = 0, z = 0;
  double l = 1, w = 1, h = 1;
  double theta = 0;

  double volume() const { return l * w * h; }
};

// Normalize yaw into [-pi, pi).
double normalize_yaw(double theta);

// Convex counter-clockwise polygon in the ground plane.
struct BevPolygon {
  std::vector<std::array<double, 2>> pts;
  double area() const;  // shoelace; >= 0 for CCW
};

// 4 CCW corners of the yaw-rotated l-by-w footprint centered at (x, y).
BevPolygon box_corners_bev(const Box3D& b);

// Convex polygon intersection (Sutherland-Hodgman clipping of `subject`
// against convex `clip`), epsilon 1e-9 for on-edge classification.
BevPolygon clip_convex(const BevPolygon& subject, const BevPolygon& clip);

// Exact rotated 3D IoU: BEV polygon intersection times vertical overlap.
// Symmetric by construction (arguments are ordered canonically first).
double rotated_iou_3d(const Box3D& a, const Box3D& b);

// Axis-aligned GIoU over (x,y,z,l,w,h) with theta ignored. Scalar version.
double aabb_giou(const Box3D& a, const Box3D& b);

// Differentiable axis-aligned GIoU built from tensor ops. `center` and
// `size` are 1x3 tensors; gt is a plain box. Returns a scalar tensor.
Tensor aabb_giou_t(const Tensor& center, const Tensor& size, const Box3D& gt);

// Axis-aligned 3D IoU (diagnostic metric).
double aabb_iou(const Box3D& a, const Box3D& b);

// Inclusive point-in-box test in the box's yaw-aligned frame.
bool point_in_box(double px, double py, double pz, const Box3D& b);
std::vector<bool> points_in_box(const std::vector<std::array<float, 3>>& pts, const Box3D& b);

// Monte-Carlo IoU oracle (tests only): uniform samples over the union's
// axis-aligned bounding volume.
double monte_carlo_iou(const Box3D& a, const Box3D& b, std::int64_t samples, Rng& rng);

}  // namespace wg
