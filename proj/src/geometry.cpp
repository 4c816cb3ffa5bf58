// Copyright (c) 2026 wildground contributors
// SPDX-License-Identifier: Apache-2.0

#include "wildground/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "wildground/ops.hpp"

namespace wg {

namespace {
constexpr double kEps = 1e-9;  // on-edge classification for clipping

double cross2(double ox, double oy, double ax, double ay, double bx, double by) {
  return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox);
}
}  // namespace

double normalize_yaw(double theta) {
  const double two_pi = 6.283185307179586476925286766559;
  double t = std::fmod(theta + 3.14159265358979323846, two_pi);
  if (t < 0) t += two_pi;
  return t - 3.14159265358979323846;
}

double BevPolygon::area() const {
  if (pts.size() < 3) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    const auto& q = pts[(i + 1) % pts.size()];
    s += p[0] * q[1] - q[0] * p[1];
  }
  return 0.5 * s;
}

BevPolygon box_corners_bev(const Box3D& b) {
  const double c = std::cos(b.theta), s = std::sin(b.theta);
  const double hl = 0.5 * b.l, hw = 0.5 * b.w;
  // CCW in the local frame, then rotated (rotation preserves orientation).
  const double lx[4] = {hl, -hl, -hl, hl};
  const double ly[4] = {hw, hw, -hw, -hw};
  BevPolygon poly;
  poly.pts.reserve(4);
  for (int i = 0; i < 4; ++i)
    poly.pts.push_back({b.x + lx[i] * c - ly[i] * s, b.y + lx[i] * s + ly[i] * c});
  return poly;
}

BevPolygon clip_convex(const BevPolygon& subject, const BevPolygon& clip) {
  std::vector<std::array<double, 2>> poly = subject.pts;
  const std::size_t nc = clip.pts.size();
  for (std::size_t e = 0; e < nc && !poly.empty(); ++e) {
    const auto& a = clip.pts[e];
    const auto& b = clip.pts[(e + 1) % nc];
    std::vector<std::array<double, 2>> out;
    out.reserve(poly.size() + 1);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const auto& p = poly[i];
      const auto& q = poly[(i + 1) % poly.size()];
      const double sp = cross2(a[0], a[1], b[0], b[1], p[0], p[1]);
      const double sq = cross2(a[0], a[1], b[0], b[1], q[0], q[1]);
      const bool p_in = sp >= -kEps;
      const bool q_in = sq >= -kEps;
      if (p_in != q_in) {
        const double t = sp / (sp - sq);
        out.push_back({p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])});
      }
      if (q_in) out.push_back(q);
    }
    poly = std::move(out);
  }
  BevPolygon result;
  result.pts = std::move(poly);
  return result;
}

namespace {

double rotated_iou_3d_ordered(const Box3D& a, const Box3D& b) {
  // Work relative to the pair midpoint for precision far from the origin.
  const double mx = 0.5 * (a.x + b.x), my = 0.5 * (a.y + b.y);
  Box3D as = a, bs = b;
  as.x -= mx;
  as.y -= my;
  bs.x -= mx;
  bs.y -= my;
  const double zlo = std::max(as.z - 0.5 * as.h, bs.z - 0.5 * bs.h);
  const double zhi = std::min(as.z + 0.5 * as.h, bs.z + 0.5 * bs.h);
  const double dz = zhi - zlo;
  if (dz <= 0.0) return 0.0;
  const BevPolygon inter = clip_convex(box_corners_bev(as), box_corners_bev(bs));
  const double bev = inter.area();
  if (bev <= 0.0) return 0.0;
  const double vol = bev * dz;
  const double uni = as.volume() + bs.volume() - vol;
  return vol / uni;
}

bool box_less(const Box3D& a, const Box3D& b) {
  if (a.x != b.x) return a.x < b.x;
  if (a.y != b.y) return a.y < b.y;
  if (a.z != b.z) return a.z < b.z;
  if (a.l != b.l) return a.l < b.l;
  if (a.w != b.w) return a.w < b.w;
  if (a.h != b.h) return a.h < b.h;
  return a.theta < b.theta;
}

}  // namespace

double rotated_iou_3d(const Box3D& a, const Box3D& b) {
  // Canonical argument order makes iou(a,b) == iou(b,a) bit-exact.
  return box_less(b, a) ? rotated_iou_3d_ordered(b, a) : rotated_iou_3d_ordered(a, b);
}

double aabb_giou(const Box3D& a, const Box3D& b) {
  double inter = 1.0, enclose = 1.0;
  const double alo[3] = {a.x - 0.5 * a.l, a.y - 0.5 * a.w, a.z - 0.5 * a.h};
  const double ahi[3] = {a.x + 0.5 * a.l, a.y + 0.5 * a.w, a.z + 0.5 * a.h};
  const double blo[3] = {b.x - 0.5 * b.l, b.y - 0.5 * b.w, b.z - 0.5 * b.h};
  const double bhi[3] = {b.x + 0.5 * b.l, b.y + 0.5 * b.w, b.z + 0.5 * b.h};
  for (int d = 0; d < 3; ++d) {
    inter *= std::max(0.0, std::min(ahi[d], bhi[d]) - std::max(alo[d], blo[d]));
    enclose *= std::max(ahi[d], bhi[d]) - std::min(alo[d], blo[d]);
  }
  const double uni = a.volume() + b.volume() - inter;
  return inter / uni - (enclose - uni) / enclose;
}

double aabb_iou(const Box3D& a, const Box3D& b) {
  double inter = 1.0;
  const double alo[3] = {a.x - 0.5 * a.l, a.y - 0.5 * a.w, a.z - 0.5 * a.h};
  const double ahi[3] = {a.x + 0.5 * a.l, a.y + 0.5 * a.w, a.z + 0.5 * a.h};
  const double blo[3] = {b.x - 0.5 * b.l, b.y - 0.5 * b.w, b.z - 0.5 * b.h};
  const double bhi[3] = {b.x + 0.5 * b.l, b.y + 0.5 * b.w, b.z + 0.5 * b.h};
  for (int d = 0; d < 3; ++d)
    inter *= std::max(0.0, std::min(ahi[d], bhi[d]) - std::max(alo[d], blo[d]));
  return inter > 0.0 ? inter / (a.volume() + b.volume() - inter) : 0.0;
}

namespace {
Tensor prod3(const Tensor& row) {
  Tensor p = mul(slice_cols(row, 0, 1), slice_cols(row, 1, 2));
  return mul(p, slice_cols(row, 2, 3));
}
}  // namespace

Tensor aabb_giou_t(const Tensor& center, const Tensor& size, const Box3D& gt) {
  if (center.ndim() != 2 || center.rows() != 1 || center.cols() != 3 || size.ndim() != 2 ||
      size.rows() != 1 || size.cols() != 3)
    throw ShapeError("aabb_giou_t: want 1x3 center and size, got " + shape_str(center.shape()) +
                     " and " + shape_str(size.shape()));
  Tensor half = mul_scalar(size, 0.5);
  Tensor lo = sub(center, half);
  Tensor hi = add(center, half);
  Tensor gt_lo = Tensor::from({1, 3}, {gt.x - 0.5 * gt.l, gt.y - 0.5 * gt.w, gt.z - 0.5 * gt.h});
  Tensor gt_hi = Tensor::from({1, 3}, {gt.x + 0.5 * gt.l, gt.y + 0.5 * gt.w, gt.z + 0.5 * gt.h});
  Tensor inter_dims = relu(sub(min_elem(hi, gt_hi), max_elem(lo, gt_lo)));
  Tensor inter = prod3(inter_dims);
  Tensor pred_vol = prod3(size);
  Tensor uni = sub(add_scalar(pred_vol, gt.volume()), inter);
  Tensor enc = prod3(sub(max_elem(hi, gt_hi), min_elem(lo, gt_lo)));
  Tensor reshaped_inter = inter;  // (1x1)
  Tensor iou = div(reshaped_inter, uni);
  Tensor penalty = div(sub(enc, uni), enc);
  return sub(iou, penalty);
}

bool point_in_box(double px, double py, double pz, const Box3D& b) {
  const double c = std::cos(b.theta), s = std::sin(b.theta);
  const double dx = px - b.x, dy = py - b.y, dz = pz - b.z;
  // Rotate into the box frame (inverse yaw).
  const double lx = dx * c + dy * s;
  const double ly = -dx * s + dy * c;
  return std::fabs(lx) <= 0.5 * b.l && std::fabs(ly) <= 0.5 * b.w && std::fabs(dz) <= 0.5 * b.h;
}

std::vector<bool> points_in_box(const std::vector<std::array<float, 3>>& pts, const Box3D& b) {
  std::vector<bool> mask(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    mask[i] = point_in_box(pts[i][0], pts[i][1], pts[i][2], b);
  return mask;
}

double monte_carlo_iou(const Box3D& a, const Box3D& b, std::int64_t samples, Rng& rng) {
  double lo[3] = {1e300, 1e300, 1e300}, hi[3] = {-1e300, -1e300, -1e300};
  for (const Box3D* box : {&a, &b}) {
    const BevPolygon poly = box_corners_bev(*box);
    for (const auto& p : poly.pts) {
      lo[0] = std::min(lo[0], p[0]);
      hi[0] = std::max(hi[0], p[0]);
      lo[1] = std::min(lo[1], p[1]);
      hi[1] = std::max(hi[1], p[1]);
    }
    lo[2] = std::min(lo[2], box->z - 0.5 * box->h);
    hi[2] = std::max(hi[2], box->z + 0.5 * box->h);
  }
  std::int64_t na = 0, nb = 0, nboth = 0;
  for (std::int64_t i = 0; i < samples; ++i) {
    const double px = rng.uniform(lo[0], hi[0]);
    const double py = rng.uniform(lo[1], hi[1]);
    const double pz = rng.uniform(lo[2], hi[2]);
    const bool ia = point_in_box(px, py, pz, a);
    const bool ib = point_in_box(px, py, pz, b);
    na += ia;
    nb += ib;
    nboth += ia && ib;
  }
  const std::int64_t uni = na + nb - nboth;
  return uni > 0 ? static_cast<double>(nboth) / static_cast<double>(uni) : 0.0;
}

}  // namespace wg
