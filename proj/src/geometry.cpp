// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "lumentrack/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "lumentrack/errors.hpp"

namespace lumentrack {

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  if (a == b) return 1.0;
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double containment(const BoundingBox& inner, const BoundingBox& outer) {
  const double inter = intersection_area(inner, outer);
  if (inter <= 0.0) return 0.0;
  return std::clamp(inter / inner.area(), 0.0, 1.0);
}

double signed_angle(const Vec2& u, const Vec2& v) {
  if (u.norm() < 1e-9 || v.norm() < 1e-9) {
    throw DegenerateVector("signed_angle: vector norm below 1e-9");
  }
  const double cross = u.x() * v.y() - u.y() * v.x();
  const double dot = u.dot(v);
  // atan2 returns -pi for (-0, negative); fold onto +pi.
  return wrap_angle(std::atan2(cross, dot));
}

double wrap_angle(double radians) {
  double r = std::remainder(radians, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

Vec2 rotate(const Vec2& v, double radians) {
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

}  // namespace lumentrack
