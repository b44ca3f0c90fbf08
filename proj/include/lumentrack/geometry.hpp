// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

namespace lumentrack {

// Image coordinates are raster convention: x to the right, y down, pixels.
// Airway coordinates are millimeters in the standard airway frame.
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = 3.14159265358979323846;

/// Axis-aligned box stored as center and size. Width and height are positive.
struct BoundingBox {
  double x_c = 0.0;
  double y_c = 0.0;
  double w = 1.0;
  double h = 1.0;

  double area() const { return w * h; }
  double left() const { return x_c - 0.5 * w; }
  double right() const { return x_c + 0.5 * w; }
  double top() const { return y_c - 0.5 * h; }
  double bottom() const { return y_c + 0.5 * h; }
  Vec2 center() const { return {x_c, y_c}; }

  bool valid() const { return w > 0.0 && h > 0.0; }
  bool contains(const Vec2& p) const {
    return p.x() >= left() && p.x() <= right() && p.y() >= top() && p.y() <= bottom();
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

double intersection_area(const BoundingBox& a, const BoundingBox& b);

/// Intersection over union, in [0, 1].
double iou(const BoundingBox& a, const BoundingBox& b);

/// Fraction of `inner` covered by `outer`: area(inner ∩ outer) / area(inner).
double containment(const BoundingBox& inner, const BoundingBox& outer);

/// Angle carrying the direction of u onto the direction of v, in (-pi, pi].
/// Positive when the 2D cross product u × v is positive. Its magnitude equals
/// acos(u·v / |u||v|). Throws DegenerateVector when either norm is below 1e-9.
double signed_angle(const Vec2& u, const Vec2& v);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double radians);

Vec2 rotate(const Vec2& v, double radians);

}  // namespace lumentrack
