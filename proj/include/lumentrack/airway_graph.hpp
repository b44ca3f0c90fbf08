// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lumentrack/geometry.hpp"

namespace lumentrack {

using Label = std::string;

struct Branch {
  Label label;
  Vec3 start = Vec3::Zero();
  Vec3 end = Vec3::Zero();
  std::optional<Label> parent;
  std::vector<Label> children;
  int generation = 0;

  Vec3 direction() const { return (end - start).normalized(); }
  double length() const { return (end - start).norm(); }
};

/// Centerline tree as read from disk, before validation and normalization.
struct RawBranch {
  Label label;
  Vec3 start = Vec3::Zero();
  Vec3 end = Vec3::Zero();
  std::optional<Label> parent;
};

struct RawTree {
  std::vector<RawBranch> branches;
  Label trachea;
  Label lmb;
  Label rmb;
};

/// Tunables for visibility weighting and tangent-plane projection.
struct GraphParams {
  double visibility_max_angle = 70.0 * kPi / 180.0;
  double truncation_mm = 10.0;
};

/// Labeled branch tree in the standard frame: origin at the trachea end,
/// +y along the trachea, +x from the left toward the right main bronchus,
/// z = x × y. Immutable once built.
class AirwayGraph {
 public:
  /// Validates and rigidly transforms `tree` into the standard frame.
  /// Throws MalformedTree on duplicate labels, dangling parents, cycles,
  /// several roots, zero-length branches, or missing main bronchi.
  static AirwayGraph load_and_normalize(const RawTree& tree);

  const Branch& branch(const Label& label) const;  // throws UnknownLabel
  bool contains(const Label& label) const { return branches_.count(label) != 0; }
  const Label& root() const { return root_; }
  const Label& lmb() const { return lmb_; }
  const Label& rmb() const { return rmb_; }
  std::size_t size() const { return branches_.size(); }

  /// Labels in breadth-first order from the root; children in stored order.
  const std::vector<Label>& labels() const { return order_; }
  const std::map<Label, Branch>& branches() const { return branches_; }

  int generation(const Label& label) const { return branch(label).generation; }
  int max_generation() const;

  RawTree to_raw() const;

 private:
  std::map<Label, Branch> branches_;
  std::vector<Label> order_;
  Label root_;
  Label lmb_;
  Label rmb_;
};

/// k-th ancestor; ancestor(g, l, 0) == l. Throws AboveRoot when k exceeds the
/// generation of l, UnknownLabel for a missing label.
Label ancestor(const AirwayGraph& g, const Label& l, int k);

/// Same as ancestor() but stops at the root instead of throwing.
Label ancestor_clamped(const AirwayGraph& g, const Label& l, int k);

/// Number of tree edges on the path between a and b.
int generation_distance(const AirwayGraph& g, const Label& a, const Label& b);

struct ChildWeight {
  Label child;
  double weight = 0.0;
};

/// max(0, cos θ) per child, θ being the angle between the parent and child
/// directions; zero past the visibility cutoff. Leaves give an empty list.
std::vector<ChildWeight> child_visibility_weights(const AirwayGraph& g, const Label& l,
                                                  const GraphParams& params = {});

struct ProjectedChild {
  Label child;
  Vec2 dir = Vec2(1.0, 0.0);  // unit, tangent-plane coordinates (y up)
  double weight = 0.0;
  bool degenerate = false;    // child collinear with the parent
};

struct Projected2DGraph {
  Label parent_label;
  std::vector<ProjectedChild> entries;
};

/// Children of `l` projected onto the plane orthogonal to l at its end point,
/// expressed in the plane basis (e1 = projected +x, falling back to +z;
/// e2 = d × e1) and rotated by -roll.
Projected2DGraph project_children(const AirwayGraph& g, const Label& l, double roll,
                                  const GraphParams& params = {});

/// Tangent-plane coordinates are y-up; image coordinates are y-down.
inline Vec2 to_image(const Vec2& plane_dir) { return {plane_dir.x(), -plane_dir.y()}; }

}  // namespace lumentrack
