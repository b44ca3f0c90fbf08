// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "lumentrack/airway_graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include <Eigen/Geometry>

#include "lumentrack/errors.hpp"

namespace lumentrack {
namespace {

Vec3 frame_x_axis(const Vec3& y, const Vec3& lmb_end, const Vec3& rmb_end) {
  const Vec3 left_to_right = rmb_end - lmb_end;
  Vec3 x = lmb_end.cross(rmb_end).cross(y);
  if (x.norm() < 1e-9 * std::max(1.0, lmb_end.norm() * rmb_end.norm())) {
    x = left_to_right - left_to_right.dot(y) * y;
  }
  if (x.norm() < 1e-12) {
    throw MalformedTree("main bronchus ends do not define a lateral axis");
  }
  x.normalize();
  if (x.dot(left_to_right) < 0.0) x = -x;
  return x;
}

}  // namespace

AirwayGraph AirwayGraph::load_and_normalize(const RawTree& tree) {
  if (tree.branches.empty()) throw MalformedTree("airway tree has no branches");

  std::map<Label, Branch> branches;
  std::vector<Label> input_order;
  for (const auto& raw : tree.branches) {
    if (raw.label.empty()) throw MalformedTree("branch with empty label");
    if (branches.count(raw.label)) throw MalformedTree("duplicate branch label '" + raw.label + "'");
    if (!raw.start.allFinite() || !raw.end.allFinite()) {
      throw MalformedTree("branch '" + raw.label + "' has non-finite coordinates");
    }
    if ((raw.end - raw.start).norm() <= 1e-9) {
      throw MalformedTree("branch '" + raw.label + "' has zero length");
    }
    Branch b;
    b.label = raw.label;
    b.start = raw.start;
    b.end = raw.end;
    b.parent = raw.parent;
    branches.emplace(raw.label, std::move(b));
    input_order.push_back(raw.label);
  }

  std::vector<Label> roots;
  for (const auto& label : input_order) {
    Branch& b = branches.at(label);
    if (!b.parent) {
      roots.push_back(label);
      continue;
    }
    if (*b.parent == label) throw MalformedTree("branch '" + label + "' is its own parent");
    auto it = branches.find(*b.parent);
    if (it == branches.end()) {
      throw MalformedTree("branch '" + label + "' has unknown parent '" + *b.parent + "'");
    }
    it->second.children.push_back(label);
  }
  if (roots.size() != 1) {
    throw MalformedTree("airway tree must have exactly one root, found " +
                        std::to_string(roots.size()));
  }

  AirwayGraph g;
  g.root_ = roots.front();
  if (!tree.trachea.empty() && tree.trachea != g.root_) {
    throw MalformedTree("designated trachea '" + tree.trachea + "' is not the root");
  }
  for (const Label* mb : {&tree.lmb, &tree.rmb}) {
    auto it = branches.find(*mb);
    if (mb->empty() || it == branches.end()) {
      throw MalformedTree("main bronchus designation '" + *mb + "' missing");
    }
    if (!it->second.parent || *it->second.parent != g.root_) {
      throw MalformedTree("main bronchus '" + *mb + "' is not a child of the trachea");
    }
  }
  if (tree.lmb == tree.rmb) throw MalformedTree("left and right main bronchus are the same branch");
  g.lmb_ = tree.lmb;
  g.rmb_ = tree.rmb;

  // Breadth-first walk assigns generations; anything unreached sits on a cycle.
  std::deque<Label> queue{g.root_};
  branches.at(g.root_).generation = 0;
  while (!queue.empty()) {
    const Label label = queue.front();
    queue.pop_front();
    g.order_.push_back(label);
    const Branch& b = branches.at(label);
    for (const auto& child : b.children) {
      branches.at(child).generation = b.generation + 1;
      queue.push_back(child);
    }
  }
  if (g.order_.size() != branches.size()) {
    throw MalformedTree("airway tree contains a cycle or unreachable branches");
  }

  const Branch& trachea = branches.at(g.root_);
  const Vec3 origin = trachea.end;
  const Vec3 y = trachea.direction();
  const Vec3 x = frame_x_axis(y, branches.at(g.lmb_).end - origin, branches.at(g.rmb_).end - origin);
  const Vec3 z = x.cross(y);
  Eigen::Matrix3d to_standard;
  to_standard.row(0) = x.transpose();
  to_standard.row(1) = y.transpose();
  to_standard.row(2) = z.transpose();
  for (auto& [label, b] : branches) {
    b.start = to_standard * (b.start - origin);
    b.end = to_standard * (b.end - origin);
  }

  g.branches_ = std::move(branches);
  return g;
}

const Branch& AirwayGraph::branch(const Label& label) const {
  auto it = branches_.find(label);
  if (it == branches_.end()) throw UnknownLabel("unknown branch label '" + label + "'");
  return it->second;
}

int AirwayGraph::max_generation() const {
  int best = 0;
  for (const auto& [_, b] : branches_) best = std::max(best, b.generation);
  return best;
}

RawTree AirwayGraph::to_raw() const {
  RawTree raw;
  raw.trachea = root_;
  raw.lmb = lmb_;
  raw.rmb = rmb_;
  for (const auto& label : order_) {
    const Branch& b = branches_.at(label);
    raw.branches.push_back({b.label, b.start, b.end, b.parent});
  }
  return raw;
}

Label ancestor(const AirwayGraph& g, const Label& l, int k) {
  const Branch* b = &g.branch(l);
  if (k < 0 || k > b->generation) {
    throw AboveRoot("ancestor " + std::to_string(k) + " of '" + l + "' lies above the root");
  }
  for (int i = 0; i < k; ++i) b = &g.branch(*b->parent);
  return b->label;
}

Label ancestor_clamped(const AirwayGraph& g, const Label& l, int k) {
  const Branch& b = g.branch(l);
  return ancestor(g, l, std::clamp(k, 0, b.generation));
}

int generation_distance(const AirwayGraph& g, const Label& a, const Label& b) {
  const Branch* x = &g.branch(a);
  const Branch* y = &g.branch(b);
  int hops = 0;
  while (x->generation > y->generation) { x = &g.branch(*x->parent); ++hops; }
  while (y->generation > x->generation) { y = &g.branch(*y->parent); ++hops; }
  while (x->label != y->label) {
    x = &g.branch(*x->parent);
    y = &g.branch(*y->parent);
    hops += 2;
  }
  return hops;
}

std::vector<ChildWeight> child_visibility_weights(const AirwayGraph& g, const Label& l,
                                                  const GraphParams& params) {
  const Branch& parent = g.branch(l);
  const Vec3 d = parent.direction();
  std::vector<ChildWeight> out;
  out.reserve(parent.children.size());
  for (const auto& child_label : parent.children) {
    const Vec3 c = g.branch(child_label).direction();
    const double cosine = std::clamp(d.dot(c), -1.0, 1.0);
    const double angle = std::acos(cosine);
    const double w = angle > params.visibility_max_angle ? 0.0 : std::max(0.0, cosine);
    out.push_back({child_label, w});
  }
  return out;
}

Projected2DGraph project_children(const AirwayGraph& g, const Label& l, double roll,
                                  const GraphParams& params) {
  const Branch& parent = g.branch(l);
  const Vec3 d = parent.direction();

  Vec3 e1 = Vec3::UnitX() - Vec3::UnitX().dot(d) * d;
  if (e1.norm() < 1e-6) e1 = Vec3::UnitZ() - Vec3::UnitZ().dot(d) * d;
  e1.normalize();
  const Vec3 e2 = d.cross(e1);

  Projected2DGraph out;
  out.parent_label = l;
  const auto weights = child_visibility_weights(g, l, params);
  for (std::size_t i = 0; i < parent.children.size(); ++i) {
    const Branch& child = g.branch(parent.children[i]);
    const double reach = std::min(params.truncation_mm, child.length());
    const Vec3 tip = child.start + reach * child.direction();
    const Vec3 v = tip - parent.end;
    const Vec3 in_plane = v - v.dot(d) * d;

    ProjectedChild entry;
    entry.child = child.label;
    entry.weight = weights[i].weight;
    if (in_plane.norm() <= 1e-6 * std::max(1.0, v.norm())) {
      entry.degenerate = true;
      entry.dir = Vec2(1.0, 0.0);
    } else {
      const Vec2 planar(in_plane.dot(e1), in_plane.dot(e2));
      entry.dir = rotate(planar.normalized(), -roll);
      entry.dir.normalize();
    }
    out.entries.push_back(std::move(entry));
  }
  return out;
}

}  // namespace lumentrack
