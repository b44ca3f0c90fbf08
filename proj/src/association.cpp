// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "lumentrack/association.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "lumentrack/assignment.hpp"
#include "lumentrack/errors.hpp"

namespace lumentrack {

DetectionSubgraph build_subgraph(std::span<const BoundingBox> boxes,
                                 const AssociationConfig& config) {
  const std::size_t n = boxes.size();
  DetectionSubgraph g;
  g.parent.assign(n, std::nullopt);
  g.children.assign(n, {});
  g.level.assign(n, 0);
  g.pruned.assign(n, 0);

  // Tightest container wins, which drops grandparent edges along a chain.
  for (std::size_t i = 0; i < n; ++i) {
    std::optional<std::size_t> best;
    double best_area = 0.0;
    double best_cover = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || !(boxes[i].area() < boxes[j].area())) continue;
      const double cover = containment(boxes[i], boxes[j]);
      if (cover < config.containment) continue;
      const double area = boxes[j].area();
      if (!best || area < best_area || (area == best_area && cover > best_cover)) {
        best = j;
        best_area = area;
        best_cover = cover;
      }
    }
    g.parent[i] = best;
  }

  // Near-duplicates of their parent are dropped; their children move up.
  for (std::size_t i = 0; i < n; ++i) {
    if (g.parent[i] && iou(boxes[i], boxes[*g.parent[i]]) >= config.redundant_iou) g.pruned[i] = 1;
  }
  const auto original = g.parent;
  for (std::size_t i = 0; i < n; ++i) {
    if (g.pruned[i]) {
      g.parent[i].reset();
      continue;
    }
    while (g.parent[i] && g.pruned[*g.parent[i]]) g.parent[i] = original[*g.parent[i]];
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (g.pruned[i]) continue;
    if (g.parent[i]) {
      g.children[*g.parent[i]].push_back(i);
    } else {
      g.primaries.push_back(i);
    }
  }
  std::deque<std::size_t> queue(g.primaries.begin(), g.primaries.end());
  for (std::size_t p : g.primaries) g.level[p] = 1;
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    for (std::size_t c : g.children[i]) {
      g.level[c] = g.level[i] + 1;
      queue.push_back(c);
    }
  }
  return g;
}

std::optional<CarinaInit> initialize(const DetectionSubgraph& subgraph,
                                     std::span<const BoundingBox> boxes,
                                     const AssociationConfig& config) {
  if (subgraph.primaries.size() != 2) return std::nullopt;
  const std::size_t a = subgraph.primaries[0];
  const std::size_t b = subgraph.primaries[1];
  const Vec2 a_to_b = boxes[b].center() - boxes[a].center();
  if (a_to_b.norm() < 1e-9) return std::nullopt;

  // Hypothesis 1: b is the right main bronchus. Hypothesis 2 is its half-turn.
  const double roll_b_right = signed_angle(Vec2(1.0, 0.0), a_to_b);
  const double roll_a_right = wrap_angle(roll_b_right + kPi);
  const double d1 = std::abs(wrap_angle(roll_b_right - config.init_roll_prior));
  const double d2 = std::abs(wrap_angle(roll_a_right - config.init_roll_prior));
  const bool b_right = d1 < d2 || (d1 == d2 && roll_b_right >= roll_a_right);

  CarinaInit out;
  out.right = b_right ? b : a;
  out.left = b_right ? a : b;
  out.roll = b_right ? roll_b_right : roll_a_right;
  return out;
}

const GalleryRecord* Gallery::find(const Label& branch) const {
  auto it = records_.find(branch);
  return it == records_.end() ? nullptr : &it->second;
}

std::vector<const GalleryRecord*> Gallery::most_recent_with_keyframe(std::size_t count) const {
  std::vector<const GalleryRecord*> out;
  for (const auto& [_, r] : records_) if (r.keyframe) out.push_back(&r);
  std::sort(out.begin(), out.end(), [](const GalleryRecord* x, const GalleryRecord* y) {
    return x->updated_seq > y->updated_seq;
  });
  if (out.size() > count) out.resize(count);
  return out;
}

bool Gallery::update(const Label& location, std::span<const ObservedLumen> lumens, double roll,
                     const std::optional<FrameRef>& keyframe, int frame) {
  int count = 0;
  for (const auto& l : lumens) if (l.label) ++count;

  auto it = records_.find(location);
  const bool fresh = it == records_.end();
  if (!fresh && count <= it->second.lumen_count) return false;

  GalleryRecord& r = fresh ? records_[location] : it->second;
  r.branch = location;
  r.tracklet_ids.clear();
  r.tracklet_centers.clear();
  for (const auto& l : lumens) {
    if (!l.label) continue;
    r.tracklet_ids.insert(l.track_id);
    r.tracklet_centers[l.track_id] = l.box.center();
  }
  r.roll = roll;
  r.lumen_count = count;
  if (keyframe) r.keyframe = keyframe;
  r.updated_seq = ++seq_;
  r.updated_frame = frame;
  return true;
}

bool Gallery::insert_keyframe(const Label& branch, const FrameRef& keyframe, int frame) {
  GalleryRecord& r = records_[branch];
  if (r.keyframe) return false;
  r.branch = branch;
  r.keyframe = keyframe;
  r.updated_seq = ++seq_;
  r.updated_frame = frame;
  return true;
}

std::optional<double> estimate_roll(const Gallery& gallery, std::span<const ObservedLumen> lumens,
                                    const AssociationConfig& config) {
  // Only lumens recorded somewhere can take part.
  std::vector<const ObservedLumen*> known;
  for (const auto& l : lumens) {
    for (const auto& [_, r] : gallery.records()) {
      if (r.tracklet_ids.count(l.track_id)) {
        known.push_back(&l);
        break;
      }
    }
  }
  for (std::size_t i = 0; i < known.size(); ++i) {
    for (std::size_t j = i + 1; j < known.size(); ++j) {
      const int id1 = known[i]->track_id;
      const int id2 = known[j]->track_id;
      const GalleryRecord* shared = nullptr;
      for (const auto& [_, r] : gallery.records()) {
        if (r.tracklet_ids.count(id1) && r.tracklet_ids.count(id2) &&
            (!shared || r.updated_seq > shared->updated_seq)) {
          shared = &r;
        }
      }
      if (!shared) continue;
      const Vec2 recorded = shared->tracklet_centers.at(id1) - shared->tracklet_centers.at(id2);
      const Vec2 current = known[i]->box.center() - known[j]->box.center();
      if (recorded.norm() < config.roll_min_separation_px ||
          current.norm() < config.roll_min_separation_px) {
        continue;
      }
      return wrap_angle(shared->roll + signed_angle(recorded, current));
    }
  }
  return std::nullopt;
}

namespace {

struct Candidate {
  Label label;
  Vec2 dir;  // image coordinates, unit
};

// Hungarian match of nodes (by unit offset direction) against branch
// directions; writes labels only into unlabeled nodes.
void match_directions(const std::vector<std::size_t>& nodes, const std::vector<Vec2>& offsets,
                      const std::vector<Candidate>& candidates, double gate,
                      std::vector<std::optional<Label>>& labels,
                      std::vector<std::size_t>& newly_labeled) {
  if (nodes.empty() || candidates.empty()) return;
  CostMatrix cost(nodes.size(), candidates.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double n = offsets[i].norm();
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      cost(i, j) = n < 1e-9 ? CostMatrix::kGated : 1.0 - (offsets[i] / n).dot(candidates[j].dir);
    }
  }
  const Assignment a = solve(cost, gate);
  for (const auto& [i, j] : a.pairs) {
    if (labels[nodes[i]]) continue;
    labels[nodes[i]] = candidates[j].label;
    newly_labeled.push_back(nodes[i]);
  }
}

}  // namespace

std::vector<std::optional<Label>> propagate_labels(const DetectionSubgraph& subgraph,
                                                   std::span<const ObservedLumen> lumens,
                                                   const AirwayGraph& graph, double roll,
                                                   const GraphParams& params,
                                                   const AssociationConfig& config) {
  const std::size_t n = subgraph.size();
  std::vector<std::optional<Label>> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (subgraph.active(i) && lumens[i].label && graph.contains(*lumens[i].label)) {
      labels[i] = lumens[i].label;
    }
  }

  auto by_age = [&](std::size_t a, std::size_t b) {
    if (lumens[a].start_frame != lumens[b].start_frame) {
      return lumens[a].start_frame < lumens[b].start_frame;
    }
    return lumens[a].track_id < lumens[b].track_id;
  };

  std::deque<std::size_t> work;
  for (std::size_t i = 0; i < n; ++i) if (labels[i]) work.push_back(i);
  std::sort(work.begin(), work.end(), by_age);

  std::vector<char> visited(n, 0);
  while (!work.empty()) {
    const std::size_t b = work.front();
    work.pop_front();
    if (visited[b]) continue;
    visited[b] = 1;
    const Label l = *labels[b];
    const Branch& branch = graph.branch(l);
    const Vec2 cb = lumens[b].box.center();
    std::vector<std::size_t> newly;

    if (subgraph.parent[b] && !labels[*subgraph.parent[b]] && branch.parent) {
      labels[*subgraph.parent[b]] = *branch.parent;
      newly.push_back(*subgraph.parent[b]);
    }

    const auto& kids = subgraph.children[b];
    const bool kid_unlabeled =
        std::any_of(kids.begin(), kids.end(), [&](std::size_t k) { return !labels[k]; });
    if (kid_unlabeled && !branch.children.empty()) {
      std::vector<Candidate> cands;
      for (const auto& e : project_children(graph, l, roll, params).entries) {
        if (e.weight > 0.0 && !e.degenerate) cands.push_back({e.child, to_image(e.dir)});
      }
      std::vector<Vec2> offsets;
      for (std::size_t k : kids) offsets.push_back(lumens[k].box.center() - cb);
      match_directions(kids, offsets, cands, config.graph_match_gate, labels, newly);
    }

    std::vector<std::size_t> sibs;
    if (subgraph.parent[b]) {
      for (std::size_t s : subgraph.children[*subgraph.parent[b]]) if (s != b) sibs.push_back(s);
    } else {
      for (std::size_t s : subgraph.primaries) if (s != b) sibs.push_back(s);
    }
    const bool sib_unlabeled =
        std::any_of(sibs.begin(), sibs.end(), [&](std::size_t s) { return !labels[s]; });
    if (sib_unlabeled && branch.parent) {
      const auto proj = project_children(graph, *branch.parent, roll, params);
      std::optional<Vec2> own;
      for (const auto& e : proj.entries) {
        if (e.child == l && !e.degenerate) own = to_image(e.dir);
      }
      if (own) {
        std::vector<Candidate> cands;
        for (const auto& e : proj.entries) {
          if (e.child == l || e.weight <= 0.0 || e.degenerate) continue;
          const Vec2 rel = to_image(e.dir) - *own;
          if (rel.norm() < 1e-9) continue;
          cands.push_back({e.child, rel.normalized()});
        }
        std::vector<Vec2> offsets;
        for (std::size_t s : sibs) offsets.push_back(lumens[s].box.center() - cb);
        match_directions(sibs, offsets, cands, config.graph_match_gate, labels, newly);
      }
    }

    std::sort(newly.begin(), newly.end(), by_age);
    for (std::size_t k : newly) work.push_back(k);
  }
  return labels;
}

int hierarchy_violations(const DetectionSubgraph& subgraph,
                         std::span<const std::optional<Label>> labels, const AirwayGraph& graph) {
  int bad = 0;
  for (std::size_t i = 0; i < subgraph.size(); ++i) {
    if (!subgraph.parent[i] || !labels[i] || !labels[*subgraph.parent[i]]) continue;
    const Branch& child = graph.branch(*labels[i]);
    if (!child.parent || *child.parent != *labels[*subgraph.parent[i]]) ++bad;
  }
  return bad;
}

LocalizationEstimate localize(const DetectionSubgraph& subgraph,
                              std::span<const std::optional<Label>> labels,
                              const AirwayGraph& graph) {
  const bool single_primary = subgraph.primaries.size() == 1;
  LocalizationEstimate est;
  for (std::size_t i = 0; i < subgraph.size(); ++i) {
    if (!subgraph.active(i) || !labels[i]) continue;
    const int k = subgraph.level[i] - (single_primary ? 1 : 0);
    ++est.votes[ancestor_clamped(graph, *labels[i], k)];
  }
  if (est.votes.empty()) throw NoVotes("localize: no labeled lumen in the frame");

  const std::pair<const Label, int>* best = nullptr;
  for (const auto& entry : est.votes) {
    if (!best || entry.second > best->second) {
      best = &entry;
    } else if (entry.second == best->second) {
      const int ge = graph.generation(entry.first);
      const int gb = graph.generation(best->first);
      if (ge > gb) best = &entry;  // map order already favors the smaller label
    }
  }
  est.branch = best->first;
  return est;
}

}  // namespace lumentrack
