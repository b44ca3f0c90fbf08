// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "lumentrack/airway_graph.hpp"
#include "lumentrack/frame.hpp"
#include "lumentrack/geometry.hpp"

namespace lumentrack {

struct AssociationConfig {
  double containment = 0.7;        // κ: inner-box coverage needed for a parent edge
  double redundant_iou = 0.85;     // children this close to their parent are dropped
  double init_roll_prior = 0.0;    // radians; picks between the two carina hypotheses
  double graph_match_gate = std::numeric_limits<double>::infinity();
  double roll_min_separation_px = 60.0;
  bool filtered_centers = false;   // roll and gallery use Kalman-filtered centers
  int coast_frames = 2;            // lost tracklets kept in the subgraph at their predicted box
  int coast_after_recoveries = 1;  // coasting starts once this many misses were recovered
};

/// A tracked lumen in the current frame: a matched or newly created tracklet
/// together with this frame's detection box.
struct ObservedLumen {
  int track_id = 0;
  int start_frame = 0;
  BoundingBox box;
  std::optional<Label> label;
};

/// Containment hierarchy over this frame's lumens. Node i is lumen i.
struct DetectionSubgraph {
  std::vector<std::optional<std::size_t>> parent;
  std::vector<std::vector<std::size_t>> children;
  std::vector<int> level;        // 1 for primaries, 0 for pruned nodes
  std::vector<char> pruned;      // redundant duplicates of their parent
  std::vector<std::size_t> primaries;

  std::size_t size() const { return parent.size(); }
  bool active(std::size_t i) const { return !pruned[i]; }
};

DetectionSubgraph build_subgraph(std::span<const BoundingBox> boxes,
                                 const AssociationConfig& config = {});

struct CarinaInit {
  double roll = 0.0;
  std::size_t left = 0;   // node index of the left main bronchus
  std::size_t right = 0;  // node index of the right main bronchus
};

/// Needs exactly two primary nodes; std::nullopt means "not at the carina yet".
/// roll = signed_angle((1, 0), c_right - c_left); of the two left/right
/// hypotheses the one whose roll is closest to `config.init_roll_prior` wins.
std::optional<CarinaInit> initialize(const DetectionSubgraph& subgraph,
                                     std::span<const BoundingBox> boxes,
                                     const AssociationConfig& config = {});

struct GalleryRecord {
  Label branch;
  std::set<int> tracklet_ids;
  std::map<int, Vec2> tracklet_centers;
  double roll = 0.0;
  int lumen_count = 0;
  std::optional<FrameRef> keyframe;
  std::uint64_t updated_seq = 0;
  int updated_frame = 0;
};

/// Per-visited-branch records, ordered by label, with an update sequence for
/// recency queries.
class Gallery {
 public:
  const GalleryRecord* find(const Label& branch) const;
  const std::map<Label, GalleryRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }

  /// Up to `count` records holding a keyframe, most recently updated first.
  std::vector<const GalleryRecord*> most_recent_with_keyframe(std::size_t count) const;

  /// Creates or replaces the record for `location`. A visited branch is only
  /// replaced when more labeled lumens are visible than were recorded. When
  /// `keyframe` is empty a replacement keeps the stored keyframe. Returns true
  /// when the gallery changed.
  bool update(const Label& location, std::span<const ObservedLumen> lumens, double roll,
              const std::optional<FrameRef>& keyframe, int frame);

  /// Stores a keyframe for a branch that does not have one yet.
  bool insert_keyframe(const Label& branch, const FrameRef& keyframe, int frame);

 private:
  std::map<Label, GalleryRecord> records_;
  std::uint64_t seq_ = 0;
};

/// Roll from the first pair of visible lumens, in age order, that shares a
/// gallery record: roll_m + signed_angle(c1_m - c2_m, c1_t - c2_t). Pairs
/// closer than `roll_min_separation_px` in the record or in the current
/// frame do not qualify. The lumens must be sorted oldest first.
/// std::nullopt when no pair qualifies; the caller keeps its previous roll.
std::optional<double> estimate_roll(const Gallery& gallery, std::span<const ObservedLumen> lumens,
                                    const AssociationConfig& config = {});

/// Intra-frame label propagation. Starts from the labels already on `lumens`
/// and walks labeled nodes oldest first, labeling the parent node, the child
/// nodes (matched against the projected children of the reference branch) and
/// the sibling nodes (matched against the projected siblings). Existing labels
/// are never overwritten. Returns one label per node.
std::vector<std::optional<Label>> propagate_labels(const DetectionSubgraph& subgraph,
                                                   std::span<const ObservedLumen> lumens,
                                                   const AirwayGraph& graph, double roll,
                                                   const GraphParams& params = {},
                                                   const AssociationConfig& config = {});

/// Number of labeled parent/child node pairs whose labels disagree with the
/// airway tree.
int hierarchy_violations(const DetectionSubgraph& subgraph,
                         std::span<const std::optional<Label>> labels, const AirwayGraph& graph);

struct LocalizationEstimate {
  int frame = 0;
  Label branch;
  std::map<Label, int> votes;
  std::map<int, Label> labeled_tracklets;
};

/// Voting localization. With one primary node a level-k label votes for its
/// (k-1)-th ancestor, otherwise for its k-th ancestor; votes above the root
/// land on the root. Ties go to the deeper branch, then the smaller label.
/// Throws NoVotes when no node carries a label.
LocalizationEstimate localize(const DetectionSubgraph& subgraph,
                              std::span<const std::optional<Label>> labels,
                              const AirwayGraph& graph);

}  // namespace lumentrack
