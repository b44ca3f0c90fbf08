// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lumentrack/airway_graph.hpp"
#include "lumentrack/frame.hpp"
#include "lumentrack/loop_closure.hpp"

namespace lumentrack {

struct RollAnchor {
  int frame = 0;
  double degrees = 0.0;
};

struct SimNoise {
  double center_jitter_px = 0.0;
  double size_jitter = 0.0;       // relative std of box width and height
  double fp_rate = 0.0;           // mean clutter boxes per frame
  double fn_rate = 0.0;           // probability a true lumen is missed
  double true_score_lo = 0.6;
  double true_score_hi = 0.95;
  double fp_score_lo = 0.1;
  double fp_score_hi = 0.45;
  double embedding_std = 0.0;
};

struct SimScenario {
  std::uint64_t seed = 1;
  int generations = 4;            // trachea is generation 0
  bool symmetric = false;         // no angle or shape jitter
  double branch_angle_min_deg = 30.0;
  double branch_angle_max_deg = 50.0;
  double azimuth_jitter_deg = 20.0;
  double trachea_length_mm = 100.0;
  double length_decay = 0.75;
  double radius_decay = 0.4;      // apparent child opening relative to its parent's
  double speed_mm_per_frame = 1.0;

  std::vector<Label> path = {"trachea"};
  double final_progress = 0.6;       // where the camera stops in the last branch
  double turnaround_progress = 0.6;  // how deep a branch is entered before backing out
  double retreat_progress = 0.2;     // how far back a parent is re-entered before a new descent
  int dwell_frames = 0;              // pause at each turnaround
  std::optional<int> frames;         // pad (hold the last pose) or truncate

  std::vector<RollAnchor> roll;      // piecewise linear, degrees; empty = 0

  int image_size = 512;
  int embedding_dim = 32;
  double min_box_px = 14.0;
  double enclosure_fraction = 0.3125;  // lumen size at a branch entrance / image size
  double child_offset = 0.2;           // child center offset / parent lumen size
  double enclosure_drop = 0.75;        // progress past which the walls leave the view
  double turn_start = 0.85;            // progress where the view starts to pan
  SimNoise noise;
};

/// Throws ConfigError for out-of-range fields.
void validate(const SimScenario& s);

struct GroundTruthLumen {
  int id = 0;
  Label label;
  BoundingBox box;
};

struct GroundTruthFrame {
  int frame = 0;
  Label branch;
  double roll = 0.0;
  std::vector<GroundTruthLumen> lumens;
};

struct SimPose {
  Label branch;
  double progress = 0.0;
  std::optional<Label> target;  // child the view pans toward near the branch end
};

/// Deterministic bifurcating tree; labels trachea, LMB, RMB, then
/// <parent>.1 and <parent>.2.
AirwayGraph generate_tree(const SimScenario& s);

/// Camera poses along the scripted path. Throws DisconnectedPath.
std::vector<SimPose> plan_trajectory(const SimScenario& s, const AirwayGraph& graph);

double roll_at(const SimScenario& s, int frame);

/// Noise-free lumen boxes for one pose.
std::vector<GroundTruthLumen> true_lumens(const SimScenario& s, const AirwayGraph& graph,
                                          const SimPose& pose, double roll);

struct SimStream {
  std::vector<FramePacket> packets;
  std::vector<GroundTruthFrame> truth;
};

SimStream render_frames(const SimScenario& s, const AirwayGraph& graph);

/// Stable id of each branch in the simulated stream.
std::map<Label, int> branch_ids(const AirwayGraph& graph);

/// Ground-truth-backed matcher. Frame handles are frame indices into the
/// retained truth. Pair count is floor(base * J) + round(N(0, noise_std)),
/// J being the Jaccard overlap of the two frames' visible branch sets, and
/// zero without a shared branch. Correspondences sit at the same relative
/// position inside the shared lumen in both frames.
class SimFeatureMatcher : public FeatureMatcher {
 public:
  SimFeatureMatcher(std::vector<GroundTruthFrame> truth, double base, double noise_std,
                    std::uint64_t seed);
  MatchReport match(const FrameRef& keyframe, const FrameRef& current) override;

 private:
  const GroundTruthFrame& lookup(std::int64_t handle) const;

  std::map<int, GroundTruthFrame> truth_;
  double base_;
  double noise_std_;
  std::uint64_t seed_;
};

}  // namespace lumentrack
