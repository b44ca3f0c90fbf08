// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "lumentrack/airway_graph.hpp"
#include "lumentrack/geometry.hpp"
#include "lumentrack/kalman.hpp"

namespace lumentrack {

using Embedding = Eigen::VectorXd;

struct Detection {
  BoundingBox box;
  double score = 1.0;
  std::optional<Embedding> embedding;  // unit norm when present
};

enum class TrackState { Active, Lost, Removed };

struct Tracklet {
  int id = 0;
  int start_frame = 0;
  int last_frame = 0;
  TrackState state = TrackState::Active;
  MotionState motion;
  BoundingBox last_box;
  BoundingBox predicted;  // box used for motion matching in the current frame
  std::optional<Embedding> embedding;
  std::optional<Label> airway_label;
  std::vector<std::pair<int, BoundingBox>> history;

  int age(int frame) const { return frame - start_frame; }
};

/// Older tracklets first; ties by id.
bool older_than(const Tracklet& a, const Tracklet& b);

struct TrackerConfig {
  double det_thresh = 0.1;
  double high_thresh = 0.5;
  double match_thresh = 0.4;
  double low_match_thresh = 0.7;
  double low_match_thresh_no_prior = 0.9;
  double reid_weight = 0.5;      // λ in the fused cost
  double ema_momentum = 0.9;     // α in the embedding update
  int max_age = 30;
  int generation_gate = 3;
  double nms_iou = 0.7;          // <= 0 disables the duplicate filter
  bool use_kalman = true;        // false: predicted box is the last observed box
  KalmanNoise noise;
};

/// 1 - IoU(predicted box, detection box).
double motion_cost(const Tracklet& t, const Detection& d);

/// 1 - <d.embedding, t.embedding>. Throws MissingEmbedding when either side
/// has no embedding.
double appearance_cost(const Tracklet& t, const Detection& d);

/// λ · appearance + (1 - λ) · motion; motion only when an embedding is missing
/// or λ is zero.
double fused_cost(const Tracklet& t, const Detection& d, double lambda);

/// normalize(α·e + (1 - α)·f). Throws ZeroVector when the blend cancels out.
Embedding update_embedding(const Embedding& e, const Embedding& f, double alpha);

struct MatchResult {
  std::vector<std::pair<int, std::size_t>> matched;  // (tracklet id, detection index)
  std::vector<std::pair<int, std::size_t>> created;  // (tracklet id, detection index)
  std::vector<int> lost;                             // became Lost this frame
  std::vector<int> removed;                          // aged out this frame
  std::vector<std::size_t> discarded;                // detection indices
  std::vector<int> detection_track;                  // per detection, -1 if discarded
  bool first_pass_matched = false;
};

/// Tracklet pool plus the two-stage association. One instance per stream.
class LumenTracker {
 public:
  explicit LumenTracker(TrackerConfig config = {}, const AirwayGraph* graph = nullptr);

  /// Advances every live tracklet by one frame.
  void predict();

  /// Matches this frame's detections. Call predict() first.
  MatchResult associate_frame(int frame, std::span<const Detection> detections,
                              const std::optional<Label>& prev_location);

  /// predict() followed by associate_frame().
  MatchResult step(int frame, std::span<const Detection> detections,
                   const std::optional<Label>& prev_location);

  const std::vector<Tracklet>& tracklets() const { return tracklets_; }
  std::vector<Tracklet>& tracklets() { return tracklets_; }
  Tracklet* find(int id);
  const Tracklet* find(int id) const;

  const TrackerConfig& config() const { return config_; }
  int next_id() const { return next_id_; }

  /// Gives tracklet `from` the identity `to`. Used by loop closure; any
  /// non-active tracklet that still holds `to` is dropped.
  void reassign_id(int from, int to);

 private:
  bool gated_out(const Tracklet& t, const std::optional<Label>& prev_location) const;
  void absorb(Tracklet& t, int frame, const Detection& d);

  TrackerConfig config_;
  const AirwayGraph* graph_ = nullptr;
  std::vector<Tracklet> tracklets_;
  int next_id_ = 1;
};

}  // namespace lumentrack
