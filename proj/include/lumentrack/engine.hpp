// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <vector>

#include "lumentrack/airway_graph.hpp"
#include "lumentrack/association.hpp"
#include "lumentrack/config.hpp"
#include "lumentrack/frame.hpp"
#include "lumentrack/loop_closure.hpp"
#include "lumentrack/tracker.hpp"

namespace lumentrack {

struct TrackOutput {
  int id = 0;
  BoundingBox box;
  std::optional<Label> label;
};

struct FrameOutput {
  int frame = 0;
  std::vector<TrackOutput> tracks;  // in detection order
  Label branch;
  std::map<Label, int> votes;       // empty when the estimate was held
  double roll = 0.0;
  bool initialized = false;
  bool loop = false;
  std::vector<IdRemap> remaps;
  int hierarchy_violations = 0;
};

/// Per-stream pipeline: two-stage tracking, carina initialization, roll
/// estimation, label propagation, voting localization, gallery upkeep and
/// loop closure. Strictly sequential; one instance per stream.
class Engine {
 public:
  /// `matcher` may be null; loop closure then never fires.
  Engine(const AirwayGraph& graph, EngineConfig config, FeatureMatcher* matcher = nullptr);

  FrameOutput process(const FramePacket& packet);

  const Gallery& gallery() const { return gallery_; }
  const LumenTracker& tracker() const { return tracker_; }
  const Label& location() const { return location_; }
  double roll() const { return roll_; }
  bool initialized() const { return initialized_; }

 private:
  const AirwayGraph& graph_;
  EngineConfig config_;
  FeatureMatcher* matcher_;
  LumenTracker tracker_;
  Gallery gallery_;
  Label location_;
  double roll_ = 0.0;
  bool initialized_ = false;
  int recovered_misses_ = 0;  // lost tracklets matched again within the coast window
  std::optional<int> last_frame_;
};

/// Runs a whole stream through a fresh engine.
std::vector<FrameOutput> run_stream(const AirwayGraph& graph, const EngineConfig& config,
                                    const std::vector<FramePacket>& packets,
                                    FeatureMatcher* matcher = nullptr);

}  // namespace lumentrack
