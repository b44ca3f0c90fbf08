// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lumentrack/association.hpp"
#include "lumentrack/frame.hpp"
#include "lumentrack/geometry.hpp"
#include "lumentrack/tracker.hpp"

namespace lumentrack {

struct Correspondence {
  Vec2 in_keyframe;
  Vec2 in_current;
};

struct MatchReport {
  std::size_t pair_count = 0;
  std::vector<Correspondence> correspondences;
};

/// Pluggable frame-to-frame matcher. Implementations must be deterministic
/// for fixed inputs and may throw ProviderFailure.
class FeatureMatcher {
 public:
  virtual ~FeatureMatcher() = default;
  virtual MatchReport match(const FrameRef& keyframe, const FrameRef& current) = 0;
};

/// Calls the matcher; a ProviderFailure becomes an empty report.
MatchReport feature_match(FeatureMatcher& matcher, const FrameRef& keyframe,
                          const FrameRef& current);

/// Runs `command <handle_a> <handle_b>` and reads one JSON document from its
/// standard output: {"v":1,"pairs":[[xa,ya,xb,yb],...]}.
class ExternalProcessMatcher : public FeatureMatcher {
 public:
  explicit ExternalProcessMatcher(std::string command) : command_(std::move(command)) {}
  MatchReport match(const FrameRef& keyframe, const FrameRef& current) override;

 private:
  std::string command_;
};

struct LoopClosureConfig {
  bool enabled = true;
  std::size_t min_pairs = 100;      // η: a loop needs strictly more pairs
  std::size_t recent_records = 1;   // Λ: keyframes searched per trigger
  std::size_t min_points = 10;      // m_min: support needed to inherit an id
};

struct LoopOutcome {
  bool loop = false;
  Label branch;          // gallery record that matched
  FrameRef keyframe;     // its keyframe
  MatchReport report;
};

/// Called once when localization moves to a different branch. Matches the
/// current frame against the keyframes of the most recently updated gallery
/// records. Without a loop the current frame becomes the keyframe of
/// `location` if that branch has none yet.
LoopOutcome on_new_branch(Gallery& gallery, const Label& location, const FrameRef& current,
                          FeatureMatcher& matcher, const LoopClosureConfig& config, int frame);

struct IdRemap {
  int from = 0;
  int to = 0;
  std::optional<Label> label;
  std::size_t support = 0;
};

/// Decides which current tracklets inherit keyframe identities. A current box
/// takes the id of the keyframe box that contains the most of the
/// correspondences falling inside it (the smaller box on ties), provided at
/// least `min_points` support it. Conflicts go to the larger count.
std::vector<IdRemap> plan_reassociation(const LoopOutcome& loop, const FrameRef& current,
                                        const LoopClosureConfig& config);

/// plan_reassociation() applied to the tracker; returns the applied remaps.
std::vector<IdRemap> recompute_association(const LoopOutcome& loop, const FrameRef& current,
                                           LumenTracker& tracker,
                                           const LoopClosureConfig& config);

}  // namespace lumentrack
