// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lumentrack/airway_graph.hpp"
#include "lumentrack/geometry.hpp"
#include "lumentrack/tracker.hpp"

namespace lumentrack {

/// One frame of detector output.
struct FramePacket {
  int frame = 0;
  std::vector<Detection> detections;
  std::optional<std::int64_t> handle;  // opaque reference for feature matchers
};

/// Snapshot of a frame kept for loop closure. boxes, track_ids and labels are
/// parallel lists.
struct FrameRef {
  int frame = 0;
  std::vector<BoundingBox> boxes;
  std::vector<int> track_ids;
  std::vector<std::optional<Label>> labels;
  std::int64_t handle = 0;
};

}  // namespace lumentrack
