// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "lumentrack/airway_graph.hpp"
#include "lumentrack/engine.hpp"
#include "lumentrack/frame.hpp"
#include "lumentrack/metrics.hpp"
#include "lumentrack/sim.hpp"

namespace lumentrack {

inline constexpr int kFormatVersion = 1;

/// Writes to a temporary sibling and renames it over `path`.
void atomic_write(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// Every record carries "v"; readers reject other versions with FormatError.

std::string detection_record(const FramePacket& packet);
FramePacket parse_detection_record(const std::string& line);
std::string detections_jsonl(const std::vector<FramePacket>& packets);
std::vector<FramePacket> read_detections(const std::string& path);

std::string truth_record(const GroundTruthFrame& frame);
GroundTruthFrame parse_truth_record(const std::string& line);
std::string truth_jsonl(const std::vector<GroundTruthFrame>& frames);
std::vector<GroundTruthFrame> read_truth(const std::string& path);

struct TrackFrame {
  int frame = 0;
  std::vector<EvalBox> tracks;
};

std::string track_record(const FrameOutput& out);
TrackFrame parse_track_record(const std::string& line);
std::vector<TrackFrame> read_tracks(const std::string& path);

struct LocalizationFrame {
  int frame = 0;
  Label branch;
  std::map<Label, int> votes;
};

std::string localization_record(const FrameOutput& out);
LocalizationFrame parse_localization_record(const std::string& line);
std::vector<LocalizationFrame> read_localization(const std::string& path);

std::string graph_document(const AirwayGraph& graph);
RawTree parse_graph_document(const std::string& text);
/// Parses, validates and normalizes. Throws FormatError or MalformedTree.
AirwayGraph read_graph(const std::string& path);

std::string scenario_document(const SimScenario& s);
SimScenario parse_scenario(const std::string& text);
SimScenario read_scenario(const std::string& path);

struct EvaluationSummary {
  MetricsReport mot;
  LocalizationReport localization;
  double iou = 0.5;
};

std::string metrics_document(const EvaluationSummary& summary);
std::string branch_accuracy_csv(const LocalizationReport& report);

TrackFrame to_track_frame(const FrameOutput& out);

/// Joins predictions and truth on frame index. Throws MisalignedFrames unless
/// both cover the same frames.
std::vector<EvalFrame> join_frames(const std::vector<TrackFrame>& pred,
                                   const std::vector<GroundTruthFrame>& truth);

/// Machine-readable error record for stderr.
std::string error_record(const std::string& code, const std::string& message);

}  // namespace lumentrack
