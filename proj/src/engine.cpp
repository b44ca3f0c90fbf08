// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "lumentrack/engine.hpp"

#include <algorithm>
#include <numeric>

#include "lumentrack/errors.hpp"

namespace lumentrack {

Engine::Engine(const AirwayGraph& graph, EngineConfig config, FeatureMatcher* matcher)
    : graph_(graph),
      config_(std::move(config)),
      matcher_(matcher),
      tracker_(config_.tracker, &graph),
      location_(graph.root()) {
  validate(config_);
}

FrameOutput Engine::process(const FramePacket& packet) {
  if (last_frame_ && packet.frame <= *last_frame_) {
    throw FormatError("frame indices must increase: " + std::to_string(packet.frame));
  }
  last_frame_ = packet.frame;
  const int frame = packet.frame;

  const std::optional<Label> gate_location =
      initialized_ ? std::optional<Label>(location_) : std::nullopt;
  std::map<int, int> lost_since;
  for (const Tracklet& t : tracker_.tracklets()) {
    if (t.state == TrackState::Lost) lost_since[t.id] = t.last_frame;
  }
  const MatchResult mr = tracker_.step(frame, packet.detections, gate_location);
  // A noiseless detector never drops a lumen for a frame or two, so a vanished
  // lumen is really gone. Coasting only starts once a short miss was observed.
  for (const auto& [id, _] : mr.matched) {
    auto it = lost_since.find(id);
    if (it != lost_since.end() && frame - it->second <= config_.association.coast_frames + 1) {
      ++recovered_misses_;
    }
  }
  const bool coasting = recovered_misses_ >= config_.association.coast_after_recoveries;

  // Lumens observed in this frame, in detection order, followed by recently
  // missed tracklets at their predicted boxes. Only observed lumens are
  // reported, recorded in the gallery or used for roll.
  std::vector<ObservedLumen> lumens;
  std::vector<BoundingBox> boxes;
  for (std::size_t d = 0; d < packet.detections.size(); ++d) {
    const int id = mr.detection_track[d];
    if (id < 0) continue;
    const Tracklet* t = tracker_.find(id);
    ObservedLumen l;
    l.track_id = id;
    l.start_frame = t->start_frame;
    l.box = packet.detections[d].box;
    l.label = t->airway_label;
    lumens.push_back(l);
    boxes.push_back(l.box);
  }
  const std::size_t observed = lumens.size();
  if (initialized_ && coasting) {
    for (const Tracklet& t : tracker_.tracklets()) {
      if (t.state != TrackState::Lost || frame - t.last_frame > config_.association.coast_frames) {
        continue;
      }
      lumens.push_back({t.id, t.start_frame, t.predicted, t.airway_label});
      boxes.push_back(t.predicted);
    }
  }

  const DetectionSubgraph sub = build_subgraph(boxes, config_.association);
  const Label previous = location_;

  bool has_seed = std::any_of(lumens.begin(), lumens.end(), [&](const ObservedLumen& l) {
    return l.label && graph_.contains(*l.label);
  });
  bool just_initialized = false;
  if (!initialized_ || (!has_seed && location_ == graph_.root())) {
    if (auto init = initialize(sub, boxes, config_.association)) {
      lumens[init->left].label = graph_.lmb();
      lumens[init->right].label = graph_.rmb();
      roll_ = init->roll;
      location_ = graph_.root();
      initialized_ = true;
      just_initialized = true;
      has_seed = true;
    }
  }

  // Roll geometry uses the filtered tracklet centers when available.
  auto for_roll = [&](ObservedLumen l) {
    if (!config_.association.filtered_centers || !config_.tracker.use_kalman) return l;
    if (const Tracklet* t = tracker_.find(l.track_id)) {
      l.box.x_c = t->motion.mean[0];
      l.box.y_c = t->motion.mean[1];
    }
    return l;
  };

  std::vector<std::optional<Label>> labels(lumens.size());
  FrameOutput out;
  out.frame = frame;

  if (initialized_ && has_seed) {
    if (!just_initialized) {
      std::vector<std::size_t> order(observed);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (lumens[a].start_frame != lumens[b].start_frame) {
          return lumens[a].start_frame < lumens[b].start_frame;
        }
        return lumens[a].track_id < lumens[b].track_id;
      });
      std::vector<ObservedLumen> by_age;
      for (std::size_t i : order) by_age.push_back(for_roll(lumens[i]));
      if (auto r = estimate_roll(gallery_, by_age, config_.association)) roll_ = *r;
    }
    labels = propagate_labels(sub, lumens, graph_, roll_, config_.graph, config_.association);
    for (std::size_t i = 0; i < lumens.size(); ++i) {
      if (!labels[i]) continue;
      lumens[i].label = labels[i];
      Tracklet* t = tracker_.find(lumens[i].track_id);
      if (!t->airway_label) t->airway_label = labels[i];
    }
    out.hierarchy_violations = hierarchy_violations(sub, labels, graph_);
    try {
      const LocalizationEstimate est = localize(sub, labels, graph_);
      location_ = est.branch;
      out.votes = est.votes;
    } catch (const NoVotes&) {
      // keep the previous estimate
    }
  }

  FrameRef ref;
  ref.frame = frame;
  ref.handle = packet.handle.value_or(frame);
  lumens.resize(observed);
  for (const auto& l : lumens) {
    ref.boxes.push_back(l.box);
    ref.track_ids.push_back(l.track_id);
    ref.labels.push_back(l.label);
  }

  if (initialized_ && !just_initialized && location_ != previous) {
    if (config_.loop_closure.enabled && matcher_) {
      const LoopOutcome outcome =
          on_new_branch(gallery_, location_, ref, *matcher_, config_.loop_closure, frame);
      if (outcome.loop) {
        out.loop = true;
        out.remaps = recompute_association(outcome, ref, tracker_, config_.loop_closure);
        for (const auto& r : out.remaps) {
          for (auto& l : lumens) {
            if (l.track_id != r.from) continue;
            l.track_id = r.to;
            if (r.label) l.label = r.label;
          }
        }
      }
    } else {
      gallery_.insert_keyframe(location_, ref, frame);
    }
  }
  if (just_initialized) gallery_.insert_keyframe(location_, ref, frame);
  if (initialized_ && has_seed) {
    std::vector<ObservedLumen> recorded;
    for (const auto& l : lumens) recorded.push_back(for_roll(l));
    gallery_.update(location_, recorded, roll_, std::nullopt, frame);
  }

  out.branch = location_;
  out.roll = roll_;
  out.initialized = initialized_;
  for (const auto& l : lumens) out.tracks.push_back({l.track_id, l.box, l.label});
  return out;
}

std::vector<FrameOutput> run_stream(const AirwayGraph& graph, const EngineConfig& config,
                                    const std::vector<FramePacket>& packets,
                                    FeatureMatcher* matcher) {
  Engine engine(graph, config, matcher);
  std::vector<FrameOutput> out;
  out.reserve(packets.size());
  for (const auto& p : packets) out.push_back(engine.process(p));
  return out;
}

}  // namespace lumentrack
