// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "lumentrack/tracker.hpp"

#include <algorithm>
#include <numeric>

#include "lumentrack/assignment.hpp"
#include "lumentrack/errors.hpp"

namespace lumentrack {

bool older_than(const Tracklet& a, const Tracklet& b) {
  if (a.start_frame != b.start_frame) return a.start_frame < b.start_frame;
  return a.id < b.id;
}

double motion_cost(const Tracklet& t, const Detection& d) { return 1.0 - iou(t.predicted, d.box); }

double appearance_cost(const Tracklet& t, const Detection& d) {
  if (!d.embedding || !t.embedding) throw MissingEmbedding("appearance_cost: embedding missing");
  if (d.embedding->size() != t.embedding->size()) {
    throw MissingEmbedding("appearance_cost: embedding dimensions differ");
  }
  return 1.0 - d.embedding->dot(*t.embedding);
}

double fused_cost(const Tracklet& t, const Detection& d, double lambda) {
  const double cm = motion_cost(t, d);
  if (lambda == 0.0 || !d.embedding || !t.embedding ||
      d.embedding->size() != t.embedding->size()) {
    return cm;
  }
  const double ca = 1.0 - d.embedding->dot(*t.embedding);
  return lambda * ca + (1.0 - lambda) * cm;
}

Embedding update_embedding(const Embedding& e, const Embedding& f, double alpha) {
  Embedding blended = alpha * e + (1.0 - alpha) * f;
  const double n = blended.norm();
  if (!(n > 1e-12)) throw ZeroVector("update_embedding: blended embedding vanished");
  return blended / n;
}

LumenTracker::LumenTracker(TrackerConfig config, const AirwayGraph* graph)
    : config_(std::move(config)), graph_(graph) {}

Tracklet* LumenTracker::find(int id) {
  for (auto& t : tracklets_) if (t.id == id) return &t;
  return nullptr;
}

const Tracklet* LumenTracker::find(int id) const {
  for (const auto& t : tracklets_) if (t.id == id) return &t;
  return nullptr;
}

void LumenTracker::predict() {
  for (auto& t : tracklets_) {
    if (config_.use_kalman) {
      t.motion = kf_predict(t.motion, config_.noise);
      t.predicted = kf_predicted_box(t.motion);
    } else {
      t.predicted = t.last_box;
    }
  }
}

bool LumenTracker::gated_out(const Tracklet& t, const std::optional<Label>& prev_location) const {
  if (!graph_ || !prev_location || !t.airway_label) return false;
  if (!graph_->contains(*t.airway_label) || !graph_->contains(*prev_location)) return false;
  return generation_distance(*graph_, *t.airway_label, *prev_location) > config_.generation_gate;
}

void LumenTracker::absorb(Tracklet& t, int frame, const Detection& d) {
  if (config_.use_kalman) {
    try {
      t.motion = kf_update(t.motion, BoxMeasurement::from_box(d.box), config_.noise);
    } catch (const SingularInnovation&) {
      t.motion = kf_init(BoxMeasurement::from_box(d.box), config_.noise);
    }
  }
  if (d.embedding) {
    if (!t.embedding || t.embedding->size() != d.embedding->size()) {
      t.embedding = *d.embedding;
    } else {
      try {
        t.embedding = update_embedding(*t.embedding, *d.embedding, config_.ema_momentum);
      } catch (const ZeroVector&) {
        // keep the previous embedding
      }
    }
  }
  t.last_box = d.box;
  t.last_frame = frame;
  t.state = TrackState::Active;
  t.history.emplace_back(frame, d.box);
}

MatchResult LumenTracker::associate_frame(int frame, std::span<const Detection> detections,
                                          const std::optional<Label>& prev_location) {
  MatchResult result;
  result.detection_track.assign(detections.size(), -1);

  // Score split, with an optional duplicate filter over the surviving boxes.
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].score > detections[b].score;
  });
  std::vector<std::size_t> kept;
  std::vector<std::size_t> high, low;
  for (std::size_t idx : order) {
    const Detection& d = detections[idx];
    bool drop = d.score < config_.det_thresh || !d.box.valid();
    if (!drop && config_.nms_iou > 0.0) {
      for (std::size_t k : kept) {
        if (iou(detections[k].box, d.box) > config_.nms_iou) { drop = true; break; }
      }
    }
    if (drop) {
      result.discarded.push_back(idx);
      continue;
    }
    kept.push_back(idx);
  }
  std::sort(kept.begin(), kept.end());
  for (std::size_t idx : kept) {
    (detections[idx].score >= config_.high_thresh ? high : low).push_back(idx);
  }

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < tracklets_.size(); ++i) {
    if (tracklets_[i].state == TrackState::Removed) continue;
    if (gated_out(tracklets_[i], prev_location)) continue;
    candidates.push_back(i);
  }

  std::vector<char> track_matched(tracklets_.size(), 0);
  std::vector<char> det_matched(detections.size(), 0);
  auto commit = [&](std::size_t ti, std::size_t di) {
    Tracklet& t = tracklets_[ti];
    absorb(t, frame, detections[di]);
    track_matched[ti] = 1;
    det_matched[di] = 1;
    result.matched.emplace_back(t.id, di);
    result.detection_track[di] = t.id;
  };

  // Pass 1: high-score detections, fused appearance + motion cost.
  {
    CostMatrix c(candidates.size(), high.size());
    for (std::size_t r = 0; r < candidates.size(); ++r)
      for (std::size_t k = 0; k < high.size(); ++k)
        c(r, k) = fused_cost(tracklets_[candidates[r]], detections[high[k]], config_.reid_weight);
    const Assignment a = solve(c, config_.match_thresh);
    for (const auto& [r, k] : a.pairs) commit(candidates[r], high[k]);
    result.first_pass_matched = !a.pairs.empty();
  }

  // Pass 2: low-score plus leftover high-score detections, motion only.
  {
    std::vector<std::size_t> rest_tracks;
    for (std::size_t ti : candidates) if (!track_matched[ti]) rest_tracks.push_back(ti);
    std::vector<std::size_t> rest_dets;
    for (std::size_t idx : kept) if (!det_matched[idx]) rest_dets.push_back(idx);
    const double gate =
        result.first_pass_matched ? config_.low_match_thresh : config_.low_match_thresh_no_prior;
    CostMatrix c(rest_tracks.size(), rest_dets.size());
    for (std::size_t r = 0; r < rest_tracks.size(); ++r)
      for (std::size_t k = 0; k < rest_dets.size(); ++k)
        c(r, k) = motion_cost(tracklets_[rest_tracks[r]], detections[rest_dets[k]]);
    const Assignment a = solve(c, gate);
    for (const auto& [r, k] : a.pairs) commit(rest_tracks[r], rest_dets[k]);
  }

  // Lifecycle of unmatched tracklets, before new ones join the pool.
  for (std::size_t ti = 0; ti < tracklets_.size(); ++ti) {
    if (track_matched[ti]) continue;
    Tracklet& t = tracklets_[ti];
    if (t.state == TrackState::Active) {
      t.state = TrackState::Lost;
      result.lost.push_back(t.id);
    }
    if (t.state == TrackState::Lost && frame - t.last_frame > config_.max_age) {
      t.state = TrackState::Removed;
      result.removed.push_back(t.id);
    }
  }
  std::erase_if(tracklets_, [](const Tracklet& t) { return t.state == TrackState::Removed; });

  for (std::size_t idx : kept) {
    if (det_matched[idx]) continue;
    if (detections[idx].score < config_.high_thresh) {
      result.discarded.push_back(idx);
      continue;
    }
    Tracklet t;
    t.id = next_id_++;
    t.start_frame = frame;
    t.last_frame = frame;
    t.motion = kf_init(BoxMeasurement::from_box(detections[idx].box), config_.noise);
    t.last_box = detections[idx].box;
    t.predicted = detections[idx].box;
    t.embedding = detections[idx].embedding;
    t.history.emplace_back(frame, detections[idx].box);
    result.created.emplace_back(t.id, idx);
    result.detection_track[idx] = t.id;
    tracklets_.push_back(std::move(t));
  }
  std::sort(result.discarded.begin(), result.discarded.end());
  return result;
}

MatchResult LumenTracker::step(int frame, std::span<const Detection> detections,
                               const std::optional<Label>& prev_location) {
  predict();
  return associate_frame(frame, detections, prev_location);
}

void LumenTracker::reassign_id(int from, int to) {
  if (from == to) return;
  std::erase_if(tracklets_, [&](const Tracklet& t) { return t.id == to && t.state != TrackState::Active; });
  if (Tracklet* t = find(from)) t->id = to;
}

}  // namespace lumentrack
