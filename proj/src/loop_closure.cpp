// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "lumentrack/loop_closure.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <set>
#include <string>

#include <sys/wait.h>

#include "json.hpp"
#include "lumentrack/errors.hpp"

namespace lumentrack {

MatchReport feature_match(FeatureMatcher& matcher, const FrameRef& keyframe,
                          const FrameRef& current) {
  try {
    MatchReport r = matcher.match(keyframe, current);
    r.pair_count = r.correspondences.size();
    return r;
  } catch (const ProviderFailure&) {
    return {};
  }
}

MatchReport ExternalProcessMatcher::match(const FrameRef& keyframe, const FrameRef& current) {
  const std::string cmd =
      command_ + " " + std::to_string(keyframe.handle) + " " + std::to_string(current.handle);
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) throw ProviderFailure("could not start matcher: " + command_);
  std::string out;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  const int status = pclose(pipe);
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw ProviderFailure("matcher exited with failure: " + command_);
  }
  MatchReport report;
  try {
    const auto doc = nlohmann::json::parse(out);
    if (doc.at("v").get<int>() != 1) throw ProviderFailure("matcher output has unknown version");
    for (const auto& p : doc.at("pairs")) {
      if (p.size() != 4) throw ProviderFailure("matcher pair must have four numbers");
      report.correspondences.push_back({Vec2(p[0].get<double>(), p[1].get<double>()),
                                        Vec2(p[2].get<double>(), p[3].get<double>())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProviderFailure(std::string("unreadable matcher output: ") + e.what());
  }
  report.pair_count = report.correspondences.size();
  return report;
}

LoopOutcome on_new_branch(Gallery& gallery, const Label& location, const FrameRef& current,
                          FeatureMatcher& matcher, const LoopClosureConfig& config, int frame) {
  LoopOutcome outcome;
  for (const GalleryRecord* record : gallery.most_recent_with_keyframe(config.recent_records)) {
    MatchReport report = feature_match(matcher, *record->keyframe, current);
    if (report.pair_count > config.min_pairs) {
      outcome.loop = true;
      outcome.branch = record->branch;
      outcome.keyframe = *record->keyframe;
      outcome.report = std::move(report);
      return outcome;
    }
  }
  gallery.insert_keyframe(location, current, frame);
  return outcome;
}

std::vector<IdRemap> plan_reassociation(const LoopOutcome& loop, const FrameRef& current,
                                        const LoopClosureConfig& config) {
  if (!loop.loop) return {};
  const FrameRef& kf = loop.keyframe;

  // support[current box][keyframe box]: correspondences inside both boxes.
  std::vector<std::vector<std::size_t>> support(current.boxes.size(),
                                                std::vector<std::size_t>(kf.boxes.size(), 0));
  for (const auto& c : loop.report.correspondences) {
    for (std::size_t b = 0; b < current.boxes.size(); ++b) {
      if (!current.boxes[b].contains(c.in_current)) continue;
      for (std::size_t k = 0; k < kf.boxes.size(); ++k) {
        if (kf.boxes[k].contains(c.in_keyframe)) ++support[b][k];
      }
    }
  }

  // Nested keyframe boxes share points; at equal support the tightest wins.
  std::vector<IdRemap> candidates;
  for (std::size_t b = 0; b < current.boxes.size(); ++b) {
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < kf.boxes.size(); ++k) {
      if (support[b][k] == 0) continue;
      if (!best || support[b][k] > support[b][*best] ||
          (support[b][k] == support[b][*best] && kf.boxes[k].area() < kf.boxes[*best].area())) {
        best = k;
      }
    }
    if (!best || support[b][*best] < config.min_points) continue;
    IdRemap r;
    r.from = current.track_ids[b];
    r.to = kf.track_ids[*best];
    r.label = *best < kf.labels.size() ? kf.labels[*best] : std::nullopt;
    r.support = support[b][*best];
    candidates.push_back(r);
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const IdRemap& a, const IdRemap& b) {
    return a.support != b.support ? a.support > b.support : a.from < b.from;
  });

  std::vector<IdRemap> accepted;
  std::set<int> targets;
  for (const auto& c : candidates) {
    if (targets.insert(c.to).second) accepted.push_back(c);
  }

  // A target still worn by a current lumen that keeps its own id would
  // produce a duplicate; drop such remaps until none is left.
  const std::set<int> current_ids(current.track_ids.begin(), current.track_ids.end());
  bool changed = true;
  while (changed) {
    changed = false;
    std::set<int> moving;
    for (const auto& r : accepted) {
      if (r.from != r.to) moving.insert(r.from);
    }
    for (auto it = accepted.begin(); it != accepted.end(); ++it) {
      if (it->from != it->to && current_ids.count(it->to) && !moving.count(it->to)) {
        accepted.erase(it);
        changed = true;
        break;
      }
    }
  }
  return accepted;
}

std::vector<IdRemap> recompute_association(const LoopOutcome& loop, const FrameRef& current,
                                           LumenTracker& tracker,
                                           const LoopClosureConfig& config) {
  const auto plan = plan_reassociation(loop, current, config);
  // Two phases through negative ids so that swaps never collide.
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (plan[i].from != plan[i].to) tracker.reassign_id(plan[i].from, -1 - static_cast<int>(i));
  }
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const int id = plan[i].from != plan[i].to ? -1 - static_cast<int>(i) : plan[i].from;
    if (id != plan[i].to) tracker.reassign_id(id, plan[i].to);
    if (plan[i].label) {
      if (Tracklet* t = tracker.find(plan[i].to)) t->airway_label = plan[i].label;
    }
  }
  return plan;
}

}  // namespace lumentrack
