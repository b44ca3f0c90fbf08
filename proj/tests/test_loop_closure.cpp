// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <set>

#include "doctest.h"
#include "lumentrack/errors.hpp"
#include "lumentrack/loop_closure.hpp"
#include "lumentrack/sim.hpp"
#include "lumentrack/tracker.hpp"

using namespace lumentrack;

namespace {

// Returns a fixed report for one (keyframe, current) handle pair and nothing
// otherwise.
class ScriptedMatcher : public FeatureMatcher {
 public:
  std::map<std::pair<std::int64_t, std::int64_t>, MatchReport> script;
  bool fail = false;
  int calls = 0;
  MatchReport match(const FrameRef& kf, const FrameRef& cur) override {
    ++calls;
    if (fail) throw ProviderFailure("scripted failure");
    auto it = script.find({kf.handle, cur.handle});
    return it == script.end() ? MatchReport{} : it->second;
  }
};

MatchReport points(std::size_t n, Vec2 in_kf, Vec2 in_cur) {
  MatchReport r;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = 0.01 * static_cast<double>(i);
    r.correspondences.push_back({in_kf + Vec2(d, 0), in_cur + Vec2(d, 0)});
  }
  r.pair_count = n;
  return r;
}

void append(MatchReport& r, const MatchReport& more) {
  r.correspondences.insert(r.correspondences.end(), more.correspondences.begin(),
                           more.correspondences.end());
  r.pair_count = r.correspondences.size();
}

FrameRef frame_ref(std::int64_t handle, std::vector<BoundingBox> boxes, std::vector<int> ids,
                   std::vector<std::optional<Label>> labels = {}) {
  FrameRef f;
  f.frame = static_cast<int>(handle);
  f.handle = handle;
  f.boxes = std::move(boxes);
  f.track_ids = std::move(ids);
  f.labels = labels.empty() ? std::vector<std::optional<Label>>(f.boxes.size()) : std::move(labels);
  return f;
}

LoopOutcome loop_with(const FrameRef& kf, MatchReport report) {
  LoopOutcome o;
  o.loop = true;
  o.branch = "RMB";
  o.keyframe = kf;
  o.report = std::move(report);
  return o;
}

}  // namespace

TEST_CASE("a current lumen inherits the keyframe id and label") {
  const FrameRef kf = frame_ref(1, {{100, 100, 40, 40}}, {3}, {Label("RMB.1")});
  const FrameRef cur = frame_ref(2, {{200, 120, 40, 40}}, {7});
  const auto plan = plan_reassociation(loop_with(kf, points(30, {100, 100}, {200, 120})), cur, {});
  REQUIRE(plan.size() == 1);
  CHECK(plan[0].from == 7);
  CHECK(plan[0].to == 3);
  CHECK(plan[0].label == std::optional<Label>("RMB.1"));
  CHECK(plan[0].support == 30);
}

TEST_CASE("the keyframe box holding most correspondences wins") {
  const FrameRef kf = frame_ref(1, {{50, 50, 40, 40}, {150, 50, 40, 40}}, {4, 5});
  const FrameRef cur = frame_ref(2, {{100, 100, 60, 60}}, {9});
  MatchReport r = points(60, {50, 50}, {100, 100});
  append(r, points(40, {150, 50}, {95, 100}));
  const auto plan = plan_reassociation(loop_with(kf, r), cur, {});
  REQUIRE(plan.size() == 1);
  CHECK(plan[0].to == 4);
  CHECK(plan[0].support == 60);
}

TEST_CASE("nested keyframe boxes: equal support goes to the tighter box") {
  const FrameRef kf = frame_ref(1, {{100, 100, 100, 100}, {100, 100, 20, 20}}, {1, 2});
  const FrameRef cur = frame_ref(2, {{100, 100, 20, 20}}, {8});
  const auto plan = plan_reassociation(loop_with(kf, points(20, {100, 100}, {100, 100})), cur, {});
  REQUIRE(plan.size() == 1);
  CHECK(plan[0].to == 2);
}

TEST_CASE("too little support or no loop changes nothing") {
  const FrameRef kf = frame_ref(1, {{100, 100, 40, 40}}, {3});
  const FrameRef cur = frame_ref(2, {{100, 100, 40, 40}}, {7});
  CHECK(plan_reassociation(loop_with(kf, MatchReport{}), cur, {}).empty());
  CHECK(plan_reassociation(loop_with(kf, points(9, {100, 100}, {100, 100})), cur, {}).empty());
  CHECK(plan_reassociation(loop_with(kf, points(10, {100, 100}, {100, 100})), cur, {}).size() == 1);
  LoopOutcome none = loop_with(kf, points(50, {100, 100}, {100, 100}));
  none.loop = false;
  CHECK(plan_reassociation(none, cur, {}).empty());
}

TEST_CASE("a target id still worn by an unmoved lumen is not duplicated") {
  // current lumen 5 would take id 3, but lumen 3 is visible and stays put
  const FrameRef kf = frame_ref(1, {{100, 100, 40, 40}}, {3});
  const FrameRef cur = frame_ref(2, {{100, 100, 40, 40}, {300, 100, 40, 40}}, {5, 3});
  CHECK(plan_reassociation(loop_with(kf, points(30, {100, 100}, {100, 100})), cur, {}).empty());
}

TEST_CASE("recompute_association swaps ids without creating new ones") {
  LumenTracker tr;
  tr.step(0, std::vector<Detection>{{{100, 100, 40, 40}, 0.9, std::nullopt},
                                    {{300, 100, 40, 40}, 0.9, std::nullopt}},
          std::nullopt);
  REQUIRE(tr.tracklets().size() == 2);
  // the keyframe saw the same two lumens with their ids the other way round
  const FrameRef kf = frame_ref(1, {{100, 100, 40, 40}, {300, 100, 40, 40}}, {2, 1},
                                {Label("LMB"), Label("RMB")});
  const FrameRef cur = frame_ref(2, {{100, 100, 40, 40}, {300, 100, 40, 40}}, {1, 2});
  MatchReport r = points(30, {100, 100}, {100, 100});
  append(r, points(20, {300, 100}, {300, 100}));
  const auto applied = recompute_association(loop_with(kf, r), cur, tr, {});
  CHECK(applied.size() == 2);

  std::set<int> ids;
  for (const auto& t : tr.tracklets()) ids.insert(t.id);
  CHECK(ids == std::set<int>{1, 2});
  for (const auto& t : tr.tracklets()) {
    if (t.last_box.x_c == 100) {
      CHECK(t.id == 2);
      CHECK(t.airway_label == std::optional<Label>("LMB"));
    } else {
      CHECK(t.id == 1);
      CHECK(t.airway_label == std::optional<Label>("RMB"));
    }
  }
  // the next id is untouched by the remap
  const MatchResult m = tr.step(1, std::vector<Detection>{{{500, 500, 30, 30}, 0.9, std::nullopt}},
                                std::nullopt);
  REQUIRE(m.created.size() == 1);
  CHECK(m.created[0].first == 3);
}

TEST_CASE("on_new_branch: threshold, recency window and keyframe insertion") {
  Gallery gal;
  const std::vector<ObservedLumen> one{{1, 0, {100, 100, 40, 40}, Label("LMB")}};
  FrameRef older = frame_ref(10, {{100, 100, 40, 40}}, {1});
  FrameRef newer = frame_ref(20, {{100, 100, 40, 40}}, {1});
  gal.update("LMB", one, 0.0, older, 10);
  gal.update("RMB", one, 0.0, newer, 20);
  const FrameRef cur = frame_ref(30, {{100, 100, 40, 40}}, {4});

  ScriptedMatcher m;
  m.script[{10, 30}] = points(150, {100, 100}, {100, 100});
  m.script[{20, 30}] = points(100, {100, 100}, {100, 100});
  LoopClosureConfig cfg;

  // only the most recent record is searched and 100 pairs is not enough
  Gallery g1 = gal;
  LoopOutcome o = on_new_branch(g1, "RMB.1", cur, m, cfg, 30);
  CHECK_FALSE(o.loop);
  CHECK(m.calls == 1);
  REQUIRE(g1.find("RMB.1"));
  CHECK(g1.find("RMB.1")->keyframe->handle == 30);

  // widening the window reaches the older record
  cfg.recent_records = 2;
  Gallery g2 = gal;
  o = on_new_branch(g2, "RMB.1", cur, m, cfg, 30);
  CHECK(o.loop);
  CHECK(o.branch == "LMB");
  CHECK(o.report.pair_count == 150);
  CHECK_FALSE(g2.find("RMB.1"));

  // one more pair crosses the threshold
  m.script[{20, 30}] = points(101, {100, 100}, {100, 100});
  cfg.recent_records = 1;
  Gallery g3 = gal;
  o = on_new_branch(g3, "RMB.1", cur, m, cfg, 30);
  CHECK(o.loop);
  CHECK(o.branch == "RMB");
}

TEST_CASE("matcher failures degrade to an empty report") {
  ScriptedMatcher m;
  m.fail = true;
  const FrameRef a = frame_ref(1, {}, {});
  CHECK(feature_match(m, a, a).pair_count == 0);

  Gallery gal;
  gal.update("LMB", std::vector<ObservedLumen>{{1, 0, {100, 100, 40, 40}, Label("LMB")}}, 0.0, a, 1);
  const LoopOutcome o = on_new_branch(gal, "RMB", frame_ref(2, {}, {}), m, {}, 2);
  CHECK_FALSE(o.loop);

  ExternalProcessMatcher broken("false");
  CHECK_THROWS_AS(broken.match(a, a), ProviderFailure);
  CHECK(feature_match(broken, a, a).pair_count == 0);
  ExternalProcessMatcher garbage("echo not-json");
  CHECK(feature_match(garbage, a, a).pair_count == 0);

  ExternalProcessMatcher ok("sh -c 'echo {\\\"v\\\":1,\\\"pairs\\\":[[1,2,3,4],[5,6,7,8]]}' matcher");
  const MatchReport r = feature_match(ok, a, a);
  REQUIRE(r.pair_count == 2);
  CHECK(r.correspondences[1].in_current == Vec2(7, 8));
}

TEST_CASE("simulated matcher: self match passes, disjoint views do not") {
  SimScenario s;
  s.seed = 3;
  s.path = {"trachea", "LMB", "LMB.1", "LMB", "trachea", "RMB", "RMB.1"};
  const AirwayGraph g = generate_tree(s);
  const SimStream st = render_frames(s, g);
  SimFeatureMatcher m(st.truth, 200, 4, 0);
  const LoopClosureConfig cfg;

  auto ref_at = [&](std::size_t i) {
    FrameRef f;
    f.frame = st.truth[i].frame;
    f.handle = *st.packets[i].handle;
    return f;
  };
  const std::size_t last = st.truth.size() - 1;
  CHECK(feature_match(m, ref_at(last), ref_at(last)).pair_count > cfg.min_pairs);
  CHECK(feature_match(m, ref_at(10), ref_at(10)).pair_count > cfg.min_pairs);

  // a frame deep in LMB.1 against one deep in RMB.1 shares nothing
  auto visible = [&](std::size_t i) {
    std::set<Label> v;
    for (const auto& l : st.truth[i].lumens) v.insert(l.label);
    return v;
  };
  std::optional<std::pair<std::size_t, std::size_t>> disjoint;
  for (std::size_t i = 0; i < st.truth.size() && !disjoint; i += 5) {
    const auto a = visible(i);
    if (a.empty()) continue;
    for (std::size_t j = i + 1; j < st.truth.size(); j += 5) {
      const auto b = visible(j);
      if (!b.empty() && std::none_of(b.begin(), b.end(), [&](const Label& l) { return a.count(l); })) {
        disjoint = {{i, j}};
        break;
      }
    }
  }
  REQUIRE(disjoint);
  CHECK(feature_match(m, ref_at(disjoint->first), ref_at(disjoint->second)).pair_count == 0);
  // deterministic
  CHECK(feature_match(m, ref_at(10), ref_at(last)).pair_count ==
        feature_match(m, ref_at(10), ref_at(last)).pair_count);
}
