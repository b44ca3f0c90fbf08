// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <set>

#include "doctest.h"
#include "lumentrack/errors.hpp"
#include "lumentrack/io.hpp"
#include "lumentrack/sim.hpp"

using namespace lumentrack;

namespace {

const GroundTruthLumen* find_lumen(const std::vector<GroundTruthLumen>& ls, const Label& l) {
  for (const auto& x : ls) {
    if (x.label == l) return &x;
  }
  return nullptr;
}

GroundTruthFrame truth_frame(int frame, std::vector<std::pair<Label, BoundingBox>> lumens) {
  GroundTruthFrame f;
  f.frame = frame;
  int id = 1;
  for (auto& [l, b] : lumens) f.lumens.push_back({id++, l, b});
  return f;
}

}  // namespace

TEST_CASE("rendering is deterministic for a seed") {
  SimScenario s;
  s.seed = 12;
  s.path = {"trachea", "LMB", "LMB.1"};
  s.noise.center_jitter_px = 2;
  s.noise.fp_rate = 0.3;
  s.noise.fn_rate = 0.1;
  s.noise.embedding_std = 0.1;
  const AirwayGraph g = generate_tree(s);
  const SimStream a = render_frames(s, g);
  const SimStream b = render_frames(s, generate_tree(s));
  CHECK(detections_jsonl(a.packets) == detections_jsonl(b.packets));
  CHECK(truth_jsonl(a.truth) == truth_jsonl(b.truth));

  s.seed = 13;
  const SimStream c = render_frames(s, generate_tree(s));
  CHECK(detections_jsonl(a.packets) != detections_jsonl(c.packets));
}

TEST_CASE("tree size follows the generation count") {
  SimScenario s;
  s.generations = 2;
  CHECK(generate_tree(s).labels().size() == 3);
  s.generations = 4;
  s.symmetric = true;
  const AirwayGraph g = generate_tree(s);
  CHECK(g.labels().size() == 15);
  // the symmetric tree mirrors left and right
  CHECK(g.branch("LMB").end.x() == doctest::Approx(-g.branch("RMB").end.x()));
  CHECK(g.branch("LMB.1").length() == doctest::Approx(g.branch("RMB.2").length()));
  for (const auto& l : g.labels()) CHECK(g.generation(l) < 4);
}

TEST_CASE("scenario validation and path checks") {
  SimScenario s;
  s.generations = 1;
  CHECK_THROWS_AS(generate_tree(s), ConfigError);
  s = {};
  s.noise.fn_rate = 1.5;
  CHECK_THROWS_AS(validate(s), ConfigError);
  s = {};
  const AirwayGraph g = generate_tree(s);
  s.path = {"trachea", "LMB.1"};
  CHECK_THROWS_AS(plan_trajectory(s, g), DisconnectedPath);
  s.path = {"LMB"};
  CHECK_THROWS_AS(plan_trajectory(s, g), DisconnectedPath);
  s.path = {"trachea"};
  s.frames = 500;
  CHECK(plan_trajectory(s, g).size() == 500);
  s.frames = 3;
  CHECK(plan_trajectory(s, g).size() == 3);
}

TEST_CASE("noiseless trachea view past the enclosure shows mirrored main bronchi") {
  SimScenario s;
  s.symmetric = true;
  const AirwayGraph g = generate_tree(s);
  const auto ls = true_lumens(s, g, {"trachea", 0.8, std::nullopt}, 0.0);
  CHECK_FALSE(find_lumen(ls, "trachea"));
  const auto* l = find_lumen(ls, "LMB");
  const auto* r = find_lumen(ls, "RMB");
  REQUIRE(l);
  REQUIRE(r);
  const double mid = s.image_size / 2.0;
  CHECK(l->box.x_c < mid);
  CHECK(r->box.x_c > mid);
  CHECK(l->box.x_c - mid == doctest::Approx(mid - r->box.x_c));
  CHECK(l->box.y_c == doctest::Approx(r->box.y_c));
  CHECK(l->box.w == doctest::Approx(r->box.w));

  // before the drop the trachea wall encloses everything
  const auto early = true_lumens(s, g, {"trachea", 0.5, std::nullopt}, 0.0);
  const auto* t = find_lumen(early, "trachea");
  REQUIRE(t);
  for (const auto& x : early) {
    if (&x != t) CHECK(containment(x.box, t->box) == doctest::Approx(1.0));
  }
}

TEST_CASE("roll rotates the lumen layout about the view center") {
  SimScenario s;
  const AirwayGraph g = generate_tree(s);
  const SimPose pose{"trachea", 0.8, std::nullopt};
  const Vec2 mid(s.image_size / 2.0, s.image_size / 2.0);
  const auto a = true_lumens(s, g, pose, 0.0);
  for (double r : {kPi / 2, -kPi / 3, 2.0}) {
    const auto b = true_lumens(s, g, pose, r);
    for (const Label l : {Label("LMB"), Label("RMB")}) {
      const Vec2 off_a = find_lumen(a, l)->box.center() - mid;
      const Vec2 off_b = find_lumen(b, l)->box.center() - mid;
      CHECK((off_b - rotate(off_a, r)).norm() < 1e-9);
    }
  }
}

TEST_CASE("a full miss rate leaves no detections") {
  SimScenario s;
  s.noise.fn_rate = 1.0;
  const SimStream st = render_frames(s, generate_tree(s));
  REQUIRE(!st.packets.empty());
  for (const auto& p : st.packets) CHECK(p.detections.empty());
  std::size_t truth_count = 0;
  for (const auto& t : st.truth) truth_count += t.lumens.size();
  CHECK(truth_count > 0);
}

TEST_CASE("noise-free detections equal the truth") {
  SimScenario s;
  s.path = {"trachea", "RMB"};
  const SimStream st = render_frames(s, generate_tree(s));
  const auto ids = branch_ids(generate_tree(s));
  for (std::size_t i = 0; i < st.packets.size(); ++i) {
    REQUIRE(st.packets[i].detections.size() == st.truth[i].lumens.size());
    for (std::size_t k = 0; k < st.truth[i].lumens.size(); ++k) {
      CHECK(st.packets[i].detections[k].box == st.truth[i].lumens[k].box);
      CHECK(st.truth[i].lumens[k].id == ids.at(st.truth[i].lumens[k].label));
      CHECK(std::sqrt(st.truth[i].lumens[k].box.area()) >= s.min_box_px - 1e-9);
    }
  }
}

TEST_CASE("simulated matcher counts follow the Jaccard overlap") {
  const BoundingBox b{100, 100, 40, 40};
  std::vector<GroundTruthFrame> truth{
      truth_frame(0, {{"A", b}, {"B", {200, 100, 40, 40}}}),
      truth_frame(1, {{"A", b}, {"B", {200, 100, 40, 40}}, {"C", {300, 100, 40, 40}},
                      {"D", {400, 100, 40, 40}}}),
      truth_frame(2, {{"E", b}})};
  SimFeatureMatcher exact(truth, 200, 0, 0);
  FrameRef f0, f1, f2;
  f0.handle = 0;
  f1.handle = 1;
  f2.handle = 2;
  CHECK(exact.match(f0, f0).correspondences.size() == 200);
  const MatchReport half = exact.match(f0, f1);
  CHECK(half.correspondences.size() == 100);  // J = 2/4
  CHECK(exact.match(f0, f2).correspondences.empty());

  // every pair sits inside the same branch's box in both frames
  for (const auto& c : half.correspondences) {
    const bool in_a = truth[0].lumens[0].box.contains(c.in_keyframe) &&
                      truth[1].lumens[0].box.contains(c.in_current);
    const bool in_b = truth[0].lumens[1].box.contains(c.in_keyframe) &&
                      truth[1].lumens[1].box.contains(c.in_current);
    CHECK((in_a || in_b));
  }

  SimFeatureMatcher noisy(truth, 200, 4, 0);
  const auto n = noisy.match(f0, f1).correspondences.size();
  CHECK(n > 80);
  CHECK(n < 120);
  CHECK(noisy.match(f0, f1).correspondences.size() == n);
}
