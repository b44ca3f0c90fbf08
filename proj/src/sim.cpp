// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "lumentrack/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>
#include <set>

#include <Eigen/Geometry>

#include "lumentrack/errors.hpp"

namespace lumentrack {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return splitmix(a ^ splitmix(b)); }

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

constexpr std::uint64_t kTreeStream = 0x74726565ULL;
constexpr std::uint64_t kShapeStream = 0x73686170ULL;
constexpr std::uint64_t kEmbedStream = 0x656d6264ULL;
constexpr std::uint64_t kFrameStream = 0x6672616dULL;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double gaussian(std::mt19937_64& rng, double std) {
  if (std <= 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, std)(rng);
}

double branch_aspect(const SimScenario& s, const Label& label) {
  if (s.symmetric) return 1.0;
  std::mt19937_64 rng(mix(mix(s.seed, kShapeStream), fnv1a(label)));
  return uniform(rng, 0.85, 1.15);
}

Embedding branch_embedding(const SimScenario& s, const Label& label) {
  std::mt19937_64 rng(mix(mix(s.seed, kEmbedStream), fnv1a(label)));
  Embedding e(s.embedding_dim);
  for (int i = 0; i < s.embedding_dim; ++i) e[i] = gaussian(rng, 1.0);
  return e.normalized();
}

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

BoundingBox make_box(const Vec2& c, double size, double aspect) {
  const double r = std::sqrt(aspect);
  return {c.x(), c.y(), size * r, size / r};
}

}  // namespace

void validate(const SimScenario& s) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("scenario: ") + what);
  };
  require(s.generations >= 2, "generations must be >= 2");
  require(s.generations <= 12, "generations must be <= 12");
  require(s.branch_angle_min_deg > 0 && s.branch_angle_min_deg <= s.branch_angle_max_deg &&
              s.branch_angle_max_deg < 90,
          "branch angles must satisfy 0 < min <= max < 90");
  require(s.azimuth_jitter_deg >= 0 && s.azimuth_jitter_deg < 90, "azimuth jitter out of range");
  require(s.trachea_length_mm > 0, "trachea length must be positive");
  require(s.length_decay > 0 && s.length_decay <= 1, "length_decay must be in (0, 1]");
  require(s.radius_decay > 0 && s.radius_decay < 1, "radius_decay must be in (0, 1)");
  require(s.speed_mm_per_frame > 0, "speed must be positive");
  require(!s.path.empty(), "path must not be empty");
  require(s.final_progress >= 0 && s.final_progress <= 1, "final_progress must be in [0, 1]");
  require(s.turnaround_progress > 0 && s.turnaround_progress <= 1,
          "turnaround_progress must be in (0, 1]");
  require(s.retreat_progress >= 0 && s.retreat_progress < s.turn_start,
          "retreat_progress must be in [0, turn_start)");
  require(s.dwell_frames >= 0, "dwell_frames must be >= 0");
  require(!s.frames || *s.frames >= 0, "frames must be >= 0");
  require(s.image_size >= 32, "image_size must be >= 32");
  require(s.embedding_dim >= 1, "embedding_dim must be >= 1");
  require(s.min_box_px > 0, "min_box_px must be positive");
  require(s.enclosure_fraction > 0 && s.enclosure_fraction <= 1, "enclosure_fraction out of range");
  require(s.child_offset >= 0 && s.child_offset + s.radius_decay / 2 <= 0.5,
          "children must fit inside their parent lumen");
  require(s.enclosure_drop >= 0 && s.enclosure_drop <= 1, "enclosure_drop out of range");
  require(s.turn_start >= 0 && s.turn_start < 1, "turn_start must be in [0, 1)");
  const auto& n = s.noise;
  auto unit = [](double x) { return x >= 0 && x <= 1; };
  require(n.center_jitter_px >= 0 && n.size_jitter >= 0 && n.embedding_std >= 0,
          "noise scales must be >= 0");
  require(n.fp_rate >= 0, "fp_rate must be >= 0");
  require(unit(n.fn_rate), "fn_rate must be in [0, 1]");
  require(unit(n.true_score_lo) && unit(n.true_score_hi) && n.true_score_lo <= n.true_score_hi,
          "true score band must lie in [0, 1]");
  require(unit(n.fp_score_lo) && unit(n.fp_score_hi) && n.fp_score_lo <= n.fp_score_hi,
          "clutter score band must lie in [0, 1]");
}

AirwayGraph generate_tree(const SimScenario& s) {
  validate(s);
  std::mt19937_64 rng(mix(s.seed, kTreeStream));
  const double deg = kPi / 180.0;

  RawTree raw;
  raw.trachea = "trachea";
  raw.lmb = "LMB";
  raw.rmb = "RMB";
  raw.branches.push_back({"trachea", Vec3(0, -s.trachea_length_mm, 0), Vec3::Zero(), std::nullopt});

  struct Pending {
    Label label;
    Vec3 end;
    Vec3 dir;
    Vec3 side;  // in-plane axis of the next bifurcation
    double length;
    int generation;
  };
  std::deque<Pending> queue;
  queue.push_back({"trachea", Vec3::Zero(), Vec3::UnitY(), Vec3::UnitX(), s.trachea_length_mm, 0});
  const double mean_angle = 0.5 * (s.branch_angle_min_deg + s.branch_angle_max_deg);

  while (!queue.empty()) {
    const Pending b = queue.front();
    queue.pop_front();
    if (b.generation + 1 >= s.generations) continue;
    // first child bends to -side, second to +side
    const Label names[2] = {b.generation == 0 ? Label("LMB") : b.label + ".1",
                            b.generation == 0 ? Label("RMB") : b.label + ".2"};
    for (int k = 0; k < 2; ++k) {
      const double polar =
          (s.symmetric ? mean_angle : uniform(rng, s.branch_angle_min_deg, s.branch_angle_max_deg)) *
          deg;
      // The main bronchi stay in the trachea's left/right plane so that the
      // carina defines roll zero.
      const double jitter = uniform(rng, -s.azimuth_jitter_deg, s.azimuth_jitter_deg) * deg;
      const double azimuth = (s.symmetric || b.generation == 0) ? 0.0 : jitter;
      const Vec3 side = Eigen::AngleAxisd(azimuth, b.dir) * b.side;
      const double sign = k == 0 ? -1.0 : 1.0;
      const Vec3 dir = (std::cos(polar) * b.dir + sign * std::sin(polar) * side).normalized();
      const double length = b.length * s.length_decay;
      const Vec3 end = b.end + length * dir;
      raw.branches.push_back({names[k], b.end, end, b.label});
      queue.push_back({names[k], end, dir, dir.cross(b.side).normalized(), length, b.generation + 1});
    }
  }
  return AirwayGraph::load_and_normalize(raw);
}

double roll_at(const SimScenario& s, int frame) {
  if (s.roll.empty()) return 0.0;
  std::vector<RollAnchor> a = s.roll;
  std::stable_sort(a.begin(), a.end(),
                   [](const RollAnchor& x, const RollAnchor& y) { return x.frame < y.frame; });
  double deg = a.back().degrees;
  if (frame <= a.front().frame) {
    deg = a.front().degrees;
  } else {
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
      if (frame >= a[i].frame && frame < a[i + 1].frame) {
        const double t = double(frame - a[i].frame) / double(a[i + 1].frame - a[i].frame);
        deg = a[i].degrees + t * (a[i + 1].degrees - a[i].degrees);
        break;
      }
    }
  }
  return wrap_angle(deg * kPi / 180.0);
}

std::vector<SimPose> plan_trajectory(const SimScenario& s, const AirwayGraph& graph) {
  validate(s);
  const auto& path = s.path;
  if (path.front() != graph.root()) throw DisconnectedPath("path must start at " + graph.root());
  for (const auto& l : path) {
    if (!graph.contains(l)) throw DisconnectedPath("path label not in tree: " + l);
  }

  std::vector<SimPose> poses;
  auto segment = [&](const Label& l, double a, double b, std::optional<Label> target,
                     bool include_end) {
    const double dp = s.speed_mm_per_frame / graph.branch(l).length();
    const double span = std::abs(b - a);
    const int n = span <= 0.0 ? 0 : static_cast<int>(std::ceil(span / dp - 1e-9));
    const double sign = b >= a ? 1.0 : -1.0;
    for (int k = 0; k < n; ++k) poses.push_back({l, a + sign * k * dp, target});
    if (include_end || n == 0) poses.push_back({l, b, target});
  };
  auto dwell = [&](const Label& l, double p) {
    for (int k = 0; k < s.dwell_frames; ++k) poses.push_back({l, p, std::nullopt});
  };

  for (std::size_t i = 0; i < path.size(); ++i) {
    const Label& l = path[i];
    const Branch& b = graph.branch(l);
    std::optional<Label> prev;
    bool from_child = false;
    if (i > 0) {
      prev = path[i - 1];
      const Branch& pb = graph.branch(*prev);
      from_child = pb.parent && *pb.parent == l;
      const bool from_parent = b.parent && *b.parent == *prev;
      if (!from_child && !from_parent) throw DisconnectedPath(*prev + " -> " + l);
    }
    if (i + 1 == path.size()) {
      segment(l, from_child ? 1.0 : 0.0, s.final_progress,
              from_child ? prev : std::nullopt, true);
      break;
    }
    const Label& next = path[i + 1];
    const Branch& nb = graph.branch(next);
    if (nb.parent && *nb.parent == l) {
      if (from_child) {
        segment(l, 1.0, s.retreat_progress, prev, false);
        dwell(l, s.retreat_progress);
        segment(l, s.retreat_progress, 1.0, next, false);
      } else {
        segment(l, 0.0, 1.0, next, false);
      }
    } else if (b.parent && *b.parent == next) {
      if (from_child) {
        segment(l, 1.0, 0.0, prev, false);
      } else {
        segment(l, 0.0, s.turnaround_progress, std::nullopt, false);
        dwell(l, s.turnaround_progress);
        segment(l, s.turnaround_progress, 0.0, std::nullopt, false);
      }
    } else {
      throw DisconnectedPath(l + " -> " + next);
    }
  }

  if (s.frames) {
    if (static_cast<int>(poses.size()) > *s.frames) {
      poses.resize(*s.frames);
    } else {
      while (static_cast<int>(poses.size()) < *s.frames) poses.push_back(poses.back());
    }
  }
  return poses;
}

std::vector<GroundTruthLumen> true_lumens(const SimScenario& s, const AirwayGraph& graph,
                                          const SimPose& pose, double roll) {
  const double w = s.image_size;
  const Vec2 center(w / 2.0, w / 2.0);
  const double size = s.enclosure_fraction * w * std::pow(1.0 / s.radius_decay, pose.progress);
  const GraphParams params;

  auto image_dirs = [&](const Label& l) {
    std::vector<std::pair<Label, Vec2>> out;
    for (const auto& e : project_children(graph, l, roll, params).entries) {
      if (e.weight > 0.0 && !e.degenerate) out.push_back({e.child, to_image(e.dir)});
    }
    return out;
  };
  auto in_image = [&](const Vec2& c) {
    return c.x() >= 0.0 && c.x() <= w && c.y() >= 0.0 && c.y() <= w;
  };

  Vec2 view = center;
  if (pose.target) {
    for (const auto& [child, dir] : image_dirs(pose.branch)) {
      if (child == *pose.target) {
        const double t = smoothstep((pose.progress - s.turn_start) / (1.0 - s.turn_start));
        view -= t * s.child_offset * size * dir;
      }
    }
  }

  std::vector<GroundTruthLumen> out;
  if (pose.progress <= s.enclosure_drop && in_image(view)) {
    out.push_back({0, pose.branch, make_box(view, size, branch_aspect(s, pose.branch))});
  }
  struct Item {
    Label label;
    Vec2 c;
    double size;
  };
  std::deque<Item> queue{{pose.branch, view, size}};
  while (!queue.empty()) {
    const Item it = queue.front();
    queue.pop_front();
    const double child_size = s.radius_decay * it.size;
    if (child_size < s.min_box_px) continue;
    for (const auto& [child, dir] : image_dirs(it.label)) {
      const Vec2 c = it.c + s.child_offset * it.size * dir;
      if (in_image(c)) out.push_back({0, child, make_box(c, child_size, branch_aspect(s, child))});
      queue.push_back({child, c, child_size});
    }
  }
  return out;
}

std::map<Label, int> branch_ids(const AirwayGraph& graph) {
  std::map<Label, int> ids;
  int next = 1;
  for (const auto& l : graph.labels()) ids[l] = next++;
  return ids;
}

SimStream render_frames(const SimScenario& s, const AirwayGraph& graph) {
  const auto poses = plan_trajectory(s, graph);
  const auto ids = branch_ids(graph);
  std::map<Label, Embedding> bases;
  for (const auto& l : graph.labels()) bases[l] = branch_embedding(s, l);
  const double w = s.image_size;
  const auto& n = s.noise;

  SimStream out;
  out.packets.reserve(poses.size());
  out.truth.reserve(poses.size());
  for (std::size_t f = 0; f < poses.size(); ++f) {
    const int frame = static_cast<int>(f);
    const double roll = roll_at(s, frame);
    std::mt19937_64 rng(mix(mix(s.seed, kFrameStream), f));

    GroundTruthFrame gt;
    gt.frame = frame;
    gt.branch = poses[f].branch;
    gt.roll = roll;
    gt.lumens = true_lumens(s, graph, poses[f], roll);
    for (auto& l : gt.lumens) l.id = ids.at(l.label);

    FramePacket packet;
    packet.frame = frame;
    packet.handle = frame;
    for (const auto& l : gt.lumens) {
      // Draw every variate so that one lumen's dropout does not shift the rest.
      const bool missed = uniform(rng, 0.0, 1.0) < n.fn_rate;
      const double dx = gaussian(rng, n.center_jitter_px);
      const double dy = gaussian(rng, n.center_jitter_px);
      const double sw = std::max(0.2, 1.0 + gaussian(rng, n.size_jitter));
      const double sh = std::max(0.2, 1.0 + gaussian(rng, n.size_jitter));
      const double score = uniform(rng, n.true_score_lo, std::nextafter(n.true_score_hi, 2.0));
      Embedding e = bases.at(l.label);
      for (int i = 0; i < e.size(); ++i) e[i] += gaussian(rng, n.embedding_std);
      if (missed) continue;
      Detection d;
      d.box = {l.box.x_c + dx, l.box.y_c + dy, l.box.w * sw, l.box.h * sh};
      d.score = score;
      d.embedding = e.normalized();
      packet.detections.push_back(std::move(d));
    }
    const int clutter =
        n.fp_rate > 0.0 ? std::poisson_distribution<int>(n.fp_rate)(rng) : 0;
    for (int k = 0; k < clutter; ++k) {
      Detection d;
      const double size = uniform(rng, s.min_box_px, 0.25 * w);
      d.box = make_box(Vec2(uniform(rng, 0.0, w), uniform(rng, 0.0, w)), size,
                       uniform(rng, 0.7, 1.3));
      d.score = uniform(rng, n.fp_score_lo, std::nextafter(n.fp_score_hi, 2.0));
      Embedding e(s.embedding_dim);
      for (int i = 0; i < s.embedding_dim; ++i) e[i] = gaussian(rng, 1.0);
      d.embedding = e.normalized();
      packet.detections.push_back(std::move(d));
    }
    out.packets.push_back(std::move(packet));
    out.truth.push_back(std::move(gt));
  }
  return out;
}

SimFeatureMatcher::SimFeatureMatcher(std::vector<GroundTruthFrame> truth, double base,
                                     double noise_std, std::uint64_t seed)
    : base_(base), noise_std_(noise_std), seed_(seed) {
  for (auto& t : truth) {
    const int f = t.frame;
    truth_.emplace(f, std::move(t));
  }
}

const GroundTruthFrame& SimFeatureMatcher::lookup(std::int64_t handle) const {
  auto it = truth_.find(static_cast<int>(handle));
  if (it == truth_.end()) throw ProviderFailure("no ground truth for frame " + std::to_string(handle));
  return it->second;
}

MatchReport SimFeatureMatcher::match(const FrameRef& keyframe, const FrameRef& current) {
  const GroundTruthFrame& a = lookup(keyframe.handle);
  const GroundTruthFrame& b = lookup(current.handle);
  std::set<Label> la;
  std::set<Label> lb;
  for (const auto& l : a.lumens) la.insert(l.label);
  for (const auto& l : b.lumens) lb.insert(l.label);
  std::vector<Label> shared;
  std::set_intersection(la.begin(), la.end(), lb.begin(), lb.end(), std::back_inserter(shared));
  MatchReport report;
  if (shared.empty()) return report;
  std::set<Label> all = la;
  all.insert(lb.begin(), lb.end());
  const double jaccard = double(shared.size()) / double(all.size());

  std::mt19937_64 rng(mix(mix(seed_, static_cast<std::uint64_t>(keyframe.handle)),
                          static_cast<std::uint64_t>(current.handle)));
  const long long count = std::max<long long>(
      0, static_cast<long long>(std::floor(base_ * jaccard)) +
             std::llround(gaussian(rng, noise_std_)));

  auto box_of = [](const GroundTruthFrame& g, const Label& l) {
    for (const auto& x : g.lumens) {
      if (x.label == l) return x.box;
    }
    return BoundingBox{};
  };
  auto smallest = [](const GroundTruthFrame& g, const Vec2& p) -> const Label* {
    const GroundTruthLumen* best = nullptr;
    for (const auto& x : g.lumens) {
      if (x.box.contains(p) && (!best || x.box.area() < best->box.area())) best = &x;
    }
    return best ? &best->label : nullptr;
  };

  for (long long k = 0; k < count; ++k) {
    const Label& l = shared[static_cast<std::size_t>(k) % shared.size()];
    const BoundingBox ba = box_of(a, l);
    const BoundingBox bb = box_of(b, l);
    for (int attempt = 0; attempt < 64; ++attempt) {
      const double u = uniform(rng, -0.5, 0.5);
      const double v = uniform(rng, -0.5, 0.5);
      const Vec2 pa(ba.x_c + u * ba.w, ba.y_c + v * ba.h);
      const Vec2 pb(bb.x_c + u * bb.w, bb.y_c + v * bb.h);
      const Label* sa = smallest(a, pa);
      const Label* sb = smallest(b, pb);
      if (sa && sb && *sa == l && *sb == l) {
        report.correspondences.push_back({pa, pb});
        break;
      }
    }
  }
  report.pair_count = report.correspondences.size();
  return report;
}

}  // namespace lumentrack
