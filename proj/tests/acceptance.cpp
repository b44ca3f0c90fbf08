// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "json.hpp"
#include "lumentrack/association.hpp"
#include "lumentrack/config.hpp"
#include "lumentrack/engine.hpp"
#include "lumentrack/io.hpp"
#include "lumentrack/metrics.hpp"
#include "lumentrack/sim.hpp"
#include "oracles.hpp"

using namespace lumentrack;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

int run(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lumentrack_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Noisy scenario shared by criteria 2, 3 and 6: a descent to a
// third-generation branch with roll plateaus at 0, 45 and -90 degrees.
SimScenario descent(std::uint64_t seed, bool noisy) {
  SimScenario s;
  s.seed = seed;
  s.generations = 4;
  s.path = {"trachea", "RMB", "RMB.1", "RMB.1.2"};
  s.speed_mm_per_frame = 0.5;
  s.roll = {{0, 0}, {155, 0}, {185, 45}, {250, 45}, {320, -90}};
  if (noisy) {
    s.noise.center_jitter_px = 2;
    s.noise.fn_rate = 0.05;
    s.noise.fp_rate = 0.1;
    s.noise.embedding_std = 0.1;
  }
  return s;
}

struct RunScore {
  double loc = 0.0;
  double idf1 = 0.0;
  double roll_mean_abs = 0.0;  // radians, over initialized frames
  double roll_max_abs = 0.0;
  long long idsw = 0;
  double mota = 0.0;
};

RunScore score(const SimScenario& s, const EngineConfig& cfg) {
  const AirwayGraph g = generate_tree(s);
  const SimStream st = render_frames(s, g);
  SimFeatureMatcher matcher(st.truth, cfg.matcher.sim_base, cfg.matcher.sim_noise_std,
                            cfg.matcher.sim_seed);
  const auto out = run_stream(g, cfg, st.packets, &matcher);
  std::vector<TrackFrame> tracks;
  std::vector<Label> pred, truth;
  RunScore r;
  int n = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    tracks.push_back(to_track_frame(out[i]));
    pred.push_back(out[i].branch);
    truth.push_back(st.truth[i].branch);
    if (out[i].initialized) {
      const double e = std::abs(wrap_angle(out[i].roll - st.truth[i].roll));
      r.roll_mean_abs += e;
      r.roll_max_abs = std::max(r.roll_max_abs, e);
      ++n;
    }
  }
  if (n > 0) r.roll_mean_abs /= n;
  const MetricsReport m = evaluate_mot(join_frames(tracks, st.truth), 0.5, {0.5});
  r.loc = evaluate_localization(pred, truth, g).accuracy;
  r.idf1 = m.identity.idf1;
  r.idsw = m.clear.idsw;
  r.mota = m.clear.mota;
  return r;
}

// 1. simulate -> track -> evaluate through the command-line tool.
Verdict noiseless_closure() {
  const fs::path dir = scratch("c1");
  const std::string cli = LUMENTRACK_CLI;
  SimScenario s;
  s.seed = 1;
  s.generations = 4;
  s.path = {"trachea", "RMB", "RMB.1", "RMB.1.2"};
  s.speed_mm_per_frame = 0.125;
  s.frames = 2000;
  atomic_write((dir / "scenario.json").string(), scenario_document(s));
  const std::string sim = (dir / "sim").string();
  const std::string pred = (dir / "pred").string();
  const std::string eval = (dir / "eval").string();
  if (run(cli + " simulate --scenario " + (dir / "scenario.json").string() + " --out " + sim) != 0) {
    return {false, "simulate failed"};
  }
  const auto t0 = std::chrono::steady_clock::now();
  if (run(cli + " track --graph " + sim + "/airway.graph.json --detections " + sim +
          "/detections.jsonl --truth " + sim + "/truth.jsonl --out " + pred) != 0) {
    return {false, "track failed"};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (run(cli + " evaluate --pred " + pred + " --truth " + sim + "/truth.jsonl --graph " + sim +
          "/airway.graph.json --out " + eval) != 0) {
    return {false, "evaluate failed"};
  }
  const auto m = nlohmann::json::parse(read_file(eval + "/metrics.json"));
  const double loc = m.at("loc_accuracy").get<double>();
  const double mota = m.at("MOTA").get<double>();
  const long long idsw = m.at("IDSW").get<long long>();
  const long long frames = m.at("loc_frames").get<long long>();
  fs::remove_all(dir);
  const bool ok = loc == 1.0 && mota == 1.0 && idsw == 0 && frames == 2000 && secs < 5.0;
  return {ok, fmt("frames=%lld loc_accuracy=%.6f MOTA=%.6f IDSW=%lld track_time=%.3fs (< 5s)", frames,
                  loc, mota, idsw, secs)};
}

// 2. Noisy robustness over ten seeds.
Verdict noisy_robustness() {
  double loc = 0.0, idf1 = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const RunScore r = score(descent(seed, true), EngineConfig{});
    loc += r.loc / 10.0;
    idf1 += r.idf1 / 10.0;
  }
  return {loc >= 0.90 && idf1 >= 0.85,
          fmt("mean loc_accuracy=%.4f (>= 0.90) mean IDF1=%.4f (>= 0.85)", loc, idf1)};
}

// 3. Ablation ordering: LC >= full >= {no Re-ID, no Kalman}, per seed.
Verdict ablation_ordering() {
  EngineConfig lc;
  EngineConfig full;
  full.loop_closure.enabled = false;
  EngineConfig no_reid = full;
  no_reid.tracker.reid_weight = 0.0;
  EngineConfig no_kalman = full;
  no_kalman.tracker.use_kalman = false;

  int lc_idf = 0, lc_loc = 0, reid_idf = 0, reid_loc = 0, kal_idf = 0, kal_loc = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const SimScenario s = descent(seed, true);
    const RunScore a = score(s, lc), b = score(s, full), c = score(s, no_reid), d = score(s, no_kalman);
    lc_idf += a.idf1 >= b.idf1;
    lc_loc += a.loc >= b.loc;
    reid_idf += b.idf1 >= c.idf1;
    reid_loc += b.loc >= c.loc;
    kal_idf += b.idf1 >= d.idf1;
    kal_loc += b.loc >= d.loc;
  }
  const bool ok = std::min({lc_idf, lc_loc, reid_idf, reid_loc, kal_idf, kal_loc}) >= 8;
  return {ok, fmt("seeds holding (of 10): LC>=full idf1 %d loc %d; full>=noReID idf1 %d loc %d; "
                  "full>=noKalman idf1 %d loc %d (each >= 8)",
                  lc_idf, lc_loc, reid_idf, reid_loc, kal_idf, kal_loc)};
}

// 4. Assignment solver against brute force.
Verdict assignment_oracle() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> dim(0, 8);
  std::uniform_real_distribution<double> frac(0.0, 0.6);
  int bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t rows = dim(rng), cols = dim(rng);
    const CostMatrix c = oracle::random_dyadic_matrix(rng, rows, cols, frac(rng));
    const double gate = (i % 4 == 0) ? CostMatrix::kGated : double(1 + i % 12) / 2.0;
    const Assignment a = solve(c, gate);
    const auto best = oracle::brute_force_assignment(c, gate);
    if (std::isfinite(gate)) {
      bad += assignment_objective(c, gate, a) != best.objective;
    } else {
      double cost = 0.0;
      for (const auto& [r, k] : a.pairs) cost += c(r, k);
      bad += a.pairs.size() != best.cardinality || cost != best.cost;
    }
  }
  return {bad == 0, fmt("1000 matrices up to 8x8, %d mismatches (exact)", bad)};
}

// 5. Metrics against enumeration oracles.
Verdict metrics_oracle() {
  std::mt19937_64 rng(5);
  int mota_bad = 0, idf1_bad = 0, hota_bad = 0;
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto fs_ = oracle::random_micro_sequence(rng);
    const ClearResult c = evaluate_clear(fs_, 0.5);
    const oracle::ClearCounts o = oracle::clear_by_enumeration(fs_, 0.5);
    const bool counts = c.fp == o.fp && c.fn == o.fn && c.idsw == o.idsw && c.gt == o.gt;
    mota_bad += !counts || (o.gt > 0 && c.mota != o.mota());
    idf1_bad += evaluate_identity(fs_, 0.5).idf1 != oracle::idf1_by_enumeration(fs_, 0.5);
    const double h = evaluate_hota(fs_, {0.5}).hota;
    const double diff = std::abs(h - oracle::hota_by_definition(fs_, 0.5));
    worst = std::max(worst, diff);
    hota_bad += diff > 1e-9;
  }
  return {mota_bad + idf1_bad + hota_bad == 0,
          fmt("200 micro-sequences: MOTA mismatches %d, IDF1 mismatches %d (exact); "
              "HOTA max |diff| %.2e (<= 1e-9)",
              mota_bad, idf1_bad, worst)};
}

// 6. Roll chain through the 0 / 45 / -90 degree plateaus.
Verdict roll_chain() {
  double noiseless_max = 0.0, noisy_mean = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    noiseless_max = std::max(noiseless_max, score(descent(seed, false), EngineConfig{}).roll_max_abs);
    noisy_mean += score(descent(seed, true), EngineConfig{}).roll_mean_abs / 10.0;
  }
  const double deg = 180.0 / kPi;
  return {noiseless_max < 1e-6 && noisy_mean * deg < 5.0,
          fmt("noiseless max |error|=%.2e rad (< 1e-6), noisy mean |error|=%.3f deg (< 5)",
              noiseless_max, noisy_mean * deg)};
}

DetectionSubgraph manual_subgraph(const std::vector<std::optional<std::size_t>>& parent) {
  DetectionSubgraph g;
  g.parent = parent;
  g.children.assign(parent.size(), {});
  g.level.assign(parent.size(), 0);
  g.pruned.assign(parent.size(), 0);
  for (std::size_t i = 0; i < parent.size(); ++i) {
    if (parent[i]) {
      g.children[*parent[i]].push_back(i);
    } else {
      g.primaries.push_back(i);
    }
    int lvl = 1;
    for (auto p = parent[i]; p; p = parent[*p]) ++lvl;
    g.level[i] = lvl;
  }
  return g;
}

// 7. The three voting examples.
Verdict vote_semantics() {
  const AirwayGraph g = AirwayGraph::load_and_normalize(fixtures::symmetric_tree());
  const std::vector<std::optional<Label>> two{Label("LMB"), Label("RMB")};
  const auto a = localize(manual_subgraph({std::nullopt, std::nullopt}), two, g);
  const std::vector<std::optional<Label>> one{Label("RMB")};
  const auto b = localize(manual_subgraph({std::nullopt}), one, g);
  const std::vector<std::optional<Label>> three{Label("RMB"), Label("RMB.1"), Label("RMB.2")};
  const auto c = localize(manual_subgraph({std::nullopt, 0, 0}), three, g);
  const bool ok = a.branch == "trachea" && a.votes == std::map<Label, int>{{"trachea", 2}} &&
                  b.branch == "RMB" && b.votes == std::map<Label, int>{{"RMB", 1}} &&
                  c.branch == "RMB" && c.votes == std::map<Label, int>{{"RMB", 3}};
  return {ok, fmt("n=2 -> %s, n=1 RMB -> %s, unanimous three-node -> %s (%d votes)", a.branch.c_str(),
                  b.branch.c_str(), c.branch.c_str(), c.votes.count("RMB") ? c.votes.at("RMB") : 0)};
}

// 8. Retreat and revisit with the simulated matcher.
Verdict loop_closure_pair() {
  SimScenario s;
  s.seed = 3;
  s.generations = 4;
  s.path = {"trachea", "RMB", "RMB.1", "RMB", "RMB.1"};
  s.min_box_px = 30;
  s.retreat_progress = 0.1;
  s.dwell_frames = 40;
  const AirwayGraph g = generate_tree(s);
  const SimStream st = render_frames(s, g);

  // end of the first RMB.1 visit
  std::size_t first_end = 0;
  bool in_first = false;
  for (std::size_t i = 0; i < st.truth.size(); ++i) {
    if (st.truth[i].branch == "RMB.1") {
      in_first = true;
      first_end = i;
    } else if (in_first) {
      break;
    }
  }
  auto ids_at = [&](const std::vector<FrameOutput>& out, std::size_t i) {
    // noiseless detections come in truth order
    std::map<Label, int> ids;
    for (std::size_t k = 0; k < out[i].tracks.size(); ++k) ids[st.truth[i].lumens[k].label] = out[i].tracks[k].id;
    return ids;
  };
  std::map<Label, int> first[2], revisit[2];
  for (int on = 0; on < 2; ++on) {
    EngineConfig cfg;
    cfg.loop_closure.enabled = on == 1;
    SimFeatureMatcher m(st.truth, 200, 4, 0);
    const auto out = run_stream(g, cfg, st.packets, &m);
    first[on] = ids_at(out, first_end);
    revisit[on] = ids_at(out, out.size() - 1);
  }
  bool on_equal = !revisit[1].empty(), off_differ = !revisit[0].empty();
  std::string detail;
  for (const auto& [label, id] : revisit[1]) {
    if (label == "RMB.1") continue;  // the camera sits inside it; only the openings are revisited
    on_equal = on_equal && first[1].count(label) && first[1].at(label) == id;
    off_differ = off_differ && first[0].count(label) && first[0].at(label) != revisit[0].at(label);
    detail += fmt(" %s first=%d on=%d off=%d", label.c_str(), first[1].count(label) ? first[1].at(label) : -1,
                  id, revisit[0].count(label) ? revisit[0].at(label) : -1);
  }
  return {on_equal && off_differ, "revisited openings:" + detail};
}

// 9. Engine throughput with 20 lumens per frame.
Verdict throughput() {
  SimScenario s;
  s.generations = 6;
  const AirwayGraph g = generate_tree(s);
  // two primaries, each holding nine nested openings, drifting slowly
  const int frames = 3000;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 0.5);
  std::vector<FramePacket> packets;
  for (int f = 0; f < frames; ++f) {
    FramePacket p;
    p.frame = f;
    const double drift = 10.0 * std::sin(f * 0.01);
    for (int side = 0; side < 2; ++side) {
      const double cx = 150.0 + 200.0 * side + drift;
      p.detections.push_back({{cx + n(rng), 250 + n(rng), 160, 160}, 0.9, std::nullopt});
      for (int k = 0; k < 9; ++k) {
        const double a = 2.0 * kPi * k / 9.0;
        p.detections.push_back(
            {{cx + 50 * std::cos(a) + n(rng), 250 + 50 * std::sin(a) + n(rng), 24, 24}, 0.8, std::nullopt});
      }
    }
    packets.push_back(std::move(p));
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto out = run_stream(g, EngineConfig{}, packets);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double fps = frames / secs;
  const bool init = out.back().initialized;
  return {fps >= 1000.0 && init,
          fmt("%d frames x 20 lumens in %.3fs = %.0f frames/s (>= 1000), initialized=%d", frames, secs,
              fps, int(init))};
}

// 10. Two track runs on identical inputs.
Verdict determinism() {
  const fs::path dir = scratch("c10");
  const std::string cli = LUMENTRACK_CLI;
  atomic_write((dir / "scenario.json").string(), scenario_document(descent(7, true)));
  const std::string sim = (dir / "sim").string();
  if (run(cli + " simulate --scenario " + (dir / "scenario.json").string() + " --out " + sim) != 0) {
    return {false, "simulate failed"};
  }
  const std::string base = cli + " track --graph " + sim + "/airway.graph.json --detections " + sim +
                           "/detections.jsonl --truth " + sim + "/truth.jsonl --out ";
  if (run(base + (dir / "a").string()) != 0 || run(base + (dir / "b").string()) != 0) {
    return {false, "track failed"};
  }
  bool same = true;
  std::size_t bytes = 0;
  for (const char* name : {"tracks.jsonl", "localization.jsonl"}) {
    const std::string a = read_file((dir / "a" / name).string());
    const std::string b = read_file((dir / "b" / name).string());
    same = same && a == b && !a.empty();
    bytes += a.size();
  }
  fs::remove_all(dir);
  return {same, fmt("tracks.jsonl and localization.jsonl identical (%zu bytes)", bytes)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"noiseless closure", noiseless_closure}, {"noisy robustness", noisy_robustness},
      {"ablation ordering", ablation_ordering}, {"assignment oracle", assignment_oracle},
      {"metrics oracle", metrics_oracle},       {"roll chain", roll_chain},
      {"vote semantics", vote_semantics},       {"loop-closure pair", loop_closure_pair},
      {"throughput", throughput},               {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s criterion %zu (%s): %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
