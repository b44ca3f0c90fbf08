// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: simulate -> track -> evaluate.

#include <filesystem>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "lumentrack/config.hpp"
#include "lumentrack/engine.hpp"
#include "lumentrack/errors.hpp"
#include "lumentrack/io.hpp"
#include "lumentrack/metrics.hpp"
#include "lumentrack/sim.hpp"

namespace fs = std::filesystem;
using namespace lumentrack;

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create directory " + dir);
}

std::string join(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

bool on_off(const std::string& v, const char* flag) {
  if (v == "on") return true;
  if (v == "off") return false;
  throw ConfigError(std::string(flag) + " takes on or off");
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_dir) {
  const SimScenario s = read_scenario(scenario_path);
  const AirwayGraph graph = generate_tree(s);
  const SimStream stream = render_frames(s, graph);
  ensure_dir(out_dir);
  atomic_write(join(out_dir, "detections.jsonl"), detections_jsonl(stream.packets));
  atomic_write(join(out_dir, "truth.jsonl"), truth_jsonl(stream.truth));
  atomic_write(join(out_dir, "airway.graph.json"), graph_document(graph));
  return 0;
}

struct TrackArgs {
  std::string graph;
  std::string detections;
  std::string config;
  std::string out;
  std::string loop_closure;
  std::string reid;
  std::string truth;
};

int cmd_track(const TrackArgs& a) {
  EngineConfig config = a.config.empty() ? EngineConfig{} : load_config(a.config);
  if (!a.loop_closure.empty()) config.loop_closure.enabled = on_off(a.loop_closure, "--loop-closure");
  if (!a.reid.empty() && !on_off(a.reid, "--reid")) config.tracker.reid_weight = 0.0;
  validate(config);

  const AirwayGraph graph = read_graph(a.graph);
  const auto packets = read_detections(a.detections);

  std::unique_ptr<FeatureMatcher> matcher;
  switch (config.matcher.provider) {
    case MatcherProvider::Simulated:
      if (!a.truth.empty()) {
        matcher = std::make_unique<SimFeatureMatcher>(read_truth(a.truth), config.matcher.sim_base,
                                                      config.matcher.sim_noise_std,
                                                      config.matcher.sim_seed);
      }
      break;
    case MatcherProvider::ExternalProcess:
      matcher = std::make_unique<ExternalProcessMatcher>(config.matcher.external_command);
      break;
    case MatcherProvider::None:
      break;
  }

  const auto outputs = run_stream(graph, config, packets, matcher.get());
  std::string tracks;
  std::string loc;
  for (const auto& o : outputs) {
    tracks += track_record(o) + "\n";
    loc += localization_record(o) + "\n";
  }
  ensure_dir(a.out);
  atomic_write(join(a.out, "tracks.jsonl"), tracks);
  atomic_write(join(a.out, "localization.jsonl"), loc);
  return 0;
}

int cmd_evaluate(const std::string& pred_dir, const std::string& truth_path,
                 const std::string& graph_path, const std::string& out_dir,
                 const std::string& config_path) {
  const EngineConfig config = config_path.empty() ? EngineConfig{} : load_config(config_path);
  const AirwayGraph graph = read_graph(graph_path);
  const auto truth = read_truth(truth_path);
  const auto tracks = read_tracks(join(pred_dir, "tracks.jsonl"));
  const auto loc = read_localization(join(pred_dir, "localization.jsonl"));

  EvaluationSummary summary;
  summary.iou = config.evaluation.iou;
  const auto alphas = config.evaluation.hota_alphas.empty() ? default_hota_alphas()
                                                            : config.evaluation.hota_alphas;
  summary.mot = evaluate_mot(join_frames(tracks, truth), config.evaluation.iou, alphas);

  if (loc.size() != truth.size()) throw MisalignedFrames("localization and truth differ in length");
  std::vector<Label> pred_labels;
  std::vector<Label> true_labels;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (loc[i].frame != truth[i].frame) throw MisalignedFrames("localization frame mismatch");
    pred_labels.push_back(loc[i].branch);
    true_labels.push_back(truth[i].branch);
  }
  summary.localization = evaluate_localization(pred_labels, true_labels, graph);

  ensure_dir(out_dir);
  atomic_write(join(out_dir, "metrics.json"), metrics_document(summary));
  atomic_write(join(out_dir, "branch_accuracy.csv"), branch_accuracy_csv(summary.localization));
  std::cout << metrics_document(summary);
  return 0;
}

int cmd_graph_validate(const std::string& path) {
  const AirwayGraph g = read_graph(path);
  std::cout << "{\"v\":1,\"valid\":true,\"branches\":" << g.size()
            << ",\"max_generation\":" << g.max_generation() << "}\n";
  return 0;
}

void emit(const std::string& out, const std::string& content) {
  if (out.empty()) {
    std::cout << content;
  } else {
    atomic_write(out, content);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lumentrack: lumen tracking and branch-level localization"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out;
  auto* simulate = app.add_subcommand("simulate", "render a synthetic bronchoscopy stream");
  simulate->add_option("--scenario", scenario, "scenario JSON")->required();
  simulate->add_option("--out", out, "output directory")->required();

  TrackArgs ta;
  auto* track = app.add_subcommand("track", "run the tracking and localization engine");
  track->add_option("--graph", ta.graph, "airway.graph.json")->required();
  track->add_option("--detections", ta.detections, "detections.jsonl")->required();
  track->add_option("--config", ta.config, "engine configuration");
  track->add_option("--out", ta.out, "output directory")->required();
  track->add_option("--loop-closure", ta.loop_closure, "on|off");
  track->add_option("--reid", ta.reid, "on|off (off sets the appearance weight to 0)");
  track->add_option("--truth", ta.truth, "truth.jsonl backing the simulated matcher");

  std::string pred;
  std::string truth;
  std::string graph;
  std::string config;
  auto* evaluate = app.add_subcommand("evaluate", "score tracks and localization");
  evaluate->add_option("--pred", pred, "directory written by track")->required();
  evaluate->add_option("--truth", truth, "truth.jsonl")->required();
  evaluate->add_option("--graph", graph, "airway.graph.json")->required();
  evaluate->add_option("--out", out, "report directory")->required();
  evaluate->add_option("--config", config, "engine configuration (evaluation section)");

  std::string graph_in;
  auto* graph_cmd = app.add_subcommand("graph", "airway graph utilities");
  graph_cmd->require_subcommand(1);
  auto* graph_validate = graph_cmd->add_subcommand("validate", "check airway graph invariants");
  graph_validate->add_option("--in", graph_in, "airway.graph.json")->required();

  auto* config_cmd = app.add_subcommand("config", "configuration utilities");
  config_cmd->require_subcommand(1);
  auto* config_init = config_cmd->add_subcommand("init", "write the commented defaults");
  config_init->add_option("--out", out, "destination (stdout if omitted)");

  auto* scenario_cmd = app.add_subcommand("scenario", "scenario utilities");
  scenario_cmd->require_subcommand(1);
  auto* scenario_init = scenario_cmd->add_subcommand("init", "write a default scenario");
  scenario_init->add_option("--out", out, "destination (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*simulate) return cmd_simulate(scenario, out);
    if (*track) return cmd_track(ta);
    if (*evaluate) return cmd_evaluate(pred, truth, graph, out, config);
    if (*graph_validate) return cmd_graph_validate(graph_in);
    if (*config_init) {
      emit(out, commented_default_config());
      return 0;
    }
    if (*scenario_init) {
      emit(out, scenario_document(SimScenario{}));
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << error_record(e.code(), e.what()) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << error_record("InternalError", e.what()) << "\n";
    return 3;
  }
  return 1;
}
