// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "lumentrack/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

#include <unistd.h>

#include "json.hpp"
#include "lumentrack/errors.hpp"

namespace lumentrack {

using nlohmann::json;

namespace {

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw FormatError(what + ": " + e.what());
  }
}

json parse_record(const std::string& line) {
  json j = parse_json(line, "malformed record");
  if (!j.is_object()) throw FormatError("record must be a JSON object");
  if (!j.contains("v") || !j["v"].is_number_integer()) throw FormatError("record lacks version field v");
  if (j["v"].get<int>() != kFormatVersion) {
    throw FormatError("unsupported record version " + j["v"].dump());
  }
  return j;
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("missing field ") + key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(std::string("bad value for ") + key);
  }
}

double number(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw FormatError(std::string("missing or non-numeric field ") + key);
  }
  return j.at(key).get<double>();
}

int integer(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_integer()) {
    throw FormatError(std::string("missing or non-integer field ") + key);
  }
  return j.at(key).get<int>();
}

void put_box(json& j, const BoundingBox& b) {
  j["cx"] = b.x_c;
  j["cy"] = b.y_c;
  j["w"] = b.w;
  j["h"] = b.h;
}

BoundingBox get_box(const json& j) {
  BoundingBox b{number(j, "cx"), number(j, "cy"), number(j, "w"), number(j, "h")};
  if (!std::isfinite(b.x_c) || !std::isfinite(b.y_c) || !(b.w > 0) || !(b.h > 0) ||
      !std::isfinite(b.w) || !std::isfinite(b.h)) {
    throw FormatError("box must be finite with positive size");
  }
  return b;
}

template <typename T>
std::vector<T> read_jsonl(const std::string& path, const std::function<T(const std::string&)>& parse) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path);
  std::vector<T> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse(line));
    } catch (const FormatError& e) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string vec3_check(const json& j, Vec3& v) {
  if (!j.is_array() || j.size() != 3) return "must be [x, y, z]";
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) return "must be numeric";
    v[i] = j[i].get<double>();
  }
  return {};
}

}  // namespace

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw FormatError("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw FormatError("cannot move output into place: " + path);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// detections

std::string detection_record(const FramePacket& p) {
  json j;
  j["v"] = kFormatVersion;
  j["frame"] = p.frame;
  json dets = json::array();
  for (const auto& d : p.detections) {
    json x;
    put_box(x, d.box);
    x["score"] = d.score;
    if (d.embedding) {
      x["emb"] = std::vector<double>(d.embedding->data(), d.embedding->data() + d.embedding->size());
    }
    dets.push_back(std::move(x));
  }
  j["dets"] = std::move(dets);
  if (p.handle) j["handle"] = *p.handle;
  return j.dump();
}

FramePacket parse_detection_record(const std::string& line) {
  const json j = parse_record(line);
  FramePacket p;
  p.frame = integer(j, "frame");
  if (j.contains("handle")) p.handle = field<std::int64_t>(j, "handle");
  if (!j.contains("dets") || !j["dets"].is_array()) throw FormatError("missing dets array");
  for (const auto& x : j["dets"]) {
    Detection d;
    d.box = get_box(x);
    d.score = number(x, "score");
    if (x.contains("emb")) {
      const auto v = field<std::vector<double>>(x, "emb");
      d.embedding = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    p.detections.push_back(std::move(d));
  }
  return p;
}

std::string detections_jsonl(const std::vector<FramePacket>& packets) {
  std::string out;
  for (const auto& p : packets) out += detection_record(p) + "\n";
  return out;
}

std::vector<FramePacket> read_detections(const std::string& path) {
  auto packets = read_jsonl<FramePacket>(path, parse_detection_record);
  for (std::size_t i = 1; i < packets.size(); ++i) {
    if (packets[i].frame <= packets[i - 1].frame) {
      throw FormatError(path + ": frame indices must strictly increase");
    }
  }
  return packets;
}

// truth

std::string truth_record(const GroundTruthFrame& f) {
  json j;
  j["v"] = kFormatVersion;
  j["frame"] = f.frame;
  j["branch"] = f.branch;
  j["roll"] = f.roll;
  json gts = json::array();
  for (const auto& l : f.lumens) {
    json x;
    x["id"] = l.id;
    x["label"] = l.label;
    put_box(x, l.box);
    gts.push_back(std::move(x));
  }
  j["gts"] = std::move(gts);
  return j.dump();
}

GroundTruthFrame parse_truth_record(const std::string& line) {
  const json j = parse_record(line);
  GroundTruthFrame f;
  f.frame = integer(j, "frame");
  f.branch = field<std::string>(j, "branch");
  f.roll = number(j, "roll");
  if (!j.contains("gts") || !j["gts"].is_array()) throw FormatError("missing gts array");
  for (const auto& x : j["gts"]) {
    f.lumens.push_back({integer(x, "id"), field<std::string>(x, "label"), get_box(x)});
  }
  return f;
}

std::string truth_jsonl(const std::vector<GroundTruthFrame>& frames) {
  std::string out;
  for (const auto& f : frames) out += truth_record(f) + "\n";
  return out;
}

std::vector<GroundTruthFrame> read_truth(const std::string& path) {
  return read_jsonl<GroundTruthFrame>(path, parse_truth_record);
}

// tracks and localization

std::string track_record(const FrameOutput& out) {
  json j;
  j["v"] = kFormatVersion;
  j["frame"] = out.frame;
  json tracks = json::array();
  for (const auto& t : out.tracks) {
    json x;
    x["id"] = t.id;
    put_box(x, t.box);
    if (t.label) x["label"] = *t.label;
    tracks.push_back(std::move(x));
  }
  j["tracks"] = std::move(tracks);
  return j.dump();
}

TrackFrame parse_track_record(const std::string& line) {
  const json j = parse_record(line);
  TrackFrame f;
  f.frame = integer(j, "frame");
  if (!j.contains("tracks") || !j["tracks"].is_array()) throw FormatError("missing tracks array");
  for (const auto& x : j["tracks"]) {
    EvalBox b;
    b.id = integer(x, "id");
    b.box = get_box(x);
    if (x.contains("label")) b.label = field<std::string>(x, "label");
    f.tracks.push_back(std::move(b));
  }
  return f;
}

std::vector<TrackFrame> read_tracks(const std::string& path) {
  return read_jsonl<TrackFrame>(path, parse_track_record);
}

std::string localization_record(const FrameOutput& out) {
  json j;
  j["v"] = kFormatVersion;
  j["frame"] = out.frame;
  j["branch"] = out.branch;
  j["votes"] = json::object();
  for (const auto& [label, n] : out.votes) j["votes"][label] = n;
  return j.dump();
}

LocalizationFrame parse_localization_record(const std::string& line) {
  const json j = parse_record(line);
  LocalizationFrame f;
  f.frame = integer(j, "frame");
  f.branch = field<std::string>(j, "branch");
  if (j.contains("votes")) {
    if (!j["votes"].is_object()) throw FormatError("votes must be an object");
    for (const auto& [k, v] : j["votes"].items()) {
      if (!v.is_number_integer()) throw FormatError("vote counts must be integers");
      f.votes[k] = v.get<int>();
    }
  }
  return f;
}

std::vector<LocalizationFrame> read_localization(const std::string& path) {
  return read_jsonl<LocalizationFrame>(path, parse_localization_record);
}

// airway graph

std::string graph_document(const AirwayGraph& graph) {
  json j;
  j["v"] = kFormatVersion;
  j["root"] = graph.root();
  json branches = json::array();
  for (const auto& label : graph.labels()) {
    const Branch& b = graph.branch(label);
    json x;
    x["label"] = b.label;
    x["start"] = {b.start.x(), b.start.y(), b.start.z()};
    x["end"] = {b.end.x(), b.end.y(), b.end.z()};
    if (b.parent) x["parent"] = *b.parent;
    branches.push_back(std::move(x));
  }
  j["branches"] = std::move(branches);
  j["designations"] = {{"trachea", graph.root()}, {"lmb", graph.lmb()}, {"rmb", graph.rmb()}};
  return j.dump(2) + "\n";
}

RawTree parse_graph_document(const std::string& text) {
  const json j = parse_record(text);
  RawTree t;
  if (!j.contains("branches") || !j["branches"].is_array()) throw FormatError("missing branches");
  for (const auto& x : j["branches"]) {
    RawBranch b;
    b.label = field<std::string>(x, "label");
    if (auto err = vec3_check(x.value("start", json()), b.start); !err.empty()) {
      throw FormatError("branch " + b.label + " start " + err);
    }
    if (auto err = vec3_check(x.value("end", json()), b.end); !err.empty()) {
      throw FormatError("branch " + b.label + " end " + err);
    }
    if (x.contains("parent") && !x["parent"].is_null()) b.parent = field<std::string>(x, "parent");
    t.branches.push_back(std::move(b));
  }
  if (!j.contains("designations") || !j["designations"].is_object()) {
    throw FormatError("missing designations");
  }
  const json& d = j["designations"];
  t.trachea = field<std::string>(d, "trachea");
  t.lmb = field<std::string>(d, "lmb");
  t.rmb = field<std::string>(d, "rmb");
  const auto root = field<std::string>(j, "root");
  if (root != t.trachea) throw MalformedTree("root must be the designated trachea");
  return t;
}

AirwayGraph read_graph(const std::string& path) {
  return AirwayGraph::load_and_normalize(parse_graph_document(read_file(path)));
}

// scenario

std::string scenario_document(const SimScenario& s) {
  json j;
  j["v"] = kFormatVersion;
  j["seed"] = s.seed;
  j["generations"] = s.generations;
  j["symmetric"] = s.symmetric;
  j["branch_angle_deg"] = {s.branch_angle_min_deg, s.branch_angle_max_deg};
  j["azimuth_jitter_deg"] = s.azimuth_jitter_deg;
  j["trachea_length_mm"] = s.trachea_length_mm;
  j["length_decay"] = s.length_decay;
  j["radius_decay"] = s.radius_decay;
  j["speed_mm_per_frame"] = s.speed_mm_per_frame;
  j["path"] = s.path;
  j["final_progress"] = s.final_progress;
  j["turnaround_progress"] = s.turnaround_progress;
  j["retreat_progress"] = s.retreat_progress;
  j["dwell_frames"] = s.dwell_frames;
  j["frames"] = s.frames ? json(*s.frames) : json(nullptr);
  j["roll"] = json::array();
  for (const auto& a : s.roll) j["roll"].push_back({a.frame, a.degrees});
  j["image_size"] = s.image_size;
  j["embedding_dim"] = s.embedding_dim;
  j["min_box_px"] = s.min_box_px;
  j["enclosure_fraction"] = s.enclosure_fraction;
  j["child_offset"] = s.child_offset;
  j["enclosure_drop"] = s.enclosure_drop;
  j["turn_start"] = s.turn_start;
  const auto& n = s.noise;
  j["noise"] = {{"center_jitter_px", n.center_jitter_px},
                {"size_jitter", n.size_jitter},
                {"fp_rate", n.fp_rate},
                {"fn_rate", n.fn_rate},
                {"true_score", {n.true_score_lo, n.true_score_hi}},
                {"fp_score", {n.fp_score_lo, n.fp_score_hi}},
                {"embedding_std", n.embedding_std}};
  return j.dump(2) + "\n";
}

SimScenario parse_scenario(const std::string& text) {
  const json j = parse_json(text, "scenario is not valid JSON");
  if (!j.is_object()) throw FormatError("scenario must be a JSON object");
  if (j.contains("v") && (!j["v"].is_number_integer() || j["v"].get<int>() != kFormatVersion)) {
    throw FormatError("unsupported scenario version");
  }
  static const std::set<std::string> known = {
      "v", "seed", "generations", "symmetric", "branch_angle_deg", "azimuth_jitter_deg",
      "trachea_length_mm", "length_decay", "radius_decay", "speed_mm_per_frame", "path",
      "final_progress", "turnaround_progress", "retreat_progress", "dwell_frames", "frames",
      "roll", "image_size", "embedding_dim", "min_box_px", "enclosure_fraction", "child_offset",
      "enclosure_drop", "turn_start", "noise"};
  for (const auto& [k, _] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown scenario key: " + k);
  }
  SimScenario s;
  auto num = [&](const json& o, const char* k, double& dst) {
    if (o.contains(k)) dst = number(o, k);
  };
  auto pair = [&](const json& o, const char* k, double& lo, double& hi) {
    if (!o.contains(k)) return;
    const auto v = field<std::vector<double>>(o, k);
    if (v.size() != 2) throw FormatError(std::string(k) + " must be [lo, hi]");
    lo = v[0];
    hi = v[1];
  };
  if (j.contains("seed")) s.seed = field<std::uint64_t>(j, "seed");
  if (j.contains("generations")) s.generations = integer(j, "generations");
  if (j.contains("symmetric")) s.symmetric = field<bool>(j, "symmetric");
  pair(j, "branch_angle_deg", s.branch_angle_min_deg, s.branch_angle_max_deg);
  num(j, "azimuth_jitter_deg", s.azimuth_jitter_deg);
  num(j, "trachea_length_mm", s.trachea_length_mm);
  num(j, "length_decay", s.length_decay);
  num(j, "radius_decay", s.radius_decay);
  num(j, "speed_mm_per_frame", s.speed_mm_per_frame);
  if (j.contains("path")) s.path = field<std::vector<std::string>>(j, "path");
  num(j, "final_progress", s.final_progress);
  num(j, "turnaround_progress", s.turnaround_progress);
  num(j, "retreat_progress", s.retreat_progress);
  if (j.contains("dwell_frames")) s.dwell_frames = integer(j, "dwell_frames");
  if (j.contains("frames") && !j["frames"].is_null()) s.frames = integer(j, "frames");
  if (j.contains("roll")) {
    if (!j["roll"].is_array()) throw FormatError("roll must be a list of [frame, degrees]");
    for (const auto& a : j["roll"]) {
      if (!a.is_array() || a.size() != 2 || !a[0].is_number_integer() || !a[1].is_number()) {
        throw FormatError("roll anchors must be [frame, degrees]");
      }
      s.roll.push_back({a[0].get<int>(), a[1].get<double>()});
    }
  }
  if (j.contains("image_size")) s.image_size = integer(j, "image_size");
  if (j.contains("embedding_dim")) s.embedding_dim = integer(j, "embedding_dim");
  num(j, "min_box_px", s.min_box_px);
  num(j, "enclosure_fraction", s.enclosure_fraction);
  num(j, "child_offset", s.child_offset);
  num(j, "enclosure_drop", s.enclosure_drop);
  num(j, "turn_start", s.turn_start);
  if (j.contains("noise")) {
    const json& n = j["noise"];
    if (!n.is_object()) throw FormatError("noise must be an object");
    static const std::set<std::string> noise_keys = {"center_jitter_px", "size_jitter", "fp_rate",
                                                     "fn_rate", "true_score", "fp_score",
                                                     "embedding_std"};
    for (const auto& [k, _] : n.items()) {
      if (!noise_keys.count(k)) throw ConfigError("unknown scenario key: noise." + k);
    }
    num(n, "center_jitter_px", s.noise.center_jitter_px);
    num(n, "size_jitter", s.noise.size_jitter);
    num(n, "fp_rate", s.noise.fp_rate);
    num(n, "fn_rate", s.noise.fn_rate);
    pair(n, "true_score", s.noise.true_score_lo, s.noise.true_score_hi);
    pair(n, "fp_score", s.noise.fp_score_lo, s.noise.fp_score_hi);
    num(n, "embedding_std", s.noise.embedding_std);
  }
  validate(s);
  return s;
}

SimScenario read_scenario(const std::string& path) { return parse_scenario(read_file(path)); }

// evaluation outputs

std::string metrics_document(const EvaluationSummary& s) {
  const auto& m = s.mot;
  json j;
  j["v"] = kFormatVersion;
  j["iou_threshold"] = s.iou;
  j["MOTA"] = m.clear.mota;
  j["MOTP"] = m.clear.motp;
  j["IDF1"] = m.identity.idf1;
  j["HOTA"] = m.hota.hota;
  j["DetA"] = m.hota.deta;
  j["AssA"] = m.hota.assa;
  j["FP"] = m.clear.fp;
  j["FN"] = m.clear.fn;
  j["IDSW"] = m.clear.idsw;
  j["GT"] = m.clear.gt;
  j["IDTP"] = m.identity.idtp;
  j["IDFP"] = m.identity.idfp;
  j["IDFN"] = m.identity.idfn;
  j["IDs"] = m.pred_ids;
  j["GT_IDs"] = m.gt_ids;
  j["hota_alphas"] = m.hota.alphas;
  j["hota_per_alpha"] = m.hota.hota_per_alpha;
  j["loc_accuracy"] = s.localization.accuracy;
  j["loc_error_mean"] = s.localization.mean_error;
  j["loc_frames"] = s.localization.frames;
  return j.dump(2) + "\n";
}

std::string branch_accuracy_csv(const LocalizationReport& report) {
  std::ostringstream out;
  out << "branch,frames,correct,accuracy,mean_error\n";
  out << std::setprecision(17);
  for (const auto& [label, b] : report.per_branch) {
    const double n = double(b.frames);
    out << label << ',' << b.frames << ',' << b.correct << ',' << (b.frames ? b.correct / n : 0.0)
        << ',' << (b.frames ? b.error_sum / n : 0.0) << '\n';
  }
  return out.str();
}

TrackFrame to_track_frame(const FrameOutput& out) {
  TrackFrame f;
  f.frame = out.frame;
  for (const auto& t : out.tracks) f.tracks.push_back({t.id, t.box, t.label});
  return f;
}

std::vector<EvalFrame> join_frames(const std::vector<TrackFrame>& pred,
                                   const std::vector<GroundTruthFrame>& truth) {
  if (pred.size() != truth.size()) {
    throw MisalignedFrames("prediction has " + std::to_string(pred.size()) +
                           " frames, truth has " + std::to_string(truth.size()));
  }
  std::vector<EvalFrame> out(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (pred[i].frame != truth[i].frame) {
      throw MisalignedFrames("frame " + std::to_string(pred[i].frame) + " does not match truth frame " +
                             std::to_string(truth[i].frame));
    }
    out[i].frame = truth[i].frame;
    out[i].pred = pred[i].tracks;
    for (const auto& l : truth[i].lumens) out[i].truth.push_back({l.id, l.box, l.label});
  }
  return out;
}

std::string error_record(const std::string& code, const std::string& message) {
  json j;
  j["v"] = kFormatVersion;
  j["error"] = code;
  j["message"] = message;
  return j.dump();
}

}  // namespace lumentrack
