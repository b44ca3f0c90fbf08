// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "lumentrack/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "lumentrack/errors.hpp"

namespace lumentrack {

using nlohmann::json;

namespace {

constexpr double kDeg = kPi / 180.0;

struct Field {
  const char* key;
  const char* comment;
  std::function<json(const EngineConfig&)> get;
  std::function<void(EngineConfig&, const json&)> set;
};

struct Section {
  const char* key;  // empty for top-level fields
  std::vector<Field> fields;
};

double as_number(const json& j, const char* key) {
  if (!j.is_number()) throw ConfigError(std::string(key) + " must be a number");
  return j.get<double>();
}

long long as_integer(const json& j, const char* key) {
  if (!j.is_number_integer()) throw ConfigError(std::string(key) + " must be an integer");
  return j.get<long long>();
}

bool as_bool(const json& j, const char* key) {
  if (!j.is_boolean()) throw ConfigError(std::string(key) + " must be true or false");
  return j.get<bool>();
}

std::string as_string(const json& j, const char* key) {
  if (!j.is_string()) throw ConfigError(std::string(key) + " must be a string");
  return j.get<std::string>();
}

#define LT_DOUBLE(KEY, COMMENT, EXPR)                                          \
  Field {                                                                      \
    KEY, COMMENT, [](const EngineConfig& c) { return json(c.EXPR); },          \
        [](EngineConfig& c, const json& j) { c.EXPR = as_number(j, KEY); }     \
  }
#define LT_INT(KEY, COMMENT, EXPR, TYPE)                                       \
  Field {                                                                      \
    KEY, COMMENT, [](const EngineConfig& c) { return json(c.EXPR); },          \
        [](EngineConfig& c, const json& j) {                                   \
          const long long v = as_integer(j, KEY);                              \
          if (v < 0) throw ConfigError(std::string(KEY) + " must be >= 0");    \
          c.EXPR = static_cast<TYPE>(v);                                       \
        }                                                                      \
  }
#define LT_BOOL(KEY, COMMENT, EXPR)                                            \
  Field {                                                                      \
    KEY, COMMENT, [](const EngineConfig& c) { return json(c.EXPR); },          \
        [](EngineConfig& c, const json& j) { c.EXPR = as_bool(j, KEY); }       \
  }
#define LT_DEGREES(KEY, COMMENT, EXPR)                                         \
  Field {                                                                      \
    KEY, COMMENT, [](const EngineConfig& c) { return json(c.EXPR / kDeg); },   \
        [](EngineConfig& c, const json& j) { c.EXPR = as_number(j, KEY) * kDeg; } \
  }

const char* provider_name(MatcherProvider p) {
  switch (p) {
    case MatcherProvider::Simulated: return "simulated";
    case MatcherProvider::ExternalProcess: return "external-process";
    case MatcherProvider::None: return "none";
  }
  return "none";
}

const std::vector<Section>& sections() {
  static const std::vector<Section> table = {
      {"tracker",
       {
           LT_DOUBLE("det_thresh", "detections scoring below this are dropped", tracker.det_thresh),
           LT_DOUBLE("high_thresh", "high/low confidence split", tracker.high_thresh),
           LT_DOUBLE("match_thresh", "gate of the first (fused cost) pass", tracker.match_thresh),
           LT_DOUBLE("low_match_thresh", "gate of the second (motion) pass",
                     tracker.low_match_thresh),
           LT_DOUBLE("low_match_thresh_no_prior",
                     "second-pass gate when the first pass matched nothing",
                     tracker.low_match_thresh_no_prior),
           LT_DOUBLE("reid_weight", "appearance weight in the fused cost; 0 disables re-id",
                     tracker.reid_weight),
           LT_DOUBLE("ema_momentum", "embedding moving-average momentum", tracker.ema_momentum),
           LT_INT("max_age", "frames a lost tracklet survives", tracker.max_age, int),
           LT_INT("generation_gate", "max generation distance from the last location",
                  tracker.generation_gate, int),
           LT_DOUBLE("nms_iou", "duplicate-detection filter; <= 0 disables", tracker.nms_iou),
           LT_BOOL("use_kalman", "false: predict with the last box", tracker.use_kalman),
           LT_DOUBLE("position_weight", "process/initial std per unit height, position",
                     tracker.noise.position_weight),
           LT_DOUBLE("velocity_weight", "process/initial std per unit height, velocity",
                     tracker.noise.velocity_weight),
           LT_DOUBLE("aspect_std", "process std of the aspect ratio", tracker.noise.aspect_std),
           LT_DOUBLE("measurement_weight", "measurement std per unit height",
                     tracker.noise.measurement_weight),
           LT_DOUBLE("measurement_aspect_std", "measurement std of the aspect ratio",
                     tracker.noise.measurement_aspect_std),
       }},
      {"graph",
       {
           LT_DEGREES("visibility_max_angle_deg", "children bent further than this are hidden",
                      graph.visibility_max_angle),
           LT_DOUBLE("truncation_mm", "centerline length used for projected directions",
                     graph.truncation_mm),
       }},
      {"association",
       {
           LT_DOUBLE("containment", "coverage needed for a parent/child edge",
                     association.containment),
           LT_DOUBLE("redundant_iou", "children this close to their parent are pruned",
                     association.redundant_iou),
           LT_DEGREES("init_roll_prior_deg", "expected roll at the carina",
                      association.init_roll_prior),
           Field{"graph_match_gate", "projection matching gate; null means ungated",
                 [](const EngineConfig& c) {
                   return std::isfinite(c.association.graph_match_gate)
                              ? json(c.association.graph_match_gate)
                              : json(nullptr);
                 },
                 [](EngineConfig& c, const json& j) {
                   c.association.graph_match_gate =
                       j.is_null() ? std::numeric_limits<double>::infinity()
                                   : as_number(j, "graph_match_gate");
                 }},
           LT_DOUBLE("roll_min_separation_px", "closer lumen pairs are not used for roll",
                     association.roll_min_separation_px),
           LT_BOOL("filtered_centers", "roll geometry from filtered instead of raw box centers",
                   association.filtered_centers),
           LT_INT("coast_frames",
                  "frames a missed tracklet still takes part in labeling and voting",
                  association.coast_frames, int),
           LT_INT("coast_after_recoveries",
                  "recovered misses seen before coasting starts; 0 coasts from the first frame",
                  association.coast_after_recoveries, int),
       }},
      {"loop_closure",
       {
           LT_BOOL("enabled", "keyframe matching on branch changes", loop_closure.enabled),
           LT_INT("min_pairs", "a loop needs more matched pairs than this",
                  loop_closure.min_pairs, std::size_t),
           LT_INT("recent_records", "gallery keyframes searched per branch change",
                  loop_closure.recent_records, std::size_t),
           LT_INT("min_points", "points needed before an identity is inherited",
                  loop_closure.min_points, std::size_t),
           Field{"provider", "simulated | external-process | none",
                 [](const EngineConfig& c) { return json(provider_name(c.matcher.provider)); },
                 [](EngineConfig& c, const json& j) {
                   const std::string s = as_string(j, "provider");
                   if (s == "simulated") {
                     c.matcher.provider = MatcherProvider::Simulated;
                   } else if (s == "external-process") {
                     c.matcher.provider = MatcherProvider::ExternalProcess;
                   } else if (s == "none") {
                     c.matcher.provider = MatcherProvider::None;
                   } else {
                     throw ConfigError("unknown provider: " + s);
                   }
                 }},
           Field{"external_command", "matcher program, called as <cmd> <handle_a> <handle_b>",
                 [](const EngineConfig& c) { return json(c.matcher.external_command); },
                 [](EngineConfig& c, const json& j) {
                   c.matcher.external_command = as_string(j, "external_command");
                 }},
           LT_DOUBLE("sim_base", "simulated matcher: pairs at full visibility overlap",
                     matcher.sim_base),
           LT_DOUBLE("sim_noise_std", "simulated matcher: count noise", matcher.sim_noise_std),
           LT_INT("sim_seed", "simulated matcher: seed", matcher.sim_seed, std::uint64_t),
       }},
      {"evaluation",
       {
           LT_DOUBLE("iou", "IoU needed for a CLEAR/identity match", evaluation.iou),
           Field{"hota_alphas", "HOTA thresholds; empty means 0.05 to 0.95 in steps of 0.05",
                 [](const EngineConfig& c) { return json(c.evaluation.hota_alphas); },
                 [](EngineConfig& c, const json& j) {
                   if (!j.is_array()) throw ConfigError("hota_alphas must be an array");
                   c.evaluation.hota_alphas.clear();
                   for (const auto& a : j) {
                     c.evaluation.hota_alphas.push_back(as_number(a, "hota_alphas"));
                   }
                 }},
       }},
      {"",
       {
           LT_INT("embedding_dim", "length of appearance vectors", embedding_dim, int),
       }},
  };
  return table;
}

#undef LT_DOUBLE
#undef LT_INT
#undef LT_BOOL
#undef LT_DEGREES

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace

std::vector<double> default_hota_alphas() {
  std::vector<double> a;
  for (int i = 1; i <= 19; ++i) a.push_back(i / 20.0);
  return a;
}

void validate(const EngineConfig& c) {
  const auto& t = c.tracker;
  require(in_unit(t.det_thresh) && in_unit(t.high_thresh) && t.det_thresh <= t.high_thresh,
          "tracker thresholds must satisfy 0 <= det_thresh <= high_thresh <= 1");
  require(t.match_thresh > 0.0 && t.match_thresh <= 2.0, "match_thresh must be in (0, 2]");
  require(t.low_match_thresh > 0.0 && t.low_match_thresh <= 1.0 &&
              t.low_match_thresh_no_prior > 0.0 && t.low_match_thresh_no_prior <= 1.0,
          "second-pass gates must be in (0, 1]");
  require(in_unit(t.reid_weight), "reid_weight must be in [0, 1]");
  require(in_unit(t.ema_momentum), "ema_momentum must be in [0, 1]");
  require(t.max_age >= 0, "max_age must be >= 0");
  require(t.generation_gate >= 0, "generation_gate must be >= 0");
  require(t.nms_iou <= 1.0, "nms_iou must be <= 1");
  require(t.noise.position_weight > 0 && t.noise.velocity_weight > 0 && t.noise.aspect_std > 0 &&
              t.noise.measurement_weight > 0 && t.noise.measurement_aspect_std > 0,
          "Kalman noise scales must be positive");
  require(c.graph.visibility_max_angle > 0.0 && c.graph.visibility_max_angle <= kPi / 2,
          "visibility_max_angle_deg must be in (0, 90]");
  require(c.graph.truncation_mm > 0.0, "truncation_mm must be positive");
  require(c.association.containment > 0.0 && c.association.containment <= 1.0,
          "containment must be in (0, 1]");
  require(c.association.redundant_iou > 0.0 && c.association.redundant_iou <= 1.0,
          "redundant_iou must be in (0, 1]");
  require(c.association.graph_match_gate > 0.0, "graph_match_gate must be positive");
  require(c.association.roll_min_separation_px >= 0.0, "roll_min_separation_px must be >= 0");
  require(c.loop_closure.recent_records >= 1, "recent_records must be >= 1");
  require(c.matcher.provider != MatcherProvider::ExternalProcess ||
              !c.matcher.external_command.empty(),
          "external-process provider needs external_command");
  require(c.matcher.sim_base >= 0.0 && c.matcher.sim_noise_std >= 0.0,
          "simulated matcher parameters must be >= 0");
  require(c.evaluation.iou > 0.0 && c.evaluation.iou <= 1.0, "evaluation iou must be in (0, 1]");
  for (double a : c.evaluation.hota_alphas) {
    require(a > 0.0 && a < 1.0, "hota_alphas must lie in (0, 1)");
  }
  require(c.embedding_dim >= 1, "embedding_dim must be >= 1");
}

EngineConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  EngineConfig config;
  for (const auto& [key, value] : doc.items()) {
    if (key == "v") {
      if (!value.is_number_integer() || value.get<int>() != 1) {
        throw ConfigError("unsupported config version");
      }
      continue;
    }
    bool known = false;
    for (const auto& section : sections()) {
      if (section.key[0] == '\0') {
        for (const auto& f : section.fields) {
          if (key == f.key) {
            f.set(config, value);
            known = true;
          }
        }
      } else if (key == section.key) {
        if (!value.is_object()) throw ConfigError(key + " must be an object");
        for (const auto& [sub, v] : value.items()) {
          auto it = std::find_if(section.fields.begin(), section.fields.end(),
                                 [&](const Field& f) { return sub == f.key; });
          if (it == section.fields.end()) throw ConfigError("unknown config key: " + key + "." + sub);
          it->set(config, v);
        }
        known = true;
      }
    }
    if (!known) throw ConfigError("unknown config key: " + key);
  }
  validate(config);
  return config;
}

EngineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const EngineConfig& config) {
  json doc = json::object();
  doc["v"] = 1;
  for (const auto& section : sections()) {
    for (const auto& f : section.fields) {
      if (section.key[0] == '\0') {
        doc[f.key] = f.get(config);
      } else {
        doc[section.key][f.key] = f.get(config);
      }
    }
  }
  return doc.dump(2) + "\n";
}

std::string commented_default_config() {
  const EngineConfig defaults;
  std::ostringstream out;
  out << "// lumentrack engine configuration. Unknown keys are rejected.\n{\n  \"v\": 1";
  for (const auto& section : sections()) {
    const bool top = section.key[0] == '\0';
    const std::string indent = top ? "  " : "    ";
    if (!top) out << ",\n  \"" << section.key << "\": {";
    bool first = true;
    for (const auto& f : section.fields) {
      out << ((first && !top) ? "\n" : ",\n");
      out << indent << "// " << f.comment << "\n";
      out << indent << "\"" << f.key << "\": " << f.get(defaults).dump();
      first = false;
    }
    if (!top) out << "\n  }";
  }
  out << "\n}\n";
  return out.str();
}

}  // namespace lumentrack
