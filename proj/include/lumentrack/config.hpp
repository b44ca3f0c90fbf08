// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "lumentrack/airway_graph.hpp"
#include "lumentrack/association.hpp"
#include "lumentrack/loop_closure.hpp"
#include "lumentrack/tracker.hpp"

namespace lumentrack {

enum class MatcherProvider { Simulated, ExternalProcess, None };

struct MatcherConfig {
  MatcherProvider provider = MatcherProvider::Simulated;
  std::string external_command;
  double sim_base = 200.0;      // pairs for fully shared visibility
  double sim_noise_std = 4.0;
  std::uint64_t sim_seed = 0;
};

struct EvaluationConfig {
  double iou = 0.5;
  std::vector<double> hota_alphas;  // empty: 0.05, 0.10, ..., 0.95
};

struct EngineConfig {
  TrackerConfig tracker;
  GraphParams graph;
  AssociationConfig association;
  LoopClosureConfig loop_closure;
  MatcherConfig matcher;
  EvaluationConfig evaluation;
  int embedding_dim = 32;
};

std::vector<double> default_hota_alphas();

/// Parses a configuration document (JSON, // and /* */ comments allowed).
/// Missing keys keep their defaults; unknown keys and out-of-range values
/// throw ConfigError.
EngineConfig parse_config(const std::string& text);
EngineConfig load_config(const std::string& path);

/// Plain JSON with every key present.
std::string dump_config(const EngineConfig& config);

/// Commented defaults as written by `config init`.
std::string commented_default_config();

/// Throws ConfigError when a value is outside its documented range.
void validate(const EngineConfig& config);

}  // namespace lumentrack
