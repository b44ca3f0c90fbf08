// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>

#include "lumentrack/airway_graph.hpp"

namespace fixtures {

using namespace lumentrack;

// Trachea along +y ending at the origin, LMB toward -x, RMB toward +x,
// each main bronchus with two children splitting in z.
inline RawTree symmetric_tree(double spread_deg = 40.0) {
  const double s = std::sin(spread_deg * kPi / 180.0);
  const double c = std::cos(spread_deg * kPi / 180.0);
  RawTree t;
  t.trachea = "trachea";
  t.lmb = "LMB";
  t.rmb = "RMB";
  t.branches.push_back({"trachea", {0, -100, 0}, {0, 0, 0}, std::nullopt});
  t.branches.push_back({"LMB", {0, 0, 0}, {-40 * s, 40 * c, 0}, "trachea"});
  t.branches.push_back({"RMB", {0, 0, 0}, {40 * s, 40 * c, 0}, "trachea"});
  for (const char* mb : {"LMB", "RMB"}) {
    const double sign = std::string(mb) == "LMB" ? -1.0 : 1.0;
    const Vec3 base(sign * 40 * s, 40 * c, 0);
    t.branches.push_back({std::string(mb) + ".1", base, base + Vec3(sign * 10, 20, 12), mb});
    t.branches.push_back({std::string(mb) + ".2", base, base + Vec3(sign * 10, 20, -12), mb});
  }
  return t;
}

}  // namespace fixtures
