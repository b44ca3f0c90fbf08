// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <vector>

#include "lumentrack/airway_graph.hpp"
#include "lumentrack/geometry.hpp"

namespace lumentrack {

struct EvalBox {
  int id = 0;
  BoundingBox box;
  std::optional<Label> label;
};

struct EvalFrame {
  int frame = 0;
  std::vector<EvalBox> pred;
  std::vector<EvalBox> truth;
};

struct ClearResult {
  long long gt = 0;
  long long matches = 0;
  long long fp = 0;
  long long fn = 0;
  long long idsw = 0;
  double mota = 0.0;
  double motp = 0.0;  // mean IoU of matched pairs
};

/// CLEAR MOT with carry-over: a ground-truth object keeps its previous
/// partner while their IoU is still >= iou_thresh; the rest are matched with
/// maximum cardinality and then minimum total (1 - IoU).
ClearResult evaluate_clear(const std::vector<EvalFrame>& frames, double iou_thresh);

struct IdentityResult {
  long long idtp = 0;
  long long idfp = 0;
  long long idfn = 0;
  double idf1 = 0.0;
};

/// Global one-to-one id assignment maximizing identity true positives.
IdentityResult evaluate_identity(const std::vector<EvalFrame>& frames, double iou_thresh);

struct HotaResult {
  double hota = 0.0;
  double deta = 0.0;
  double assa = 0.0;
  std::vector<double> alphas;
  std::vector<double> hota_per_alpha;
  std::vector<double> deta_per_alpha;
  std::vector<double> assa_per_alpha;
};

HotaResult evaluate_hota(const std::vector<EvalFrame>& frames, const std::vector<double>& alphas);

struct MetricsReport {
  ClearResult clear;
  IdentityResult identity;
  HotaResult hota;
  long long pred_ids = 0;  // distinct predicted tracklet ids
  long long gt_ids = 0;    // distinct ground-truth identities
};

/// Throws MisalignedFrames unless frames are strictly increasing.
MetricsReport evaluate_mot(const std::vector<EvalFrame>& frames, double iou_thresh,
                           const std::vector<double>& hota_alphas);

struct BranchAccuracy {
  long long frames = 0;
  long long correct = 0;
  double error_sum = 0.0;
};

struct LocalizationReport {
  double accuracy = 0.0;
  double mean_error = 0.0;  // generations
  long long frames = 0;
  std::map<Label, BranchAccuracy> per_branch;  // keyed by true branch
};

/// Throws MisalignedFrames on length mismatch and UnknownLabel for labels
/// outside the graph.
LocalizationReport evaluate_localization(const std::vector<Label>& pred,
                                         const std::vector<Label>& truth,
                                         const AirwayGraph& graph);

}  // namespace lumentrack
