// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "lumentrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "lumentrack/assignment.hpp"
#include "lumentrack/errors.hpp"

namespace lumentrack {

namespace {

constexpr double kEps = 1e-9;  // slack on threshold comparisons, as in common MOT toolkits

bool passes(double iou_value, double thresh) { return iou_value >= thresh - kEps; }

}  // namespace

ClearResult evaluate_clear(const std::vector<EvalFrame>& frames, double iou_thresh) {
  ClearResult r;
  std::map<int, int> last;  // gt id -> last matched prediction id
  double iou_sum = 0.0;
  for (const auto& f : frames) {
    const std::size_t ng = f.truth.size();
    const std::size_t np = f.pred.size();
    r.gt += static_cast<long long>(ng);
    std::vector<char> gt_used(ng, 0);
    std::vector<char> pr_used(np, 0);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;

    for (std::size_t g = 0; g < ng; ++g) {
      auto it = last.find(f.truth[g].id);
      if (it == last.end()) continue;
      for (std::size_t p = 0; p < np; ++p) {
        if (pr_used[p] || f.pred[p].id != it->second) continue;
        if (passes(iou(f.truth[g].box, f.pred[p].box), iou_thresh)) {
          gt_used[g] = pr_used[p] = 1;
          pairs.push_back({g, p});
        }
        break;
      }
    }

    std::vector<std::size_t> rg;
    std::vector<std::size_t> rp;
    for (std::size_t g = 0; g < ng; ++g) if (!gt_used[g]) rg.push_back(g);
    for (std::size_t p = 0; p < np; ++p) if (!pr_used[p]) rp.push_back(p);
    if (!rg.empty() && !rp.empty()) {
      CostMatrix c(rg.size(), rp.size(), CostMatrix::kGated);
      for (std::size_t i = 0; i < rg.size(); ++i) {
        for (std::size_t j = 0; j < rp.size(); ++j) {
          const double v = iou(f.truth[rg[i]].box, f.pred[rp[j]].box);
          if (passes(v, iou_thresh)) c(i, j) = 1.0 - v;
        }
      }
      for (const auto& [i, j] : solve(c, CostMatrix::kGated).pairs) pairs.push_back({rg[i], rp[j]});
    }

    for (const auto& [g, p] : pairs) {
      const int gid = f.truth[g].id;
      const int pid = f.pred[p].id;
      auto it = last.find(gid);
      if (it != last.end() && it->second != pid) ++r.idsw;
      last[gid] = pid;
      iou_sum += iou(f.truth[g].box, f.pred[p].box);
    }
    r.matches += static_cast<long long>(pairs.size());
    r.fn += static_cast<long long>(ng - pairs.size());
    r.fp += static_cast<long long>(np - pairs.size());
  }
  r.mota = r.gt > 0 ? 1.0 - double(r.fp + r.fn + r.idsw) / double(r.gt)
                    : (r.fp == 0 ? 1.0 : -std::numeric_limits<double>::infinity());
  r.motp = r.matches > 0 ? iou_sum / double(r.matches) : 0.0;
  return r;
}

IdentityResult evaluate_identity(const std::vector<EvalFrame>& frames, double iou_thresh) {
  std::map<int, std::size_t> gidx;
  std::map<int, std::size_t> pidx;
  for (const auto& f : frames) {
    for (const auto& b : f.truth) gidx.emplace(b.id, gidx.size());
    for (const auto& b : f.pred) pidx.emplace(b.id, pidx.size());
  }
  const std::size_t ng = gidx.size();
  const std::size_t np = pidx.size();
  std::vector<long long> overlap(ng * np, 0);
  long long total_gt = 0;
  long long total_pred = 0;
  for (const auto& f : frames) {
    total_gt += static_cast<long long>(f.truth.size());
    total_pred += static_cast<long long>(f.pred.size());
    for (const auto& g : f.truth) {
      for (const auto& p : f.pred) {
        if (passes(iou(g.box, p.box), iou_thresh)) ++overlap[gidx[g.id] * np + pidx[p.id]];
      }
    }
  }

  IdentityResult r;
  if (ng > 0 && np > 0) {
    long long kmax = 0;
    for (long long v : overlap) kmax = std::max(kmax, v);
    // With gate g every taken pair changes the objective by cost - g, so a
    // cost of g - overlap makes the solver maximize total overlap.
    const double gate = double(kmax) + 1.0;
    CostMatrix c(ng, np, CostMatrix::kGated);
    for (std::size_t i = 0; i < ng; ++i) {
      for (std::size_t j = 0; j < np; ++j) {
        if (overlap[i * np + j] > 0) c(i, j) = gate - double(overlap[i * np + j]);
      }
    }
    const Assignment a = solve(c, gate);
    for (const auto& [i, j] : a.pairs) r.idtp += overlap[i * np + j];
  }
  r.idfn = total_gt - r.idtp;
  r.idfp = total_pred - r.idtp;
  const long long denom = total_gt + total_pred;
  r.idf1 = denom > 0 ? 2.0 * double(r.idtp) / double(denom) : 1.0;
  return r;
}

HotaResult evaluate_hota(const std::vector<EvalFrame>& frames, const std::vector<double>& alphas) {
  std::map<int, std::size_t> gidx;
  std::map<int, std::size_t> pidx;
  for (const auto& f : frames) {
    for (const auto& b : f.truth) gidx.emplace(b.id, gidx.size());
    for (const auto& b : f.pred) pidx.emplace(b.id, pidx.size());
  }
  const std::size_t ng = gidx.size();
  const std::size_t np = pidx.size();

  HotaResult r;
  r.alphas = alphas;
  const std::size_t na = alphas.size();
  long long total_gt = 0;
  long long total_pred = 0;
  for (const auto& f : frames) {
    total_gt += static_cast<long long>(f.truth.size());
    total_pred += static_cast<long long>(f.pred.size());
  }
  if (total_gt == 0 || total_pred == 0) {
    const double v = (total_gt == 0 && total_pred == 0) ? 1.0 : 0.0;
    r.hota = r.deta = r.assa = v;
    r.hota_per_alpha.assign(na, v);
    r.deta_per_alpha.assign(na, v);
    r.assa_per_alpha.assign(na, v);
    return r;
  }

  // Global alignment between identities from soft per-frame overlaps.
  std::vector<double> potential(ng * np, 0.0);
  std::vector<double> gt_count(ng, 0.0);
  std::vector<double> pr_count(np, 0.0);
  std::vector<std::vector<double>> sims(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto& f = frames[t];
    const std::size_t a = f.truth.size();
    const std::size_t b = f.pred.size();
    auto& sim = sims[t];
    sim.assign(a * b, 0.0);
    std::vector<double> row(a, 0.0);
    std::vector<double> col(b, 0.0);
    for (std::size_t i = 0; i < a; ++i) {
      for (std::size_t j = 0; j < b; ++j) {
        sim[i * b + j] = iou(f.truth[i].box, f.pred[j].box);
        row[i] += sim[i * b + j];
        col[j] += sim[i * b + j];
      }
    }
    for (std::size_t i = 0; i < a; ++i) {
      for (std::size_t j = 0; j < b; ++j) {
        const double denom = row[i] + col[j] - sim[i * b + j];
        const double v = denom > std::numeric_limits<double>::epsilon() ? sim[i * b + j] / denom : 0.0;
        potential[gidx[f.truth[i].id] * np + pidx[f.pred[j].id]] += v;
      }
    }
    for (const auto& g : f.truth) gt_count[gidx[g.id]] += 1.0;
    for (const auto& p : f.pred) pr_count[pidx[p.id]] += 1.0;
  }
  std::vector<double> align(ng * np, 0.0);
  for (std::size_t i = 0; i < ng; ++i) {
    for (std::size_t j = 0; j < np; ++j) {
      const double pm = potential[i * np + j];
      align[i * np + j] = pm / (gt_count[i] + pr_count[j] - pm);
    }
  }

  std::vector<double> tp(na, 0.0);
  std::vector<std::vector<double>> match_counts(na, std::vector<double>(ng * np, 0.0));
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto& f = frames[t];
    const std::size_t a = f.truth.size();
    const std::size_t b = f.pred.size();
    if (a == 0 || b == 0) continue;
    const auto& sim = sims[t];
    std::vector<double> score(a * b);
    double smax = 0.0;
    for (std::size_t i = 0; i < a; ++i) {
      for (std::size_t j = 0; j < b; ++j) {
        score[i * b + j] = align[gidx[f.truth[i].id] * np + pidx[f.pred[j].id]] * sim[i * b + j];
        smax = std::max(smax, score[i * b + j]);
      }
    }
    CostMatrix c(a, b);
    for (std::size_t i = 0; i < a; ++i) {
      for (std::size_t j = 0; j < b; ++j) c(i, j) = smax - score[i * b + j];
    }
    const Assignment m = solve(c, CostMatrix::kGated);
    for (std::size_t k = 0; k < na; ++k) {
      for (const auto& [i, j] : m.pairs) {
        if (!passes(sim[i * b + j], alphas[k])) continue;
        tp[k] += 1.0;
        match_counts[k][gidx[f.truth[i].id] * np + pidx[f.pred[j].id]] += 1.0;
      }
    }
  }

  for (std::size_t k = 0; k < na; ++k) {
    const double fn = double(total_gt) - tp[k];
    const double fp = double(total_pred) - tp[k];
    const double deta = tp[k] / std::max(1.0, tp[k] + fn + fp);
    double ass_sum = 0.0;
    for (std::size_t i = 0; i < ng; ++i) {
      for (std::size_t j = 0; j < np; ++j) {
        const double mc = match_counts[k][i * np + j];
        if (mc == 0.0) continue;
        ass_sum += mc * (mc / std::max(1.0, gt_count[i] + pr_count[j] - mc));
      }
    }
    const double assa = ass_sum / std::max(1.0, tp[k]);
    r.deta_per_alpha.push_back(deta);
    r.assa_per_alpha.push_back(assa);
    r.hota_per_alpha.push_back(std::sqrt(deta * assa));
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / double(v.size());
  };
  r.hota = mean(r.hota_per_alpha);
  r.deta = mean(r.deta_per_alpha);
  r.assa = mean(r.assa_per_alpha);
  return r;
}

MetricsReport evaluate_mot(const std::vector<EvalFrame>& frames, double iou_thresh,
                           const std::vector<double>& hota_alphas) {
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].frame <= frames[i - 1].frame) {
      throw MisalignedFrames("frame indices must increase at frame " +
                             std::to_string(frames[i].frame));
    }
  }
  MetricsReport r;
  r.clear = evaluate_clear(frames, iou_thresh);
  r.identity = evaluate_identity(frames, iou_thresh);
  r.hota = evaluate_hota(frames, hota_alphas);
  std::set<int> p;
  std::set<int> g;
  for (const auto& f : frames) {
    for (const auto& b : f.pred) p.insert(b.id);
    for (const auto& b : f.truth) g.insert(b.id);
  }
  r.pred_ids = static_cast<long long>(p.size());
  r.gt_ids = static_cast<long long>(g.size());
  return r;
}

LocalizationReport evaluate_localization(const std::vector<Label>& pred,
                                         const std::vector<Label>& truth,
                                         const AirwayGraph& graph) {
  if (pred.size() != truth.size()) {
    throw MisalignedFrames("localization streams differ in length");
  }
  LocalizationReport r;
  r.frames = static_cast<long long>(truth.size());
  long long correct = 0;
  double err = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int d = generation_distance(graph, pred[i], truth[i]);
    auto& b = r.per_branch[truth[i]];
    ++b.frames;
    b.error_sum += d;
    if (d == 0) {
      ++b.correct;
      ++correct;
    }
    err += d;
  }
  if (r.frames > 0) {
    r.accuracy = double(correct) / double(r.frames);
    r.mean_error = err / double(r.frames);
  }
  return r;
}

}  // namespace lumentrack
