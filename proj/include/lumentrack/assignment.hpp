// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace lumentrack {

/// Row-major cost matrix. Entries are non-negative or kGated.
class CostMatrix {
 public:
  static constexpr double kGated = std::numeric_limits<double>::infinity();

  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // sorted by row
  std::vector<std::size_t> unmatched_rows;
  std::vector<std::size_t> unmatched_cols;
};

/// Gated minimum-cost assignment.
///
/// Entries >= gate are treated as infeasible. Leaving a row or a column
/// unmatched costs gate / 2, so a pair (r, c) is worth taking exactly when
/// cost(r, c) < gate. The returned assignment minimizes
///   sum(cost of pairs) + gate / 2 * (unmatched rows + unmatched cols)
/// which is the usual extended-matrix formulation of gated Hungarian matching.
/// Solved exactly with the shortest augmenting path Hungarian method on the
/// (rows + cols) square extension.
Assignment solve(const CostMatrix& costs, double gate);

/// Objective value of `a` under the formulation above.
double assignment_objective(const CostMatrix& costs, double gate, const Assignment& a);

}  // namespace lumentrack
