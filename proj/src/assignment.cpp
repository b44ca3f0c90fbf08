// Copyright 2026 The LumenTrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "lumentrack/assignment.hpp"

#include <algorithm>
#include <cmath>

namespace lumentrack {
namespace {

// Hungarian method with potentials for a square n x n matrix (1-based
// internals). Returns col_of_row.
std::vector<std::size_t> hungarian_square(const std::vector<double>& a, std::size_t n) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);

  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> col_of_row(n, 0);
  for (std::size_t j = 1; j <= n; ++j) {
    if (p[j] != 0) col_of_row[p[j] - 1] = j - 1;
  }
  return col_of_row;
}

}  // namespace

Assignment solve(const CostMatrix& costs, double gate) {
  Assignment out;
  const std::size_t rows = costs.rows();
  const std::size_t cols = costs.cols();
  if (rows == 0 || cols == 0) {
    for (std::size_t r = 0; r < rows; ++r) out.unmatched_rows.push_back(r);
    for (std::size_t c = 0; c < cols; ++c) out.unmatched_cols.push_back(c);
    return out;
  }

  // Extended matrix:
  //   [ C'        gate/2 ]
  //   [ gate/2    0      ]
  // where C' replaces gated entries by gate, which ties with leaving both
  // sides unmatched and is filtered out afterwards.
  if (!std::isfinite(gate)) {
    // No gate: any gate above the total finite cost forces maximum cardinality.
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        if (std::isfinite(costs(r, c))) total += costs(r, c);
    gate = 2.0 * total + 1.0;
  }
  const std::size_t n = rows + cols;
  const double half = 0.5 * gate;
  std::vector<double> ext(n * n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      double value;
      if (r < rows && c < cols) {
        const double x = costs(r, c);
        value = (std::isfinite(x) && x < gate) ? x : gate;
      } else if (r < rows || c < cols) {
        value = half;
      } else {
        value = 0.0;
      }
      ext[r * n + c] = value;
    }
  }

  const auto col_of_row = hungarian_square(ext, n);
  std::vector<char> col_used(cols, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t c = col_of_row[r];
    if (c < cols) {
      const double x = costs(r, c);
      if (std::isfinite(x) && x < gate) {
        out.pairs.emplace_back(r, c);
        col_used[c] = 1;
        continue;
      }
    }
    out.unmatched_rows.push_back(r);
  }
  for (std::size_t c = 0; c < cols; ++c) {
    if (!col_used[c]) out.unmatched_cols.push_back(c);
  }
  return out;
}

double assignment_objective(const CostMatrix& costs, double gate, const Assignment& a) {
  double total = 0.0;
  for (const auto& [r, c] : a.pairs) total += costs(r, c);
  total += 0.5 * gate * static_cast<double>(a.unmatched_rows.size() + a.unmatched_cols.size());
  return total;
}

}  // namespace lumentrack
