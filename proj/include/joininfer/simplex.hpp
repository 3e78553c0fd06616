#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "joininfer/error.hpp"

namespace joininfer {

/// Dense tableau simplex for  max c'y  s.t.  A y <= b, y >= 0  with b >= 0,
/// so the slack basis is feasible from the start. Bland's rule (lowest index
/// entering and leaving) rules out cycling. Meant for the small per-bag
/// covering LPs: a few dozen rows and columns at most.
struct PackingLpResult {
  std::vector<double> primal;  // y
  std::vector<double> dual;    // one multiplier per row of A
  double objective = 0.0;
  bool bounded = true;
};

inline PackingLpResult solve_packing_lp(const std::vector<std::vector<double>>& a,
                                        const std::vector<double>& b,
                                        const std::vector<double>& c, double eps = 1e-12) {
  const std::size_t rows = b.size();
  const std::size_t cols = c.size();
  const std::size_t width = cols + rows + 1;
  for (double v : b)
    if (v < 0.0) throw Error(Errc::InvalidArgument, "lp", "negative right-hand side");

  std::vector<std::vector<double>> t(rows + 1, std::vector<double>(width, 0.0));
  std::vector<std::size_t> basis(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) t[i][j] = a[i][j];
    t[i][cols + i] = 1.0;
    t[i][width - 1] = b[i];
    basis[i] = cols + i;
  }
  for (std::size_t j = 0; j < cols; ++j) t[rows][j] = -c[j];

  PackingLpResult res;
  while (true) {
    std::size_t enter = width;
    for (std::size_t j = 0; j + 1 < width; ++j)
      if (t[rows][j] < -eps) {
        enter = j;
        break;
      }
    if (enter == width) break;

    std::size_t leave = rows;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rows; ++i) {
      if (t[i][enter] <= eps) continue;
      const double ratio = t[i][width - 1] / t[i][enter];
      if (ratio < best - eps || (std::fabs(ratio - best) <= eps && basis[i] < basis[leave])) {
        best = ratio;
        leave = i;
      }
    }
    if (leave == rows) {
      res.bounded = false;
      return res;
    }

    const double piv = t[leave][enter];
    for (double& v : t[leave]) v /= piv;
    for (std::size_t i = 0; i <= rows; ++i) {
      if (i == leave) continue;
      const double factor = t[i][enter];
      if (factor == 0.0) continue;
      for (std::size_t j = 0; j < width; ++j) t[i][j] -= factor * t[leave][j];
    }
    basis[leave] = enter;
  }

  res.primal.assign(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    if (basis[i] < cols) res.primal[basis[i]] = t[i][width - 1];
  res.dual.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) res.dual[i] = std::max(0.0, t[rows][cols + i]);
  res.objective = t[rows][width - 1];
  return res;
}

}  // namespace joininfer
