#include "spe/lp.h"

#include <cmath>
#include <limits>

namespace spe::lp {

std::optional<std::vector<double>> find_feasible(const Constraints& c,
                                                 double tolerance) {
  const int m = c.rows;
  const int n = c.cols;
  const int width = n + m + 1;  // structural, artificial, rhs
  std::vector<double> t(static_cast<std::size_t>(m + 1) * width, 0.0);
  auto cell = [&](int r, int col) -> double& { return t[r * width + col]; };

  std::vector<int> basis(m);
  for (int r = 0; r < m; ++r) {
    const double sign = c.b[r] < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) cell(r, j) = sign * c.a[r * n + j];
    cell(r, n + r) = 1.0;
    cell(r, width - 1) = sign * c.b[r];
    basis[r] = n + r;
  }
  // Objective row: minimise the sum of artificials, expressed in reduced form.
  for (int r = 0; r < m; ++r) {
    for (int j = 0; j < n; ++j) cell(m, j) -= cell(r, j);
    cell(m, width - 1) -= cell(r, width - 1);
  }

  const int max_iterations = 50 * (m + n) + 100;
  for (int iter = 0; iter < max_iterations; ++iter) {
    int enter = -1;
    for (int j = 0; j < n + m; ++j) {
      if (cell(m, j) < -tolerance) {
        enter = j;
        break;
      }
    }
    if (enter < 0) break;
    int leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < m; ++r) {
      const double coef = cell(r, enter);
      if (coef > tolerance) {
        const double ratio = cell(r, width - 1) / coef;
        if (ratio < best - 1e-15 ||
            (std::abs(ratio - best) <= 1e-15 && leave >= 0 &&
             basis[r] < basis[leave])) {
          best = ratio;
          leave = r;
        }
      }
    }
    if (leave < 0) break;  // unbounded phase I cannot happen; bail out
    const double pivot = cell(leave, enter);
    for (int j = 0; j < width; ++j) cell(leave, j) /= pivot;
    for (int r = 0; r <= m; ++r) {
      if (r == leave) continue;
      const double factor = cell(r, enter);
      if (factor == 0.0) continue;
      for (int j = 0; j < width; ++j) cell(r, j) -= factor * cell(leave, j);
    }
    basis[leave] = enter;
  }

  if (-cell(m, width - 1) > 1e3 * tolerance) return std::nullopt;
  std::vector<double> x(n, 0.0);
  for (int r = 0; r < m; ++r) {
    if (basis[r] < n) x[basis[r]] = std::max(0.0, cell(r, width - 1));
  }
  return x;
}

}  // namespace spe::lp
