#pragma once

#include <optional>
#include <vector>

namespace spe::lp {

// Dense row-major constraint matrix.
struct Constraints {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;  // rows * cols
  std::vector<double> b;  // rows

  Constraints(int r, int c) : rows(r), cols(c), a(r * c, 0.0), b(r, 0.0) {}
  double& at(int r, int c) { return a[r * cols + c]; }
};

// Returns a basic feasible point of {x : A x = b, x >= 0}, or nullopt.
// Two-phase-free: runs phase I with Bland's rule on a dense tableau.
std::optional<std::vector<double>> find_feasible(const Constraints& c,
                                                 double tolerance = 1e-10);

}  // namespace spe::lp
