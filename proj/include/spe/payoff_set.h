#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "spe/game.h"

namespace spe {

// Finite point cloud standing in for a compact set of payoff vectors.
struct PayoffSet {
  std::vector<Payoff> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  int dim() const { return points.empty() ? 0 : static_cast<int>(points[0].size()); }
};

class EmptySetError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

double distance(const Payoff& a, const Payoff& b);
double distance_to_set(const Payoff& p, const PayoffSet& set);

// Greedy epsilon-net in insertion order: a point is kept when it is farther
// than eps from every point kept before it. eps == 0 leaves the input as is.
PayoffSet prune(const PayoffSet& set, double eps);
std::vector<std::size_t> prune_indices(const std::vector<Payoff>& points,
                                       double eps);

// Extreme points of the convex hull, in input order.
PayoffSet convexify(const PayoffSet& set);
std::vector<std::size_t> extreme_point_indices(const std::vector<Payoff>& points);
// Maximizers of <u, p> over the directions u in {-1,0,1}^d \ {0} (d <= 4)
// or the signed axes and diagonals (d > 4), in input order. Every returned
// point is a hull vertex; vertices exposed only by other directions are missed.
std::vector<std::size_t> support_point_indices(const std::vector<Payoff>& points);
// True when p is a convex combination of `points` (LP membership test).
bool in_convex_hull(const Payoff& p, const std::vector<Payoff>& points);

double hausdorff(const PayoffSet& a, const PayoffSet& b);
// sup over a of the distance to b.
double excess(const PayoffSet& a, const PayoffSet& b);

struct ExpectationOptions {
  double prune_eps = 0.0;
  std::size_t size_cap = 10'000;
};

// Weighted Minkowski sum sum_s w(s) * (offset(s) + set(s)). Every output
// point remembers which point of each input set produced it.
struct SelectionSum {
  std::vector<Payoff> points;
  std::vector<std::vector<int>> choices;  // per point, per input set
  double hausdorff_error = 0.0;           // bound on pruning loss
};

SelectionSum weighted_selection_sum(const std::vector<const PayoffSet*>& sets,
                                    const std::vector<double>& weights,
                                    const std::vector<Payoff>& offsets,
                                    const ExpectationOptions& options);

PayoffSet selection_expectation(const std::vector<PayoffSet>& sets,
                                const std::vector<double>& weights,
                                const ExpectationOptions& options = {});

}  // namespace spe
