#include "spe/payoff_set.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "spe/lp.h"

namespace spe {

double distance(const Payoff& a, const Payoff& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double distance_to_set(const Payoff& p, const PayoffSet& set) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : set.points) best = std::min(best, distance(p, q));
  return best;
}

namespace {

struct CellHash {
  std::size_t operator()(const std::vector<std::int64_t>& key) const {
    std::size_t h = 1469598103934665603ull;
    for (auto v : key) {
      h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
  }
};

}  // namespace

std::vector<std::size_t> prune_indices(const std::vector<Payoff>& points,
                                       double eps) {
  std::vector<std::size_t> kept;
  if (points.empty()) return kept;
  const int d = static_cast<int>(points[0].size());
  if (eps <= 0.0) {
    kept.resize(points.size());
    std::iota(kept.begin(), kept.end(), 0);
    return kept;
  }
  if (d > 4) {
    for (std::size_t k = 0; k < points.size(); ++k) {
      bool near = false;
      for (std::size_t j : kept) {
        if (distance(points[k], points[j]) <= eps) {
          near = true;
          break;
        }
      }
      if (!near) kept.push_back(k);
    }
    return kept;
  }
  // Cells of side eps: any kept point within eps lies in a neighbouring cell.
  std::unordered_map<std::vector<std::int64_t>, std::vector<std::size_t>, CellHash>
      grid;
  std::vector<std::int64_t> cell(d), probe(d);
  int neighbours = 1;
  for (int i = 0; i < d; ++i) neighbours *= 3;
  for (std::size_t k = 0; k < points.size(); ++k) {
    for (int i = 0; i < d; ++i) {
      cell[i] = static_cast<std::int64_t>(std::floor(points[k][i] / eps));
    }
    bool near = false;
    for (int code = 0; code < neighbours && !near; ++code) {
      int c = code;
      for (int i = 0; i < d; ++i) {
        probe[i] = cell[i] + (c % 3) - 1;
        c /= 3;
      }
      auto it = grid.find(probe);
      if (it == grid.end()) continue;
      for (std::size_t j : it->second) {
        if (distance(points[k], points[j]) <= eps) {
          near = true;
          break;
        }
      }
    }
    if (!near) {
      kept.push_back(k);
      grid[cell].push_back(k);
    }
  }
  return kept;
}

PayoffSet prune(const PayoffSet& set, double eps) {
  PayoffSet out;
  for (std::size_t k : prune_indices(set.points, eps)) out.points.push_back(set.points[k]);
  return out;
}

bool in_convex_hull(const Payoff& p, const std::vector<Payoff>& points) {
  if (points.empty()) return false;
  const int d = static_cast<int>(p.size());
  const int n = static_cast<int>(points.size());
  lp::Constraints c(d + 1, n);
  double scale = 1.0;
  for (const auto& q : points) {
    for (double v : q) scale = std::max(scale, std::abs(v));
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < d; ++i) c.at(i, j) = points[j][i] / scale;
    c.at(d, j) = 1.0;
  }
  for (int i = 0; i < d; ++i) c.b[i] = p[i] / scale;
  c.b[d] = 1.0;
  return lp::find_feasible(c, 1e-12).has_value();
}

std::vector<std::size_t> extreme_point_indices(const std::vector<Payoff>& points) {
  std::vector<std::size_t> unique;
  for (std::size_t k = 0; k < points.size(); ++k) {
    bool dup = false;
    for (std::size_t j : unique) {
      if (points[j] == points[k]) {
        dup = true;
        break;
      }
    }
    if (!dup) unique.push_back(k);
  }
  if (unique.size() <= 1) return unique;
  const int d = static_cast<int>(points[0].size());
  std::vector<std::size_t> out;
  if (d == 1) {
    std::size_t lo = unique[0], hi = unique[0];
    for (std::size_t k : unique) {
      if (points[k][0] < points[lo][0]) lo = k;
      if (points[k][0] > points[hi][0]) hi = k;
    }
    out = {lo, hi};
    if (lo == hi) out.pop_back();
  } else if (d == 2) {
    std::vector<std::size_t> order = unique;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return points[a] < points[b];
    });
    double scale = 1e-300;
    for (std::size_t k : order) {
      scale = std::max({scale, std::abs(points[k][0]), std::abs(points[k][1])});
    }
    const double tol = 1e-12 * scale * scale;
    auto cross = [&](std::size_t o, std::size_t a, std::size_t b) {
      return (points[a][0] - points[o][0]) * (points[b][1] - points[o][1]) -
             (points[a][1] - points[o][1]) * (points[b][0] - points[o][0]);
    };
    std::vector<std::size_t> hull;
    for (int pass = 0; pass < 2; ++pass) {
      const std::size_t base = hull.size();
      for (std::size_t k : order) {
        while (hull.size() >= base + 2 &&
               cross(hull[hull.size() - 2], hull.back(), k) <= tol) {
          hull.pop_back();
        }
        hull.push_back(k);
      }
      hull.pop_back();
      std::reverse(order.begin(), order.end());
    }
    out = hull;
    if (out.empty()) out = {order.front()};
  } else {
    for (std::size_t k : unique) {
      std::vector<Payoff> others;
      for (std::size_t j : unique) {
        if (j != k) others.push_back(points[j]);
      }
      if (!in_convex_hull(points[k], others)) out.push_back(k);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::size_t> support_point_indices(const std::vector<Payoff>& points) {
  std::vector<std::size_t> out;
  if (points.empty()) return out;
  const int d = static_cast<int>(points[0].size());
  std::vector<std::vector<double>> dirs;
  if (d <= 4) {
    int total = 1;
    for (int i = 0; i < d; ++i) total *= 3;
    for (int code = 0; code < total; ++code) {
      std::vector<double> u(d);
      int c = code;
      bool zero = true;
      for (int i = 0; i < d; ++i) {
        u[i] = (c % 3) - 1.0;
        c /= 3;
        zero = zero && u[i] == 0.0;
      }
      if (!zero) dirs.push_back(std::move(u));
    }
  } else {
    for (int i = 0; i < d; ++i) {
      for (double sign : {-1.0, 1.0}) {
        std::vector<double> u(d, 0.0);
        u[i] = sign;
        dirs.push_back(u);
      }
    }
    dirs.push_back(std::vector<double>(d, 1.0));
    dirs.push_back(std::vector<double>(d, -1.0));
  }
  for (const auto& u : dirs) {
    std::size_t best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < points.size(); ++k) {
      double v = 0.0;
      for (int i = 0; i < d; ++i) v += u[i] * points[k][i];
      // Lexicographic tie-break keeps the choice a vertex.
      if (v > best_value || (v == best_value && points[k] > points[best])) {
        best_value = v;
        best = k;
      }
    }
    out.push_back(best);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

PayoffSet convexify(const PayoffSet& set) {
  if (set.empty()) throw EmptySetError("convexify of an empty set");
  PayoffSet out;
  for (std::size_t k : extreme_point_indices(set.points)) {
    out.points.push_back(set.points[k]);
  }
  return out;
}

double excess(const PayoffSet& a, const PayoffSet& b) {
  if (a.empty() || b.empty()) throw EmptySetError("excess of an empty set");
  double worst = 0.0;
  for (const auto& p : a.points) worst = std::max(worst, distance_to_set(p, b));
  return worst;
}

double hausdorff(const PayoffSet& a, const PayoffSet& b) {
  return std::max(excess(a, b), excess(b, a));
}

namespace {

// prune_indices, except that eps == 0 still merges exact duplicates.
std::vector<std::size_t> distinct_indices(const std::vector<Payoff>& points, double eps) {
  if (eps > 0.0) return prune_indices(points, eps);
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });
  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k == 0 || points[order[k]] != points[order[k - 1]]) kept.push_back(order[k]);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace

SelectionSum weighted_selection_sum(const std::vector<const PayoffSet*>& sets,
                                    const std::vector<double>& weights,
                                    const std::vector<Payoff>& offsets,
                                    const ExpectationOptions& options) {
  if (sets.empty()) throw EmptySetError("no input sets");
  const int d = sets.front()->dim();
  for (std::size_t s = 0; s < sets.size(); ++s) {
    if (sets[s]->empty()) {
      throw EmptySetError("empty set at state " + std::to_string(s));
    }
  }

  auto scale_of = [](const std::vector<Payoff>& pts) {
    double scale = 1e-300;
    for (const auto& p : pts) {
      for (double v : p) scale = std::max(scale, std::abs(v));
    }
    return scale;
  };
  // Doubles eps from a floor until `pts` thins below `limit` indices.
  auto coarsen = [&](const std::vector<Payoff>& pts, double eps, std::size_t limit,
                     std::vector<std::size_t>& kept) {
    eps = std::max(eps, 1e-9 * scale_of(pts));
    while (kept.size() > limit) {
      eps *= 2.0;
      kept = prune_indices(pts, eps);
    }
    return eps;
  };

  SelectionSum sum;
  sum.points.push_back(Payoff(d, 0.0));
  sum.choices.emplace_back();
  for (std::size_t s = 0; s < sets.size(); ++s) {
    const PayoffSet& set = *sets[s];
    const double w = weights[s];
    if (w == 0.0) {
      for (auto& c : sum.choices) c.push_back(0);
      continue;
    }
    std::vector<std::size_t> usable = distinct_indices(set.points, options.prune_eps);
    // Deterministic pre-prune when the raw product of this fold step would
    // exceed the cap: thin whichever factor is larger.
    while (sum.points.size() * usable.size() > options.size_cap &&
           (sum.points.size() > 1 || usable.size() > 1)) {
      if (usable.size() >= sum.points.size()) {
        const std::size_t limit =
            std::max<std::size_t>(1, options.size_cap / sum.points.size());
        const double eps = coarsen(set.points, options.prune_eps,
                                   std::min(limit, usable.size() - 1), usable);
        sum.hausdorff_error += w * eps;
      } else {
        const std::size_t limit = std::max<std::size_t>(1, options.size_cap / usable.size());
        std::vector<std::size_t> kept(sum.points.size());
        for (std::size_t k = 0; k < kept.size(); ++k) kept[k] = k;
        const double eps = coarsen(sum.points, options.prune_eps,
                                   std::min(limit, kept.size() - 1), kept);
        SelectionSum thinner;
        for (std::size_t k : kept) {
          thinner.points.push_back(std::move(sum.points[k]));
          thinner.choices.push_back(std::move(sum.choices[k]));
        }
        thinner.hausdorff_error = sum.hausdorff_error + eps;
        sum = std::move(thinner);
      }
    }
    SelectionSum next;
    next.hausdorff_error = sum.hausdorff_error;
    next.points.reserve(sum.points.size() * usable.size());
    for (std::size_t r = 0; r < sum.points.size(); ++r) {
      for (std::size_t k : usable) {
        Payoff p = sum.points[r];
        for (int i = 0; i < d; ++i) {
          const double offset = offsets.empty() ? 0.0 : offsets[s][i];
          p[i] += w * (offset + set.points[k][i]);
        }
        next.points.push_back(std::move(p));
        auto c = sum.choices[r];
        c.push_back(static_cast<int>(k));
        next.choices.push_back(std::move(c));
      }
    }
    const double eps = options.prune_eps;
    auto kept = distinct_indices(next.points, eps);
    if (eps > 0.0 && kept.size() < next.points.size()) next.hausdorff_error += eps;
    SelectionSum pruned;
    pruned.hausdorff_error = next.hausdorff_error;
    for (std::size_t k : kept) {
      pruned.points.push_back(std::move(next.points[k]));
      pruned.choices.push_back(std::move(next.choices[k]));
    }
    sum = std::move(pruned);
  }
  return sum;
}

PayoffSet selection_expectation(const std::vector<PayoffSet>& sets,
                                const std::vector<double>& weights,
                                const ExpectationOptions& options) {
  if (sets.empty()) throw EmptySetError("no input sets");
  if (sets.size() != weights.size()) {
    throw std::invalid_argument("sets and weights differ in length");
  }
  double mass = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("negative weight");
    mass += w;
  }
  if (std::abs(mass - 1.0) > 1e-12) {
    throw std::invalid_argument("weights sum to " + std::to_string(mass));
  }
  std::vector<const PayoffSet*> refs;
  for (const auto& s : sets) refs.push_back(&s);
  PayoffSet out;
  out.points = weighted_selection_sum(refs, weights, {}, options).points;
  return out;
}

}  // namespace spe
