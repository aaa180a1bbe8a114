#include "spe/nash.h"

#include <Eigen/Dense>

#include <algorithm>
#include <functional>
#include <optional>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "spe/lp.h"

namespace spe {

NormalFormGame::NormalFormGame(std::vector<int> action_counts)
    : counts_(std::move(action_counts)) {
  strides_.assign(counts_.size(), 1);
  profiles_ = 1;
  for (int i = static_cast<int>(counts_.size()) - 1; i >= 0; --i) {
    if (counts_[i] < 1) throw DimensionMismatch("empty action set");
    strides_[i] = profiles_;
    profiles_ *= counts_[i];
  }
  payoffs_.assign(static_cast<std::size_t>(profiles_) * counts_.size(), 0.0);
}

int NormalFormGame::index(const std::vector<int>& profile) const {
  int idx = 0;
  for (std::size_t i = 0; i < counts_.size(); ++i) idx += profile[i] * strides_[i];
  return idx;
}

std::vector<int> NormalFormGame::profile(int index) const {
  std::vector<int> out(counts_.size());
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    out[i] = (index / strides_[i]) % counts_[i];
  }
  return out;
}

void NormalFormGame::set_payoffs(int profile_index,
                                 const std::vector<double>& values) {
  for (int i = 0; i < players(); ++i) set_payoff(profile_index, i, values[i]);
}

MixedProfile pure_profile(const NormalFormGame& game,
                          const std::vector<int>& actions) {
  MixedProfile out(game.players());
  for (int i = 0; i < game.players(); ++i) {
    out[i].assign(game.actions(i), 0.0);
    out[i][actions[i]] = 1.0;
  }
  return out;
}

bool is_valid_profile(const NormalFormGame& game, const MixedProfile& profile,
                      double tolerance) {
  if (static_cast<int>(profile.size()) != game.players()) return false;
  for (int i = 0; i < game.players(); ++i) {
    if (static_cast<int>(profile[i].size()) != game.actions(i)) return false;
    double mass = 0.0;
    for (double p : profile[i]) {
      if (p < -tolerance) return false;
      mass += p;
    }
    if (std::abs(mass - 1.0) > tolerance) return false;
  }
  return true;
}

namespace {

void check_dimensions(const NormalFormGame& game, const MixedProfile& profile) {
  if (static_cast<int>(profile.size()) != game.players()) {
    throw DimensionMismatch("profile has " + std::to_string(profile.size()) +
                            " players, game has " +
                            std::to_string(game.players()));
  }
  for (int i = 0; i < game.players(); ++i) {
    if (static_cast<int>(profile[i].size()) != game.actions(i)) {
      throw DimensionMismatch("player " + std::to_string(i + 1) +
                              " mixture has wrong arity");
    }
  }
}

double payoff_scale(const NormalFormGame& game) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int x = 0; x < game.profiles(); ++x) {
    for (int i = 0; i < game.players(); ++i) {
      lo = std::min(lo, game.payoff(x, i));
      hi = std::max(hi, game.payoff(x, i));
    }
  }
  return std::max(hi - lo, 1e-300);
}

bool same_profile(const MixedProfile& a, const MixedProfile& b, double tol) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < a[i].size(); ++k) {
      if (std::abs(a[i][k] - b[i][k]) > tol) return false;
    }
  }
  return true;
}

void add_unique(std::vector<NashResult>& results, NashResult r) {
  for (const auto& existing : results) {
    if (same_profile(existing.profile, r.profile, 1e-6)) return;
  }
  results.push_back(std::move(r));
}

NashResult certify(const NormalFormGame& game, MixedProfile profile) {
  NashResult r;
  r.value = expected_value(game, profile);
  r.regret = max_regret(game, profile);
  r.profile = std::move(profile);
  return r;
}

std::vector<std::vector<int>> subsets_of_size(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> pick(k);
  std::iota(pick.begin(), pick.end(), 0);
  if (k > n || k == 0) return out;
  while (true) {
    out.push_back(pick);
    int i = k - 1;
    while (i >= 0 && pick[i] == n - k + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
  return out;
}

// Mixture for `mover` supported on `own` that makes `responder` indifferent
// across `indifferent` and weakly worse elsewhere. Payoffs are shifted to be
// positive so the value variable is nonnegative.
std::optional<std::vector<double>> indifference_mix(
    const std::vector<std::vector<double>>& responder_payoff,  // [resp][mover]
    const std::vector<int>& own, const std::vector<int>& indifferent) {
  const int responder_actions = static_cast<int>(responder_payoff.size());
  std::vector<bool> in_support(responder_actions, false);
  for (int k : indifferent) in_support[k] = true;
  const int outside = responder_actions - static_cast<int>(indifferent.size());
  const int cols = static_cast<int>(own.size()) + 1 + outside;
  lp::Constraints c(responder_actions + 1, cols);
  int slack = static_cast<int>(own.size()) + 1;
  for (int k = 0; k < responder_actions; ++k) {
    for (std::size_t j = 0; j < own.size(); ++j) {
      c.at(k, static_cast<int>(j)) = responder_payoff[k][own[j]];
    }
    c.at(k, static_cast<int>(own.size())) = -1.0;
    if (!in_support[k]) c.at(k, slack++) = 1.0;
  }
  for (std::size_t j = 0; j < own.size(); ++j) {
    c.at(responder_actions, static_cast<int>(j)) = 1.0;
  }
  c.b[responder_actions] = 1.0;
  auto sol = lp::find_feasible(c, 1e-11);
  if (!sol) return std::nullopt;
  sol->resize(own.size());
  return sol;
}

std::vector<NashResult> solve_one_player(const NormalFormGame& game,
                                         double tolerance) {
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < game.actions(0); ++a) best = std::max(best, game.payoff(a, 0));
  std::vector<NashResult> out;
  for (int a = 0; a < game.actions(0); ++a) {
    if (game.payoff(a, 0) >= best - tolerance) {
      out.push_back(certify(game, pure_profile(game, {a})));
    }
  }
  return out;
}

// Iterated removal of pure strategies strictly dominated by pure strategies.
// Preserves the full equilibrium set.
std::vector<std::vector<int>> undominated_actions(const NormalFormGame& game) {
  std::vector<std::vector<int>> alive(2);
  for (int i = 0; i < 2; ++i) {
    alive[i].resize(game.actions(i));
    std::iota(alive[i].begin(), alive[i].end(), 0);
  }
  auto u = [&](int player, int own, int other) {
    std::vector<int> p(2);
    p[player] = own;
    p[1 - player] = other;
    return game.payoff(game.index(p), player);
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (int i = 0; i < 2; ++i) {
      std::vector<int> keep;
      for (int a : alive[i]) {
        bool dominated = false;
        for (int b : alive[i]) {
          if (b == a) continue;
          bool strictly = true;
          for (int o : alive[1 - i]) {
            if (!(u(i, b, o) > u(i, a, o))) {
              strictly = false;
              break;
            }
          }
          if (strictly) {
            dominated = true;
            break;
          }
        }
        if (!dominated) keep.push_back(a);
      }
      if (keep.size() != alive[i].size()) {
        alive[i] = std::move(keep);
        changed = true;
      }
    }
  }
  return alive;
}

}  // namespace

std::vector<double> expected_value(const NormalFormGame& game,
                                   const MixedProfile& profile) {
  check_dimensions(game, profile);
  std::vector<double> v(game.players(), 0.0);
  for (int x = 0; x < game.profiles(); ++x) {
    auto p = game.profile(x);
    double w = 1.0;
    for (int i = 0; i < game.players() && w != 0.0; ++i) w *= profile[i][p[i]];
    if (w == 0.0) continue;
    for (int i = 0; i < game.players(); ++i) v[i] += w * game.payoff(x, i);
  }
  return v;
}

std::vector<std::vector<double>> deviation_values(const NormalFormGame& game,
                                                  const MixedProfile& profile) {
  check_dimensions(game, profile);
  const int n = game.players();
  std::vector<std::vector<double>> dev(n);
  for (int i = 0; i < n; ++i) dev[i].assign(game.actions(i), 0.0);
  // Odometer over profiles in index order; the last player moves fastest.
  std::vector<int> p(n, 0);
  std::vector<double> prefix(n + 1, 1.0), suffix(n + 1, 1.0);
  for (int x = 0; x < game.profiles(); ++x) {
    for (int j = 0; j < n; ++j) prefix[j + 1] = prefix[j] * profile[j][p[j]];
    for (int j = n - 1; j >= 0; --j) suffix[j] = suffix[j + 1] * profile[j][p[j]];
    for (int i = 0; i < n; ++i) {
      const double w = prefix[i] * suffix[i + 1];
      if (w != 0.0) dev[i][p[i]] += w * game.payoff(x, i);
    }
    for (int j = n - 1; j >= 0; --j) {
      if (++p[j] < game.actions(j)) break;
      p[j] = 0;
    }
  }
  return dev;
}

std::vector<double> regret(const NormalFormGame& game,
                           const MixedProfile& profile) {
  auto dev = deviation_values(game, profile);
  auto v = expected_value(game, profile);
  std::vector<double> out(game.players());
  for (int i = 0; i < game.players(); ++i) {
    out[i] = *std::max_element(dev[i].begin(), dev[i].end()) - v[i];
  }
  return out;
}

double max_regret(const NormalFormGame& game, const MixedProfile& profile) {
  auto r = regret(game, profile);
  return *std::max_element(r.begin(), r.end());
}

std::vector<NashResult> pure_equilibria(const NormalFormGame& game,
                                        double tolerance) {
  std::vector<NashResult> out;
  const int n = game.players();
  for (int x = 0; x < game.profiles(); ++x) {
    auto p = game.profile(x);
    bool stable = true;
    for (int i = 0; i < n && stable; ++i) {
      const double current = game.payoff(x, i);
      auto q = p;
      for (int a = 0; a < game.actions(i); ++a) {
        q[i] = a;
        if (game.payoff(game.index(q), i) > current + tolerance) {
          stable = false;
          break;
        }
      }
    }
    if (stable) out.push_back(certify(game, pure_profile(game, p)));
  }
  return out;
}

std::vector<NashResult> solve_nash_exact(const NormalFormGame& game,
                                         double tolerance) {
  if (game.players() == 1) return solve_one_player(game, 1e-12 * payoff_scale(game));
  if (game.players() != 2) {
    throw DimensionMismatch("support enumeration needs one or two players");
  }
  const auto alive = undominated_actions(game);
  const int m = static_cast<int>(alive[0].size());
  const int n = static_cast<int>(alive[1].size());

  double lo = std::numeric_limits<double>::infinity();
  for (int x = 0; x < game.profiles(); ++x) {
    lo = std::min({lo, game.payoff(x, 0), game.payoff(x, 1)});
  }
  // row_for_col[k][j]: player 1's shifted payoff of row k vs column j, and
  // col_for_row[l][i]: player 2's shifted payoff of column l vs row i.
  std::vector<std::vector<double>> row_payoff(m, std::vector<double>(n));
  std::vector<std::vector<double>> col_payoff(n, std::vector<double>(m));
  for (int k = 0; k < m; ++k) {
    for (int l = 0; l < n; ++l) {
      const int x = game.index({alive[0][k], alive[1][l]});
      row_payoff[k][l] = game.payoff(x, 0) - lo + 1.0;
      col_payoff[l][k] = game.payoff(x, 1) - lo + 1.0;
    }
  }

  struct SupportPair {
    std::vector<int> rows, cols;
  };
  std::vector<SupportPair> pairs;
  const bool all_pairs = m + n <= 16;
  for (int total = 2; total <= m + n; ++total) {
    for (int k = 1; k <= m; ++k) {
      const int l = total - k;
      if (l < 1 || l > n) continue;
      if (!all_pairs && k != l) continue;
      for (auto& rows : subsets_of_size(m, k)) {
        for (auto& cols : subsets_of_size(n, l)) pairs.push_back({rows, cols});
      }
    }
  }

  std::vector<NashResult> out;
  for (const auto& pair : pairs) {
    auto y = indifference_mix(row_payoff, pair.cols, pair.rows);
    if (!y) continue;
    auto x = indifference_mix(col_payoff, pair.rows, pair.cols);
    if (!x) continue;
    MixedProfile profile(2);
    profile[0].assign(game.actions(0), 0.0);
    profile[1].assign(game.actions(1), 0.0);
    double mass_x = 0.0, mass_y = 0.0;
    for (std::size_t j = 0; j < pair.rows.size(); ++j) mass_x += (*x)[j];
    for (std::size_t j = 0; j < pair.cols.size(); ++j) mass_y += (*y)[j];
    for (std::size_t j = 0; j < pair.rows.size(); ++j) {
      profile[0][alive[0][pair.rows[j]]] = (*x)[j] / mass_x;
    }
    for (std::size_t j = 0; j < pair.cols.size(); ++j) {
      profile[1][alive[1][pair.cols[j]]] = (*y)[j] / mass_y;
    }
    NashResult r = certify(game, std::move(profile));
    if (r.regret <= tolerance) add_unique(out, std::move(r));
  }
  return out;
}

namespace {

using Support = std::vector<std::vector<int>>;

// Newton's method on the indifference system of a fixed support.
std::optional<MixedProfile> polish_on_support(const NormalFormGame& game,
                                              const Support& support,
                                              MixedProfile start) {
  const int n = game.players();
  std::vector<int> offset(n + 1, 0);
  for (int i = 0; i < n; ++i) {
    offset[i + 1] = offset[i] + static_cast<int>(support[i].size());
  }
  const int nx = offset[n];
  const int dim = nx + n;
  std::vector<int> position_of(0);
  std::vector<std::vector<int>> pos(n);
  for (int i = 0; i < n; ++i) {
    pos[i].assign(game.actions(i), -1);
    for (std::size_t k = 0; k < support[i].size(); ++k) {
      pos[i][support[i][k]] = offset[i] + static_cast<int>(k);
    }
  }
  MixedProfile p(n);
  for (int i = 0; i < n; ++i) {
    p[i].assign(game.actions(i), 0.0);
    double mass = 0.0;
    for (int a : support[i]) mass += std::max(start[i][a], 1e-3);
    for (int a : support[i]) p[i][a] = std::max(start[i][a], 1e-3) / mass;
  }
  Eigen::VectorXd z(dim);
  {
    auto v = expected_value(game, p);
    for (int i = 0; i < n; ++i) {
      for (int a : support[i]) z(pos[i][a]) = p[i][a];
      z(nx + i) = v[i];
    }
  }
  for (int iter = 0; iter < 60; ++iter) {
    for (int i = 0; i < n; ++i) {
      for (int a : support[i]) p[i][a] = z(pos[i][a]);
    }
    Eigen::VectorXd f = Eigen::VectorXd::Zero(dim);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim, dim);
    // f rows: [offset[i]+k] -> U_i(a_k, p_-i) - v_i ; [nx+i] -> sum p_i - 1.
    for (int x = 0; x < game.profiles(); ++x) {
      auto prof = game.profile(x);
      for (int i = 0; i < n; ++i) {
        const int row = pos[i][prof[i]];
        if (row < 0) continue;
        double w = 1.0;
        bool inside = true;
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          if (pos[j][prof[j]] < 0) {
            inside = false;
            break;
          }
          w *= p[j][prof[j]];
        }
        if (!inside) continue;
        const double u = game.payoff(x, i);
        f(row) += w * u;
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          double w2 = 1.0;
          for (int k = 0; k < n; ++k) {
            if (k != i && k != j) w2 *= p[k][prof[k]];
          }
          jac(row, pos[j][prof[j]]) += w2 * u;
        }
      }
    }
    for (int i = 0; i < n; ++i) {
      for (int a : support[i]) {
        f(pos[i][a]) -= z(nx + i);
        jac(pos[i][a], nx + i) = -1.0;
      }
      double mass = 0.0;
      for (int a : support[i]) {
        mass += z(pos[i][a]);
        jac(nx + i, pos[i][a]) = 1.0;
      }
      f(nx + i) = mass - 1.0;
    }
    if (f.lpNorm<Eigen::Infinity>() < 1e-14) break;
    Eigen::VectorXd step = jac.colPivHouseholderQr().solve(-f);
    if (!step.allFinite()) return std::nullopt;
    z += step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-15) break;
  }
  MixedProfile out(n);
  for (int i = 0; i < n; ++i) {
    out[i].assign(game.actions(i), 0.0);
    double mass = 0.0;
    for (int a : support[i]) {
      const double v = z(pos[i][a]);
      if (!(v > -1e-9)) return std::nullopt;
      out[i][a] = std::max(0.0, v);
      mass += out[i][a];
    }
    if (!(mass > 0.0)) return std::nullopt;
    for (double& v : out[i]) v /= mass;
  }
  return out;
}

Support support_of(const MixedProfile& p, double threshold) {
  Support s(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t a = 0; a < p[i].size(); ++a) {
      if (p[i][a] > threshold) s[i].push_back(static_cast<int>(a));
      if (p[i][a] > p[i][best]) best = a;
    }
    if (s[i].empty()) s[i].push_back(static_cast<int>(best));
  }
  return s;
}

MixedProfile smoothed_dynamics(const NormalFormGame& game, MixedProfile p,
                               int iterations, double scale) {
  const int n = game.players();
  double temperature = scale;
  const double cooling = std::pow(1e-5, 1.0 / std::max(1, iterations));
  for (int it = 0; it < iterations; ++it) {
    auto dev = deviation_values(game, p);
    const double step = 2.0 / (it + 10.0);
    for (int i = 0; i < n; ++i) {
      const double top = *std::max_element(dev[i].begin(), dev[i].end());
      std::vector<double> soft(dev[i].size());
      double z = 0.0;
      for (std::size_t a = 0; a < soft.size(); ++a) {
        soft[a] = std::exp((dev[i][a] - top) / temperature);
        z += soft[a];
      }
      for (std::size_t a = 0; a < soft.size(); ++a) {
        p[i][a] = (1.0 - step) * p[i][a] + step * soft[a] / z;
      }
    }
    temperature *= cooling;
  }
  return p;
}

// Enumerate simplex grid points with denominator `denom` per player.
void for_each_grid_profile(const NormalFormGame& game, int denom,
                           const std::function<void(const MixedProfile&)>& visit) {
  const int n = game.players();
  std::vector<std::vector<std::vector<double>>> per_player(n);
  for (int i = 0; i < n; ++i) {
    const int k = game.actions(i);
    std::vector<int> counts(k, 0);
    std::function<void(int, int)> rec = [&](int slot, int left) {
      if (slot == k - 1) {
        counts[slot] = left;
        std::vector<double> mix(k);
        for (int a = 0; a < k; ++a) mix[a] = static_cast<double>(counts[a]) / denom;
        per_player[i].push_back(std::move(mix));
        return;
      }
      for (int c = left; c >= 0; --c) {
        counts[slot] = c;
        rec(slot + 1, left - c);
      }
    };
    rec(0, denom);
  }
  MixedProfile p(n);
  std::function<void(int)> rec = [&](int i) {
    if (i == n) {
      visit(p);
      return;
    }
    for (const auto& mix : per_player[i]) {
      p[i] = mix;
      rec(i + 1);
    }
  };
  rec(0);
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int j = 1; j <= k; ++j) r = r * (n - k + j) / j;
  return r;
}

}  // namespace

NashResult solve_nash_iterative(const NormalFormGame& game,
                                const IterativeOptions& options) {
  if (!(options.epsilon > 0.0)) {
    throw std::invalid_argument("iterative solver needs epsilon > 0");
  }
  const int n = game.players();
  auto pure = pure_equilibria(game, 0.0);
  if (!pure.empty()) return pure.front();

  const double scale = payoff_scale(game);
  double best_regret = std::numeric_limits<double>::infinity();
  auto consider = [&](const MixedProfile& candidate) -> std::optional<NashResult> {
    NashResult r = certify(game, candidate);
    best_regret = std::min(best_regret, r.regret);
    if (r.regret <= options.epsilon) return r;
    return std::nullopt;
  };

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  for (int restart = 0; restart < options.restarts; ++restart) {
    MixedProfile p(n);
    for (int i = 0; i < n; ++i) {
      p[i].resize(game.actions(i));
      double mass = 0.0;
      for (double& v : p[i]) {
        v = restart == 0 ? 1.0 : unit(rng);
        mass += v;
      }
      for (double& v : p[i]) v /= mass;
    }
    p = smoothed_dynamics(game, std::move(p), options.iterations, scale);
    if (auto r = consider(p)) return *r;
    for (double threshold : {1e-2, 1e-3, 1e-4}) {
      if (auto polished = polish_on_support(game, support_of(p, threshold), p)) {
        if (auto r = consider(*polished)) return *r;
      }
    }
  }

  // Exhaustive support search with Newton from the uniform point.
  std::vector<std::vector<std::vector<int>>> subsets(n);
  std::size_t combos = 1;
  for (int i = 0; i < n; ++i) {
    for (int k = 1; k <= game.actions(i); ++k) {
      for (auto& s : subsets_of_size(game.actions(i), k)) subsets[i].push_back(s);
    }
    combos *= subsets[i].size();
  }
  if (combos <= 200'000) {
    std::vector<std::size_t> order(combos);
    std::iota(order.begin(), order.end(), 0);
    auto decode = [&](std::size_t code) {
      Support s(n);
      for (int i = n - 1; i >= 0; --i) {
        s[i] = subsets[i][code % subsets[i].size()];
        code /= subsets[i].size();
      }
      return s;
    };
    auto total_size = [&](std::size_t code) {
      std::size_t t = 0;
      for (auto& s : decode(code)) t += s.size();
      return t;
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return total_size(a) < total_size(b);
    });
    for (std::size_t code : order) {
      Support s = decode(code);
      MixedProfile start(n);
      for (int i = 0; i < n; ++i) {
        start[i].assign(game.actions(i), 0.0);
        for (int a : s[i]) start[i][a] = 1.0 / s[i].size();
      }
      if (auto polished = polish_on_support(game, s, start)) {
        if (auto r = consider(*polished)) return *r;
      }
    }
  }

  // Grid fallback: mesh fine enough that rounding an exact equilibrium onto
  // the grid costs at most epsilon in regret.
  int max_actions = 1;
  for (int i = 0; i < n; ++i) max_actions = std::max(max_actions, game.actions(i));
  const double needed =
      scale * (2.0 * n - 1.0) * max_actions / options.epsilon;
  if (needed < 1e6) {
    const int denom = std::max(1, static_cast<int>(std::ceil(needed)));
    double size = 1.0;
    for (int i = 0; i < n; ++i) {
      size *= binomial(denom + game.actions(i) - 1, game.actions(i) - 1);
    }
    if (size <= static_cast<double>(options.grid_budget)) {
      std::optional<NashResult> found;
      for_each_grid_profile(game, denom, [&](const MixedProfile& p) {
        if (!found) found = consider(p);
      });
      if (found) return *found;
    }
  }
  throw BudgetExceeded("no certified equilibrium within budget", best_regret);
}

std::vector<NashResult> solve_nash_all(const NormalFormGame& game,
                                       const IterativeOptions& options) {
  if (game.players() <= 2) {
    auto exact = solve_nash_exact(game, 1e-9);
    if (!exact.empty()) return exact;
    return {solve_nash_iterative(game, options)};
  }
  auto pure = pure_equilibria(game, 0.0);
  if (!pure.empty()) return pure;
  return {solve_nash_iterative(game, options)};
}

}  // namespace spe
