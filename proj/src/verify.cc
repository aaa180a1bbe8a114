#include "spe/verify.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <random>
#include <tuple>

namespace spe {

int StrategyProfile::profile_index(const DecisionPoint& p,
                                   const ActionProfile& x) const {
  if (x.size() != p.feasible.size()) return -1;
  int idx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto& list = p.feasible[i];
    auto it = std::find(list.begin(), list.end(), x[i]);
    if (it == list.end()) return -1;
    idx = idx * static_cast<int>(list.size()) + static_cast<int>(it - list.begin());
  }
  return idx;
}

int StrategyProfile::locate(const History& h) const {
  if (h.initial < 0 || h.initial >= static_cast<int>(roots.size())) return -1;
  if (h.stage() >= horizon) return -1;
  int state = roots[h.initial];
  for (int k = 0; k < h.stage(); ++k) {
    const StrategyState& s = states[state];
    const DecisionPoint& p = point(s);
    const int x = profile_index(p, h.actions[k]);
    if (x < 0 || h.states[k] < 0 || h.states[k] >= p.states) return -1;
    state = s.next[x * p.states + h.states[k]];
    if (state < 0) return -1;
  }
  return state;
}

double StrategyProfile::probability(const StrategyState& s, int profile) const {
  const DecisionPoint& p = point(s);
  double prob = 1.0;
  for (int i = static_cast<int>(p.feasible.size()) - 1; i >= 0; --i) {
    const int m = static_cast<int>(p.feasible[i].size());
    prob *= s.play[i][profile % m];
    profile /= m;
  }
  return prob;
}

double PathMeasure::total_mass() const {
  double m = 0.0;
  for (const auto& a : atoms) m += a.mass;
  return m;
}

namespace {

double kernel_mass(const GameSpec& spec, int t, const std::vector<double>& row, int s) {
  return row[s] * spec.stage(t).grid.weights[s];
}

}  // namespace

PathMeasure induce_path(const GameSpec& spec, const StrategyProfile& f,
                        const History& h, std::optional<int> until,
                        std::size_t atom_budget) {
  const int last = until ? *until : f.horizon;
  if (last > f.horizon) {
    throw std::invalid_argument("path requested beyond the profile horizon");
  }
  PathMeasure path;
  path.root = h;
  path.atoms.push_back({h, 1.0});
  for (int t = h.stage() + 1; t <= last; ++t) {
    std::vector<PathAtom> next;
    for (const auto& atom : path.atoms) {
      const int state = f.locate(atom.history);
      if (state < 0) {
        throw std::invalid_argument("profile undefined at " + atom.history.label());
      }
      const StrategyState& st = f.states[state];
      const DecisionPoint& p = f.point(st);
      for (std::size_t x = 0; x < p.profiles.size(); ++x) {
        const double px = f.probability(st, static_cast<int>(x));
        if (px <= 0.0) continue;
        const auto row = spec.density_row(t, atom.history, p.profiles[x]);
        for (int s = 0; s < p.states; ++s) {
          const double ps = kernel_mass(spec, t, row, s);
          if (ps <= 0.0) continue;
          next.push_back({atom.history.extend(p.profiles[x], s), atom.mass * px * ps});
          if (next.size() > atom_budget) {
            throw PathBudgetExceeded("path measure exceeds atom budget at stage " +
                                     std::to_string(t));
          }
        }
      }
    }
    path.atoms = std::move(next);
  }
  return path;
}

PathMeasure path_marginal(const PathMeasure& path, int t) {
  PathMeasure out;
  out.root = path.root;
  std::map<History, double> mass;
  for (const auto& a : path.atoms) mass[a.history.prefix(t)] += a.mass;
  for (auto& [h, m] : mass) out.atoms.push_back({h, m});
  return out;
}

Payoff expected_payoff(const GameSpec& spec, const PathMeasure& path) {
  Payoff total(spec.players, 0.0);
  for (const auto& a : path.atoms) {
    const Payoff u = spec.evaluate(a.history);
    for (int i = 0; i < spec.players; ++i) total[i] += a.mass * u[i];
  }
  return total;
}

namespace {

// Per-profile continuation W[x] = sum_s P(s) (g(x,s) + V(next)), with the
// terminal payoff at the last stage of terminal-payoff games.
std::vector<Payoff> profile_values(const GameSpec& spec, const StrategyProfile& f,
                                   const StrategyState& st,
                                   const std::vector<Payoff>& values) {
  const DecisionPoint& p = f.point(st);
  const int n = spec.players;
  std::vector<Payoff> w(p.profiles.size(), Payoff(n, 0.0));
  for (std::size_t x = 0; x < p.profiles.size(); ++x) {
    const auto row = spec.density_row(p.t, p.rep, p.profiles[x]);
    for (int s = 0; s < p.states; ++s) {
      const double ps = kernel_mass(spec, p.t, row, s);
      if (ps == 0.0) continue;
      Payoff cont(n, 0.0);
      const int nx = st.next[x * p.states + s];
      if (nx >= 0) {
        cont = values[nx];
      } else if (!spec.decomposed()) {
        cont = spec.evaluate(p.rep.extend(p.profiles[x], s));
      }
      const Payoff g = spec.decomposed() ? spec.stage_reward(p.t, p.rep, p.profiles[x], s)
                                         : Payoff(n, 0.0);
      for (int i = 0; i < n; ++i) w[x][i] += ps * (g[i] + cont[i]);
    }
  }
  return w;
}

}  // namespace

std::vector<Payoff> state_values(const GameSpec& spec, const StrategyProfile& f) {
  const int n = spec.players;
  std::vector<int> order(f.states.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return f.point(f.states[a]).t > f.point(f.states[b]).t;
  });
  std::vector<Payoff> values(f.states.size(), Payoff(n, 0.0));
  for (int k : order) {
    const StrategyState& st = f.states[k];
    const auto w = profile_values(spec, f, st, values);
    for (std::size_t x = 0; x < w.size(); ++x) {
      const double px = f.probability(st, static_cast<int>(x));
      if (px == 0.0) continue;
      for (int i = 0; i < n; ++i) values[k][i] += px * w[x][i];
    }
  }
  return values;
}

DeviationReport one_step_deviation_check(const GameSpec& spec,
                                         const StrategyProfile& f, double epsilon) {
  const int n = spec.players;
  const auto values = state_values(spec, f);
  DeviationReport report;
  report.epsilon = epsilon;
  for (std::size_t k = 0; k < f.states.size(); ++k) {
    const StrategyState& st = f.states[k];
    const DecisionPoint& p = f.point(st);
    const auto w = profile_values(spec, f, st, values);
    for (int i = 0; i < n; ++i) {
      const int m = static_cast<int>(p.feasible[i].size());
      std::vector<double> dev(m, 0.0);
      for (std::size_t x = 0; x < p.profiles.size(); ++x) {
        // Probability of the others' part of x, and player i's position.
        double others = 1.0;
        int rest = static_cast<int>(x);
        int mine = 0;
        for (int j = n - 1; j >= 0; --j) {
          const int mj = static_cast<int>(p.feasible[j].size());
          const int pos = rest % mj;
          rest /= mj;
          if (j == i) {
            mine = pos;
          } else {
            others *= st.play[j][pos];
          }
        }
        if (others != 0.0) dev[mine] += others * w[x][i];
      }
      DeviationEntry e;
      e.stage = p.t;
      e.history = p.rep;
      e.player = i + 1;
      e.value = values[k][i];
      e.best_action = 0;
      for (int a = 1; a < m; ++a) {
        if (dev[a] > dev[e.best_action]) e.best_action = a;
      }
      e.best_deviation = dev[e.best_action];
      e.best_action = p.feasible[i][e.best_action];
      e.regret = std::max(0.0, e.best_deviation - e.value);
      report.max_regret = std::max(report.max_regret, e.regret);
      if (e.regret > epsilon) ++report.violations;
      report.entries.push_back(std::move(e));
    }
  }
  std::stable_sort(report.entries.begin(), report.entries.end(),
                   [](const DeviationEntry& a, const DeviationEntry& b) {
                     return std::tie(a.stage, a.history, a.player) <
                            std::tie(b.stage, b.history, b.player);
                   });
  return report;
}

MonteCarloResult monte_carlo_paths(const GameSpec& spec, const StrategyProfile& f,
                                   std::size_t count, std::uint64_t seed,
                                   bool keep_samples, std::optional<int> initial) {
  if (count < 1) throw std::invalid_argument("monte carlo needs count >= 1");
  const int n = spec.players;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](const std::vector<double>& weights) {
    double u = unit(rng);
    int last = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (weights[k] <= 0.0) continue;
      last = static_cast<int>(k);
      if (u < weights[k]) return last;
      u -= weights[k];
    }
    return last;
  };
  std::vector<double> init_w;
  double init_total = 0.0;
  for (const auto& ip : spec.initial) init_total += ip.weight;
  for (const auto& ip : spec.initial) init_w.push_back(ip.weight / init_total);

  MonteCarloResult out;
  out.count = count;
  // Welford running mean and squared deviations.
  Payoff mean(n, 0.0), m2(n, 0.0);
  for (std::size_t c = 0; c < count; ++c) {
    History h;
    h.initial = initial ? *initial : draw(init_w);
    for (int t = 1; t <= f.horizon; ++t) {
      const StrategyState& st = f.states[f.locate(h)];
      const DecisionPoint& p = f.point(st);
      ActionProfile x(n);
      for (int i = 0; i < n; ++i) x[i] = p.feasible[i][draw(st.play[i])];
      const auto row = spec.density_row(t, h, x);
      std::vector<double> ps(p.states);
      for (int s = 0; s < p.states; ++s) ps[s] = kernel_mass(spec, t, row, s);
      h = h.extend(x, draw(ps));
    }
    const Payoff u = spec.evaluate(h);
    for (int i = 0; i < n; ++i) {
      const double delta = u[i] - mean[i];
      mean[i] += delta / static_cast<double>(c + 1);
      m2[i] += delta * (u[i] - mean[i]);
    }
    if (keep_samples) out.samples.push_back(std::move(h));
  }
  out.mean = mean;
  out.std_error.resize(n);
  const double N = static_cast<double>(count);
  for (int i = 0; i < n; ++i) {
    const double var = count > 1 ? m2[i] / (N - 1.0) : 0.0;
    out.std_error[i] = std::sqrt(var / N);
  }
  return out;
}

void write_deviation_table(std::ostream& out, const DeviationReport& report) {
  out << "stage\thistory\tplayer\tvalue\tbest_deviation\tbest_action\tregret\n";
  out << std::setprecision(17);
  for (const auto& e : report.entries) {
    out << e.stage << '\t' << e.history.label() << '\t' << e.player << '\t'
        << e.value << '\t' << e.best_deviation << '\t' << e.best_action << '\t'
        << e.regret << '\n';
  }
}

void write_path_table(std::ostream& out, const PathMeasure& path) {
  out << "history\tmass\n";
  out << std::setprecision(17);
  for (const auto& a : path.atoms) out << a.history.label() << '\t' << a.mass << '\n';
}

}  // namespace spe
