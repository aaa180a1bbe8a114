#include "spe/game.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace spe {

History History::extend(const ActionProfile& x, int s) const {
  History h = *this;
  h.actions.push_back(x);
  h.states.push_back(s);
  return h;
}

History History::prefix(int t) const {
  History h;
  h.initial = initial;
  h.actions.assign(actions.begin(), actions.begin() + t);
  h.states.assign(states.begin(), states.begin() + t);
  return h;
}

std::string History::label() const {
  std::ostringstream out;
  out << initial;
  for (std::size_t k = 0; k < actions.size(); ++k) {
    out << '/';
    for (std::size_t i = 0; i < actions[k].size(); ++i) {
      if (i > 0) out << ',';
      out << actions[k][i];
    }
    out << ':' << states[k];
  }
  return out.str();
}

History History::parse(const std::string& label) {
  History h;
  std::size_t pos = label.find('/');
  try {
    h.initial = std::stoi(label.substr(0, pos));
    while (pos != std::string::npos) {
      std::size_t next = label.find('/', pos + 1);
      std::string part = label.substr(pos + 1, next == std::string::npos
                                                   ? std::string::npos
                                                   : next - pos - 1);
      std::size_t colon = part.find(':');
      if (colon == std::string::npos) {
        throw std::invalid_argument("missing ':'");
      }
      ActionProfile x;
      std::stringstream actions(part.substr(0, colon));
      std::string item;
      while (std::getline(actions, item, ',')) x.push_back(std::stoi(item));
      h.actions.push_back(std::move(x));
      h.states.push_back(std::stoi(part.substr(colon + 1)));
      pos = next;
    }
  } catch (const std::exception& e) {
    throw std::invalid_argument("malformed history label '" + label +
                                "': " + e.what());
  }
  return h;
}

const StageSpec& GameSpec::stage(int t) const {
  if (t < 1 || stages.empty()) {
    throw std::out_of_range("stage index " + std::to_string(t));
  }
  if (horizon && t > *horizon) {
    throw std::out_of_range("stage " + std::to_string(t) +
                            " beyond horizon " + std::to_string(*horizon));
  }
  return stages[(t - 1) % stages.size()];
}

std::vector<int> GameSpec::feasible_actions(int t, int player,
                                            const History& prev) const {
  if (feasible) return feasible(t, player, prev);
  std::vector<int> all(stage(t).action_counts.at(player));
  for (std::size_t a = 0; a < all.size(); ++a) all[a] = static_cast<int>(a);
  return all;
}

std::vector<double> GameSpec::density_row(int t, const History& prev,
                                          const ActionProfile& x) const {
  if (density) return density(t, prev, x);
  return std::vector<double>(stage(t).grid.size(), 1.0);
}

Payoff GameSpec::evaluate(const History& h) const {
  if (const auto* terminal = std::get_if<TerminalPayoffFn>(&payoff)) {
    return (*terminal)(h);
  }
  const auto& dec = std::get<DecomposedPayoff>(payoff);
  Payoff total(players, 0.0);
  for (int t = 1; t <= h.stage(); ++t) {
    Payoff g = dec.stage(t, h.prefix(t - 1), h.actions[t - 1],
                         h.states[t - 1]);
    for (int i = 0; i < players; ++i) {
      total[i] += std::pow(dec.discount[i], t - 1) * g[i];
    }
  }
  return total;
}

Payoff GameSpec::stage_reward(int t, const History& prev,
                              const ActionProfile& x, int s) const {
  if (!decomposed()) return Payoff(players, 0.0);
  const auto& dec = std::get<DecomposedPayoff>(payoff);
  Payoff g = dec.stage(t, prev, x, s);
  for (int i = 0; i < players; ++i) g[i] *= std::pow(dec.discount[i], t - 1);
  return g;
}

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
  std::string out = "invalid game:";
  for (const auto& issue : issues) out += "\n  " + issue;
  return out;
}

std::string profile_label(const ActionProfile& x) {
  std::string out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(x[i]);
  }
  return out;
}

std::string format_number(double v) {
  std::ostringstream out;
  out.precision(12);
  out << v;
  return out.str();
}

struct StageFacts {
  bool stochastic = false;
  std::set<int> movers;
};

}  // namespace

ValidationError::ValidationError(std::vector<std::string> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

std::vector<ActionProfile> profile_product(
    const std::vector<std::vector<int>>& per_player) {
  std::vector<ActionProfile> out(1);
  for (const auto& actions : per_player) {
    std::vector<ActionProfile> next;
    next.reserve(out.size() * actions.size());
    for (const auto& prefix : out) {
      for (int a : actions) {
        ActionProfile x = prefix;
        x.push_back(a);
        next.push_back(std::move(x));
      }
    }
    out = std::move(next);
  }
  return out;
}

const StageClass& ValidatedGame::stage_class(int t) const {
  if (t < 1) throw std::out_of_range("stage index " + std::to_string(t));
  if (t > checked_depth()) {
    // Cyclic infinite games repeat their classes.
    return classes_[(t - 1) % spec_->stages.size()];
  }
  return classes_[t - 1];
}

ValidatedGame validate_spec(std::shared_ptr<const GameSpec> spec_ptr,
                            const ValidationOptions& options) {
  const GameSpec& spec = *spec_ptr;
  std::vector<std::string> issues;
  auto fail = [&](std::string message) { issues.push_back(std::move(message)); };

  if (spec.players < 1) fail("player count must be >= 1");
  if (spec.initial.empty()) fail("no initial points");
  if (spec.stages.empty()) fail("no stages");
  if (spec.gamma <= 0.0) fail("payoff bound gamma must be > 0");
  if (spec.horizon && *spec.horizon < 1) fail("horizon must be >= 1");
  if (spec.horizon && static_cast<int>(spec.stages.size()) != *spec.horizon) {
    fail("finite horizon " + std::to_string(*spec.horizon) + " but " +
         std::to_string(spec.stages.size()) + " stage blocks");
  }
  if (!spec.horizon && !spec.decomposed()) {
    fail("infinite-horizon games need decomposed stage payoffs");
  }
  if (spec.markov_key && !spec.decomposed()) {
    fail("history compression requires decomposed stage payoffs");
  }
  if (spec.decomposed()) {
    const auto& dec = std::get<DecomposedPayoff>(spec.payoff);
    if (static_cast<int>(dec.discount.size()) != spec.players) {
      fail("discount vector size differs from player count");
    }
    for (double d : dec.discount) {
      if (!(d >= 0.0 && d < 1.0)) {
        fail("discount factor " + format_number(d) + " outside [0,1)");
      }
    }
    if (!(dec.stage_bound > 0.0)) fail("stage payoff bound must be > 0");
  }
  double initial_mass = 0.0;
  for (const auto& p : spec.initial) {
    if (p.weight < 0.0) fail("negative initial weight");
    initial_mass += p.weight;
  }
  if (!spec.initial.empty() && std::abs(initial_mass - 1.0) > 1e-9) {
    fail("initial weights sum to " + format_number(initial_mass));
  }
  for (std::size_t k = 0; k < spec.stages.size(); ++k) {
    const StageSpec& st = spec.stages[k];
    const std::string where = "stage " + std::to_string(k + 1);
    if (static_cast<int>(st.action_counts.size()) != spec.players) {
      fail(where + ": action grid count differs from player count");
    }
    for (int c : st.action_counts) {
      if (c < 1) fail(where + ": empty action grid");
    }
    if (st.grid.points.empty() || st.grid.points.size() != st.grid.weights.size()) {
      fail(where + ": state grid points/weights mismatch");
    } else {
      double mass = 0.0;
      for (double w : st.grid.weights) {
        if (w < 0.0) fail(where + ": negative reference weight");
        mass += w;
      }
      if (std::abs(mass - 1.0) > 1e-12) {
        fail(where + ": reference weights sum to " + format_number(mass));
      }
    }
    if (st.declared == StageKind::kSimultaneous && st.grid.size() < 2) {
      fail(where + ": simultaneous stage needs >= 2 state points");
    }
    if (st.declared == StageKind::kPerfectInfo && st.grid.size() != 1) {
      fail(where + ": perfect-information stage needs a singleton state grid, got " +
           std::to_string(st.grid.size()) + " points");
    }
    if (!st.envelope.empty() && st.envelope.size() != st.grid.size()) {
      fail(where + ": envelope size differs from grid size");
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));

  const int depth =
      spec.horizon ? *spec.horizon
                   : (options.infinite_depth > 0
                          ? options.infinite_depth
                          : 2 * static_cast<int>(spec.stages.size()));
  std::vector<StageFacts> facts(depth);

  std::vector<History> frontier;
  for (std::size_t k = 0; k < spec.initial.size(); ++k) {
    History h;
    h.initial = static_cast<int>(k);
    frontier.push_back(h);
  }
  std::size_t visited = 0;
  for (int t = 1; t <= depth && issues.size() < 50; ++t) {
    const StageSpec& st = spec.stage(t);
    std::vector<History> next;
    std::set<std::int64_t> seen_keys;
    for (const History& prev : frontier) {
      const std::string where = "h=" + prev.label();
      std::vector<std::vector<int>> feasible(spec.players);
      bool ok = true;
      for (int i = 0; i < spec.players; ++i) {
        feasible[i] = spec.feasible_actions(t, i, prev);
        if (feasible[i].empty()) {
          fail("stage " + std::to_string(t) + ": empty feasibility set for player " +
               std::to_string(i + 1) + " at " + where);
          ok = false;
        }
        for (int a : feasible[i]) {
          if (a < 0 || a >= st.action_counts[i]) {
            fail("stage " + std::to_string(t) + ": action " + std::to_string(a) +
                 " out of grid for player " + std::to_string(i + 1) + " at " + where);
            ok = false;
          }
        }
        if (feasible[i].size() > 1) facts[t - 1].movers.insert(i);
      }
      if (!ok) continue;
      for (const ActionProfile& x : profile_product(feasible)) {
        std::vector<double> row = spec.density_row(t, prev, x);
        if (row.size() != st.grid.size()) {
          fail("stage " + std::to_string(t) + ": density row of arity " +
               std::to_string(row.size()) + " (grid has " +
               std::to_string(st.grid.size()) + ") at " + where);
          continue;
        }
        double mass = 0.0;
        int positive = 0;
        for (std::size_t s = 0; s < row.size(); ++s) {
          if (row[s] < 0.0) {
            fail("stage " + std::to_string(t) + ": negative density at " + where);
          }
          if (!st.envelope.empty() && row[s] > st.envelope[s] + 1e-12) {
            fail("stage " + std::to_string(t) + ": density exceeds envelope at " +
                 where);
          }
          double p = row[s] * st.grid.weights[s];
          mass += p;
          if (p > 0.0) ++positive;
        }
        if (std::abs(mass - 1.0) > options.density_tolerance) {
          fail("density mass " + format_number(mass) + " != 1 at " + where +
               " x=" + profile_label(x));
          continue;
        }
        if (positive > 1) facts[t - 1].stochastic = true;
        for (std::size_t s = 0; s < row.size(); ++s) {
          History h = prev.extend(x, static_cast<int>(s));
          if (spec.decomposed()) {
            const auto& dec = std::get<DecomposedPayoff>(spec.payoff);
            Payoff g = dec.stage(t, prev, x, static_cast<int>(s));
            if (static_cast<int>(g.size()) != spec.players) {
              fail("stage payoff arity mismatch at " + h.label());
            } else {
              for (double v : g) {
                if (!(v >= 0.0 && v <= dec.stage_bound + 1e-12)) {
                  fail("stage payoff " + format_number(v) + " outside [0, " +
                       format_number(dec.stage_bound) + "] at " + h.label());
                }
              }
            }
          } else if (t == depth) {
            Payoff u = spec.evaluate(h);
            if (static_cast<int>(u.size()) != spec.players) {
              fail("payoff arity mismatch at " + h.label());
            } else {
              for (double v : u) {
                if (!(v >= options.payoff_floor && v <= spec.gamma + 1e-12)) {
                  fail("payoff " + format_number(v) + " outside (0, " +
                       format_number(spec.gamma) + "] at " + h.label());
                }
              }
            }
          }
          if (t < depth) {
            if (spec.markov_key) {
              if (!seen_keys.insert(spec.markov_key(t, h)).second) continue;
            }
            next.push_back(std::move(h));
          }
          if (++visited > options.history_budget) {
            fail("history budget exceeded during validation at stage " +
                 std::to_string(t));
            throw ValidationError(std::move(issues));
          }
        }
      }
    }
    frontier = std::move(next);
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));

  ValidatedGame game;
  game.spec_ = std::move(spec_ptr);
  for (int t = 1; t <= depth; ++t) {
    const StageFacts& f = facts[t - 1];
    StageClass cls;
    const bool single_point = spec.stage(t).grid.size() == 1;
    if (!f.stochastic && single_point && f.movers.size() <= 1) {
      cls.kind = StageKind::kPerfectInfo;
      cls.active_player = f.movers.empty() ? 0 : *f.movers.begin();
    }
    if (spec.stage(t).declared == StageKind::kPerfectInfo &&
        cls.kind != StageKind::kPerfectInfo) {
      issues.push_back("stage " + std::to_string(t) +
                       ": declared perfect-information but " +
                       (f.stochastic ? "kernel is not Dirac"
                                     : "more than one player moves"));
    }
    game.classes_.push_back(cls);
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return game;
}

std::vector<History> enumerate_histories(const ValidatedGame& game, int t) {
  const GameSpec& spec = game.spec();
  std::vector<History> level;
  for (std::size_t k = 0; k < spec.initial.size(); ++k) {
    History h;
    h.initial = static_cast<int>(k);
    level.push_back(h);
  }
  for (int k = 1; k <= t; ++k) {
    std::vector<History> next;
    const int states = static_cast<int>(spec.stage(k).grid.size());
    for (const History& prev : level) {
      std::vector<std::vector<int>> feasible(spec.players);
      for (int i = 0; i < spec.players; ++i) {
        feasible[i] = spec.feasible_actions(k, i, prev);
      }
      for (const ActionProfile& x : profile_product(feasible)) {
        for (int s = 0; s < states; ++s) next.push_back(prev.extend(x, s));
      }
    }
    level = std::move(next);
  }
  return level;
}

StageClass stage_class(const ValidatedGame& game, int t) {
  return game.stage_class(t);
}

bool history_consistent(const GameSpec& spec, const History& h) {
  if (h.initial < 0 || h.initial >= static_cast<int>(spec.initial.size())) {
    return false;
  }
  if (h.actions.size() != h.states.size()) return false;
  for (int t = 1; t <= h.stage(); ++t) {
    const History prev = h.prefix(t - 1);
    const ActionProfile& x = h.actions[t - 1];
    if (static_cast<int>(x.size()) != spec.players) return false;
    for (int i = 0; i < spec.players; ++i) {
      auto feasible = spec.feasible_actions(t, i, prev);
      if (std::find(feasible.begin(), feasible.end(), x[i]) == feasible.end()) {
        return false;
      }
    }
    const int s = h.states[t - 1];
    if (s < 0 || s >= static_cast<int>(spec.stage(t).grid.size())) return false;
  }
  return true;
}

}  // namespace spe
