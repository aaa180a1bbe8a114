#include "spe/engine.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <tuple>

#include "spe/verify.h"

namespace spe {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, int t, int node) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(t) << 32 |
                                                     static_cast<std::uint32_t>(node));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t saturating_product(const std::vector<std::size_t>& radices) {
  long double p = 1.0L;
  for (auto r : radices) p *= static_cast<long double>(r);
  if (p >= static_cast<long double>(std::numeric_limits<std::uint64_t>::max())) {
    return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(p);
}

// Position of each player's action within its feasible list.
std::vector<int> positions(const ExpectedContinuationSet& p, int profile) {
  const int n = static_cast<int>(p.feasible.size());
  std::vector<int> pos(n);
  for (int i = n - 1; i >= 0; --i) {
    const int m = static_cast<int>(p.feasible[i].size());
    pos[i] = profile % m;
    profile /= m;
  }
  return pos;
}

int profile_at(const ExpectedContinuationSet& p, const std::vector<int>& pos) {
  int idx = 0;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    idx = idx * static_cast<int>(p.feasible[i].size()) + pos[i];
  }
  return idx;
}

NormalFormGame selection_game(const ExpectedContinuationSet& p,
                              const std::vector<int>& selection) {
  std::vector<int> counts;
  for (const auto& f : p.feasible) counts.push_back(static_cast<int>(f.size()));
  NormalFormGame game(counts);
  for (std::size_t x = 0; x < p.options.size(); ++x) {
    game.set_payoffs(static_cast<int>(x), p.options[x].points[selection[x]]);
  }
  return game;
}

std::vector<int> selection_links(const ExpectedContinuationSet& p,
                                 const std::vector<int>& selection) {
  std::vector<int> links;
  for (std::size_t x = 0; x < p.options.size(); ++x) {
    const auto& l = p.options[x].links[selection[x]];
    links.insert(links.end(), l.begin(), l.end());
  }
  return links;
}

struct MinTable {
  std::vector<std::vector<double>> value;  // [profile][player]
  std::vector<std::vector<int>> index;
};

MinTable min_table(const ExpectedContinuationSet& p) {
  const int n = static_cast<int>(p.feasible.size());
  MinTable m;
  for (const auto& opt : p.options) {
    std::vector<double> v(n, std::numeric_limits<double>::infinity());
    std::vector<int> idx(n, 0);
    for (std::size_t k = 0; k < opt.points.size(); ++k) {
      for (int i = 0; i < n; ++i) {
        if (opt.points[k][i] < v[i]) {
          v[i] = opt.points[k][i];
          idx[i] = static_cast<int>(k);
        }
      }
    }
    m.value.push_back(std::move(v));
    m.index.push_back(std::move(idx));
  }
  return m;
}

// Pure stage witnesses: profile x with continuation v is sustainable under
// some selection iff every unilateral deviation can be answered with the
// deviator's minimum continuation without gain.
std::vector<WitnessRecord> punishment_witnesses(const ExpectedContinuationSet& p,
                                                const MinTable& mins,
                                                double tolerance) {
  const int n = static_cast<int>(p.feasible.size());
  std::vector<WitnessRecord> out;
  for (std::size_t x = 0; x < p.options.size(); ++x) {
    const auto pos = positions(p, static_cast<int>(x));
    // Best the deviator can be held to, per player.
    std::vector<double> threat(n, -std::numeric_limits<double>::infinity());
    for (int i = 0; i < n; ++i) {
      auto dev = pos;
      for (int a = 0; a < static_cast<int>(p.feasible[i].size()); ++a) {
        if (a == pos[i]) continue;
        dev[i] = a;
        threat[i] = std::max(threat[i], mins.value[profile_at(p, dev)][i]);
      }
    }
    const auto& opt = p.options[x];
    for (std::size_t k = 0; k < opt.points.size(); ++k) {
      const Payoff& v = opt.points[k];
      double gain = 0.0;
      for (int i = 0; i < n; ++i) gain = std::max(gain, threat[i] - v[i]);
      if (gain > tolerance) continue;
      WitnessRecord w;
      w.value = v;
      w.selection.assign(p.options.size(), 0);
      w.selection[x] = static_cast<int>(k);
      for (int i = 0; i < n; ++i) {
        auto dev = pos;
        for (int a = 0; a < static_cast<int>(p.feasible[i].size()); ++a) {
          if (a == pos[i]) continue;
          dev[i] = a;
          const int y = profile_at(p, dev);
          w.selection[y] = mins.index[y][i];
        }
      }
      w.alpha.resize(n);
      for (int i = 0; i < n; ++i) {
        w.alpha[i].assign(p.feasible[i].size(), 0.0);
        w.alpha[i][pos[i]] = 1.0;
      }
      w.links = selection_links(p, w.selection);
      w.regret = gain;
      out.push_back(std::move(w));
    }
  }
  return out;
}

void solve_selection(const ExpectedContinuationSet& p,
                     const std::vector<int>& selection,
                     const SolverOptions& options, std::uint64_t seed,
                     SharingRuleResult& result) {
  const NormalFormGame game = selection_game(p, selection);
  ++result.selections_solved;
  std::vector<NashResult> eqs;
  try {
    IterativeOptions it;
    it.epsilon = options.nash_epsilon;
    it.seed = seed;
    if (game.players() <= 2) {
      eqs = solve_nash_exact(game, options.exact_tolerance);
      if (eqs.empty()) eqs.push_back(solve_nash_iterative(game, it));
    } else {
      eqs = solve_nash_all(game, it);
    }
  } catch (const BudgetExceeded& e) {
    ++result.nash_failures;
    result.best_failed_regret = std::max(result.best_failed_regret, e.best_regret());
    return;
  }
  const std::vector<int> links = selection_links(p, selection);
  for (auto& eq : eqs) {
    WitnessRecord w;
    w.value = std::move(eq.value);
    w.alpha = std::move(eq.profile);
    w.selection = selection;
    w.links = links;
    w.regret = eq.regret;
    result.witnesses.push_back(std::move(w));
  }
}

}  // namespace

const PayoffSet& EquilibriumCorrespondence::values(int t, int node) const {
  if (t == graph->horizon() + 1) return terminal[node];
  return stages[t - 1][node].values;
}

const PayoffSet& EquilibriumCorrespondence::root_set(int initial) const {
  return stages[0][graph->roots()[initial]].values;
}

ExpectedContinuationSet build_expected_continuation(
    const StageGraph& graph, int t, int node,
    const std::vector<const PayoffSet*>& next, const SolverOptions& options) {
  const GraphNode& g = graph.node(t, node);
  const int states = graph.states(t);
  const int n = graph.players();
  ExpectationOptions eo;
  eo.prune_eps = options.resolved_prune_eps(graph.spec().gamma);
  eo.size_cap = options.minkowski_cap;

  ExpectedContinuationSet out;
  out.feasible = g.feasible;
  out.profiles = g.profiles;
  for (std::size_t x = 0; x < g.profiles.size(); ++x) {
    std::vector<const PayoffSet*> sets;
    std::vector<double> weights;
    std::vector<Payoff> offsets;
    for (int s = 0; s < states; ++s) {
      const std::size_t e = x * states + s;
      sets.push_back(next[g.child[e]]);
      weights.push_back(g.prob[e]);
      if (!g.reward.empty()) {
        offsets.emplace_back(g.reward.begin() + e * n, g.reward.begin() + (e + 1) * n);
      }
    }
    SelectionSum sum = weighted_selection_sum(sets, weights, offsets, eo);
    out.hausdorff_error = std::max(out.hausdorff_error, sum.hausdorff_error);

    // Hull vertices first: exact in the plane, sampled support points above.
    std::vector<std::size_t> order = n <= 2 ? extreme_point_indices(sum.points)
                                            : support_point_indices(sum.points);
    std::vector<char> taken(sum.points.size(), 0);
    for (auto k : order) taken[k] = 1;
    const std::size_t extreme = order.empty() ? sum.points.size() : order.size();
    for (std::size_t k = 0; k < sum.points.size(); ++k) {
      if (!taken[k]) order.push_back(k);
    }
    ContinuationOptions opt;
    opt.extreme = extreme;
    for (auto k : order) {
      opt.points.push_back(std::move(sum.points[k]));
      opt.links.push_back(std::move(sum.choices[k]));
    }
    out.options.push_back(std::move(opt));
  }
  return out;
}

SharingRuleResult sharing_rule_search(const ExpectedContinuationSet& p,
                                      const SolverOptions& options,
                                      std::uint64_t seed) {
  SharingRuleResult result;
  const int n = static_cast<int>(p.feasible.size());
  const MinTable mins = min_table(p);
  if (options.punishment) {
    result.witnesses = punishment_witnesses(p, mins, 1e-12);
  }

  // Mixed-radix selections, profile 0 most significant: first over hull
  // vertices, then over every realizable point.
  std::vector<std::size_t> vertex_radix, full_radix;
  for (const auto& opt : p.options) {
    vertex_radix.push_back(std::max<std::size_t>(1, opt.extreme));
    full_radix.push_back(opt.points.size());
  }
  const std::uint64_t vertex_total = saturating_product(vertex_radix);
  const std::uint64_t full_total = saturating_product(full_radix);
  std::uint64_t solved = 0;
  std::uint64_t stream = 0;
  auto run = [&](const std::vector<std::size_t>& radix, bool skip_vertices) {
    std::vector<int> sel(radix.size(), 0);
    while (solved < options.selection_cap) {
      bool inside = skip_vertices;
      if (skip_vertices) {
        for (std::size_t x = 0; x < sel.size(); ++x) {
          if (static_cast<std::size_t>(sel[x]) >= vertex_radix[x]) {
            inside = false;
            break;
          }
        }
      }
      if (!inside) {
        solve_selection(p, sel, options, seed + stream++, result);
        ++solved;
      }
      int x = static_cast<int>(sel.size()) - 1;
      while (x >= 0 && static_cast<std::size_t>(++sel[x]) == radix[x]) {
        sel[x] = 0;
        --x;
      }
      if (x < 0) return true;
    }
    return false;
  };
  bool complete = run(vertex_radix, false);
  if (complete && full_total > vertex_total) complete = run(full_radix, true);
  result.unexplored = complete ? 0 : full_total - std::min(full_total, solved);
  result.cap_reached = !complete;

  if (options.punishment) {
    for (int i = 0; i < n; ++i) {
      std::vector<int> sel;
      for (const auto& idx : mins.index) sel.push_back(idx[i]);
      solve_selection(p, sel, options, seed + stream++, result);
    }
  }
  return result;
}

SharingRuleResult pure_stage_rule(const ExpectedContinuationSet& p,
                                  int /*active_player*/) {
  SharingRuleResult result;
  // With one mover the punishment rule reduces to: keep v in P(a) whenever
  // v_j >= min_j P(b) for every other action b.
  result.witnesses = punishment_witnesses(p, min_table(p), 0.0);
  return result;
}

namespace {

NodeSolution finalize_node(SharingRuleResult&& r, const ExpectedContinuationSet& p,
                           double eps, const SolverOptions& options,
                           const StageGraph& graph, int t, int node) {
  NodeSolution sol;
  sol.unexplored = r.unexplored;
  sol.nash_failures = r.nash_failures;
  sol.hausdorff_error = p.hausdorff_error;
  std::vector<Payoff> values;
  for (const auto& w : r.witnesses) values.push_back(w.value);
  auto kept = prune_indices(values, eps);
  if (eps > 0.0 && kept.size() < values.size()) sol.hausdorff_error += eps;
  if (kept.size() > options.value_cap) {
    double scale = 1e-300;
    for (const auto& v : values) {
      for (double x : v) scale = std::max(scale, std::abs(x));
    }
    double coarse = std::max(eps, 1e-9 * scale);
    while (kept.size() > options.value_cap) {
      coarse *= 2.0;
      kept = prune_indices(values, coarse);
    }
    sol.hausdorff_error += coarse;
  }
  for (auto k : kept) {
    sol.values.points.push_back(values[k]);
    sol.witnesses.push_back(std::move(r.witnesses[k]));
  }
  if (sol.witnesses.empty()) {
    throw IncompleteSolve("no certified equilibrium at stage " + std::to_string(t) +
                          " history " + graph.history(t, node).label() +
                          (r.nash_failures ? " (stage Nash budget exceeded)" : ""));
  }
  return sol;
}

template <class Solve>
std::vector<NodeSolution> solve_stage(const StageGraph& graph, int t,
                                      const Solve& solve) {
  const int count = static_cast<int>(graph.nodes(t).size());
  std::vector<NodeSolution> out(count);
  std::vector<std::exception_ptr> errors(count);
#pragma omp parallel for schedule(dynamic)
  for (int id = 0; id < count; ++id) {
    try {
      out[id] = solve(id);
    } catch (...) {
      errors[id] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace

std::vector<NodeSolution> phi_step(const StageGraph& graph, int t,
                                   const std::vector<const PayoffSet*>& next,
                                   const SolverOptions& options) {
  const double eps = options.resolved_prune_eps(graph.spec().gamma);
  return solve_stage(graph, t, [&](int id) {
    auto p = build_expected_continuation(graph, t, id, next, options);
    auto r = sharing_rule_search(p, options, mix_seed(options.seed, t, id));
    return finalize_node(std::move(r), p, eps, options, graph, t, id);
  });
}

std::vector<NodeSolution> pure_stage_solve(
    const StageGraph& graph, int t, const std::vector<const PayoffSet*>& next,
    const SolverOptions& options) {
  const StageClass& cls = graph.stage_class(t);
  if (cls.kind != StageKind::kPerfectInfo) {
    throw std::invalid_argument("stage " + std::to_string(t) +
                                " is not a perfect-information stage");
  }
  const double eps = options.resolved_prune_eps(graph.spec().gamma);
  return solve_stage(graph, t, [&](int id) {
    auto p = build_expected_continuation(graph, t, id, next, options);
    auto r = pure_stage_rule(p, cls.active_player);
    return finalize_node(std::move(r), p, eps, options, graph, t, id);
  });
}

namespace {

constexpr std::uint64_t kMaxCount = std::numeric_limits<std::uint64_t>::max();

void accumulate(SolveStats& stats, const std::vector<NodeSolution>& stage,
                std::uint64_t selections) {
  double worst = 0.0;
  for (const auto& s : stage) {
    ++stats.nodes;
    stats.witnesses += s.witnesses.size();
    stats.unexplored = s.unexplored > kMaxCount - stats.unexplored
                           ? kMaxCount
                           : stats.unexplored + s.unexplored;
    if (s.unexplored) ++stats.capped_nodes;
    stats.nash_failures += s.nash_failures;
    worst = std::max(worst, s.hausdorff_error);
  }
  stats.selections += selections;
  stats.hausdorff_error += worst;
}

std::vector<const PayoffSet*> next_sets(const EquilibriumCorrespondence& e, int t) {
  std::vector<const PayoffSet*> next;
  if (t == e.graph->horizon()) {
    for (const auto& s : e.terminal) next.push_back(&s);
  } else {
    for (const auto& s : e.stages[t]) next.push_back(&s.values);
  }
  return next;
}

// Myopic play: a stage Nash equilibrium of the expected stage rewards, with
// the continuation fixed to the single value of each child.
NodeSolution myopic_node(const StageGraph& graph, int t, int id,
                         const std::vector<const PayoffSet*>& next,
                         const SolverOptions& options) {
  const GraphNode& g = graph.node(t, id);
  const int states = graph.states(t);
  const int n = graph.players();
  std::vector<int> counts;
  for (const auto& f : g.feasible) counts.push_back(static_cast<int>(f.size()));
  NormalFormGame stage(counts);
  std::vector<Payoff> total(g.profiles.size(), Payoff(n, 0.0));
  for (std::size_t x = 0; x < g.profiles.size(); ++x) {
    Payoff r(n, 0.0);
    for (int s = 0; s < states; ++s) {
      const std::size_t e = x * states + s;
      const Payoff& q = next[g.child[e]]->points.front();
      for (int i = 0; i < n; ++i) {
        const double g_r = g.reward.empty() ? 0.0 : g.reward[e * n + i];
        r[i] += g.prob[e] * g_r;
        total[x][i] += g.prob[e] * (g_r + q[i]);
      }
    }
    stage.set_payoffs(static_cast<int>(x), r);
  }
  IterativeOptions it;
  it.epsilon = options.nash_epsilon;
  it.seed = mix_seed(options.seed, t, id);
  NashResult eq;
  if (stage.players() <= 2) {
    auto all = solve_nash_exact(stage, options.exact_tolerance);
    eq = all.empty() ? solve_nash_iterative(stage, it) : all.front();
  } else {
    eq = solve_nash_all(stage, it).front();
  }
  WitnessRecord w;
  w.alpha = eq.profile;
  w.value.assign(n, 0.0);
  for (std::size_t x = 0; x < g.profiles.size(); ++x) {
    double prob = 1.0;
    int rest = static_cast<int>(x);
    for (int i = n - 1; i >= 0; --i) {
      const int m = counts[i];
      prob *= w.alpha[i][rest % m];
      rest /= m;
    }
    for (int i = 0; i < n; ++i) w.value[i] += prob * total[x][i];
  }
  w.selection.assign(g.profiles.size(), 0);
  w.links.assign(g.profiles.size() * states, 0);
  NormalFormGame full(counts);
  for (std::size_t x = 0; x < g.profiles.size(); ++x) {
    full.set_payoffs(static_cast<int>(x), total[x]);
  }
  w.regret = max_regret(full, w.alpha);
  NodeSolution sol;
  sol.values.points.push_back(w.value);
  sol.witnesses.push_back(std::move(w));
  return sol;
}

}  // namespace

EquilibriumCorrespondence backward_solve(std::shared_ptr<const StageGraph> graph,
                                         const SolverOptions& options) {
  EquilibriumCorrespondence e;
  e.graph = graph;
  e.options = options;
  const int T = graph->horizon();
  for (std::size_t k = 0; k < graph->terminal_count(); ++k) {
    e.terminal.push_back(PayoffSet{{graph->terminal_value(static_cast<int>(k))}});
  }
  e.stages.resize(T);
  for (int t = T; t >= 1; --t) {
    const auto next = next_sets(e, t);
    if (graph->stage_class(t).kind == StageKind::kPerfectInfo) {
      e.stages[t - 1] = pure_stage_solve(*graph, t, next, options);
      accumulate(e.stats, e.stages[t - 1], 0);
    } else {
      e.stages[t - 1] = phi_step(*graph, t, next, options);
      accumulate(e.stats, e.stages[t - 1], 0);
    }
  }
  return e;
}

EquilibriumCorrespondence backward_solve(const ValidatedGame& game,
                                         const SolverOptions& options) {
  if (!game.horizon()) {
    throw std::invalid_argument("backward_solve needs a finite horizon");
  }
  auto graph = std::make_shared<const StageGraph>(game, *game.horizon(), options.graph);
  return backward_solve(graph, options);
}

StrategyProfile forward_extract(const EquilibriumCorrespondence& e,
                                const std::vector<int>& picks) {
  const StageGraph& graph = *e.graph;
  const int T = graph.horizon();
  StrategyProfile f;
  f.players = graph.players();
  f.horizon = T;
  std::map<std::pair<int, int>, int> point_of;             // (t, node)
  std::map<std::tuple<int, int, int>, int> state_of;       // (t, node, witness)
  std::vector<std::tuple<int, int, int>> queue;

  auto intern = [&](int t, int node, int witness) {
    const NodeSolution& sol = e.at(t, node);
    if (witness < 0 || witness >= static_cast<int>(sol.witnesses.size())) {
      throw std::logic_error("dangling continuation link at stage " +
                             std::to_string(t));
    }
    auto key = std::make_tuple(t, node, witness);
    auto it = state_of.find(key);
    if (it != state_of.end()) return it->second;
    auto pit = point_of.find({t, node});
    if (pit == point_of.end()) {
      const GraphNode& g = graph.node(t, node);
      DecisionPoint p;
      p.t = t;
      p.rep = graph.history(t, node);
      p.feasible = g.feasible;
      p.profiles = g.profiles;
      p.states = graph.states(t);
      pit = point_of.emplace(std::make_pair(t, node),
                             static_cast<int>(f.points.size())).first;
      f.points.push_back(std::move(p));
    }
    StrategyState s;
    s.point = pit->second;
    s.node = node;
    s.witness = witness;
    s.play = sol.witnesses[witness].alpha;
    s.promised = sol.witnesses[witness].value;
    const int id = static_cast<int>(f.states.size());
    f.states.push_back(std::move(s));
    state_of.emplace(key, id);
    queue.push_back(key);
    return id;
  };

  const auto& roots = graph.roots();
  for (std::size_t k = 0; k < roots.size(); ++k) {
    const int pick = k < picks.size() ? picks[k] : 0;
    if (pick < 0 || pick >= static_cast<int>(e.at(1, roots[k]).witnesses.size())) {
      throw std::out_of_range("pick " + std::to_string(pick) +
                              " outside the root payoff set");
    }
    f.roots.push_back(intern(1, roots[k], pick));
  }
  for (std::size_t q = 0; q < queue.size(); ++q) {
    const auto [t, node, witness] = queue[q];
    const GraphNode& g = graph.node(t, node);
    const WitnessRecord& w = e.at(t, node).witnesses[witness];
    std::vector<int> next(g.child.size(), -1);
    if (t < T) {
      for (std::size_t k = 0; k < g.child.size(); ++k) {
        next[k] = intern(t + 1, g.child[k], w.links[k]);
      }
    }
    f.states[state_of.at(queue[q])].next = std::move(next);
  }
  return f;
}

WitnessAudit audit_witnesses(const EquilibriumCorrespondence& e) {
  const StageGraph& graph = *e.graph;
  const int n = graph.players();
  WitnessAudit audit;
  for (int t = 1; t <= graph.horizon(); ++t) {
    const int states = graph.states(t);
    const bool myopic = e.myopic_from > 0 && t >= e.myopic_from;
    std::vector<const PayoffSet*> next;
    if (t == graph.horizon()) {
      for (const auto& q : e.terminal) next.push_back(&q);
    } else {
      for (const auto& q : e.stages[t]) next.push_back(&q.values);
    }
    for (std::size_t id = 0; id < graph.nodes(t).size(); ++id) {
      const GraphNode& g = graph.node(t, static_cast<int>(id));
      std::vector<int> counts;
      for (const auto& f : g.feasible) counts.push_back(static_cast<int>(f.size()));
      std::optional<ExpectedContinuationSet> p;
      if (!myopic) {
        p = build_expected_continuation(graph, t, static_cast<int>(id), next, e.options);
      }
      for (const auto& w : e.at(t, static_cast<int>(id)).witnesses) {
        ++audit.witnesses;
        NormalFormGame game(counts);
        for (std::size_t x = 0; x < g.profiles.size(); ++x) {
          Payoff linked(n, 0.0);
          for (int s = 0; s < states; ++s) {
            const std::size_t k = x * states + s;
            const Payoff& q = next[g.child[k]]->points.at(w.links[k]);
            for (int i = 0; i < n; ++i) {
              const double r = g.reward.empty() ? 0.0 : g.reward[k * n + i];
              linked[i] += g.prob[k] * (r + q[i]);
            }
          }
          if (p) {
            const Payoff& chosen = p->options[x].points.at(w.selection[x]);
            for (int i = 0; i < n; ++i) {
              audit.link_error =
                  std::max(audit.link_error, std::abs(chosen[i] - linked[i]));
            }
            game.set_payoffs(static_cast<int>(x), chosen);
          } else {
            game.set_payoffs(static_cast<int>(x), linked);
          }
        }
        const auto v = expected_value(game, w.alpha);
        for (int i = 0; i < n; ++i) {
          audit.aggregation_error =
              std::max(audit.aggregation_error, std::abs(v[i] - w.value[i]));
        }
        if (!myopic) audit.max_regret = std::max(audit.max_regret, max_regret(game, w.alpha));
      }
    }
  }
  return audit;
}

TruncationBound truncation_bound(const ValidatedGame& game, int T, BoundMode mode) {
  if (T < 1) throw std::invalid_argument("truncation horizon must be >= 1");
  const GameSpec& spec = game.spec();
  TruncationBound b;
  b.horizon = T;
  b.mode = mode;
  if (mode == BoundMode::kAnalytic) {
    if (!spec.decomposed()) {
      throw std::invalid_argument("analytic bound needs decomposed stage payoffs");
    }
    const auto& d = std::get<DecomposedPayoff>(spec.payoff);
    double worst = 0.0;
    for (double delta : d.discount) {
      double tail = 0.0;
      if (spec.infinite()) {
        if (delta >= 1.0) {
          throw std::invalid_argument("infinite game with discount >= 1");
        }
        tail = (T == 1 ? 1.0 : std::pow(delta, T - 1)) / (1.0 - delta);
      } else {
        for (int k = T; k <= *spec.horizon; ++k) {
          tail += k == 1 ? 1.0 : std::pow(delta, k - 1);
        }
      }
      worst = std::max(worst, tail);
    }
    b.modulus = d.stage_bound * worst;
    return b;
  }
  if (spec.infinite()) {
    throw std::invalid_argument("exhaustive bound needs a finite horizon");
  }
  const int H = *spec.horizon;
  if (T > H) return b;
  // Terminal histories grouped by their stage-(T-1) prefix.
  std::map<History, std::pair<Payoff, Payoff>> spread;
  // With stage rewards the shared prefix cancels, so only the tail from
  // stage T on is summed; this avoids cancellation error in the spread.
  auto tail = [&](const History& h) {
    if (!spec.decomposed()) return spec.evaluate(h);
    Payoff u(spec.players, 0.0);
    for (int t = T; t <= H; ++t) {
      const Payoff g = spec.stage_reward(t, h.prefix(t - 1), h.actions[t - 1], h.states[t - 1]);
      for (int i = 0; i < spec.players; ++i) u[i] += g[i];
    }
    return u;
  };
  for (const History& h : enumerate_histories(game, H)) {
    const Payoff u = tail(h);
    auto [it, fresh] = spread.try_emplace(h.prefix(T - 1), u, u);
    if (!fresh) {
      for (std::size_t i = 0; i < u.size(); ++i) {
        it->second.first[i] = std::min(it->second.first[i], u[i]);
        it->second.second[i] = std::max(it->second.second[i], u[i]);
      }
    }
  }
  for (const auto& [prefix, range] : spread) {
    for (std::size_t i = 0; i < range.first.size(); ++i) {
      b.modulus = std::max(b.modulus, range.second[i] - range.first[i]);
    }
  }
  return b;
}

EquilibriumCorrespondence solve_truncation(const ValidatedGame& game, int T,
                                           int T_eval,
                                           const SolverOptions& options) {
  if (T_eval < T) throw std::invalid_argument("evaluation horizon below truncation");
  auto graph = std::make_shared<const StageGraph>(game, T_eval, options.graph);
  EquilibriumCorrespondence e;
  e.graph = graph;
  e.options = options;
  e.myopic_from = T < T_eval ? T + 1 : 0;
  for (std::size_t k = 0; k < graph->terminal_count(); ++k) {
    e.terminal.push_back(PayoffSet{{graph->terminal_value(static_cast<int>(k))}});
  }
  e.stages.resize(T_eval);
  for (int t = T_eval; t >= 1; --t) {
    const auto next = next_sets(e, t);
    if (t > T) {
      e.stages[t - 1] = solve_stage(*graph, t, [&](int id) {
        return myopic_node(*graph, t, id, next, options);
      });
    } else if (graph->stage_class(t).kind == StageKind::kPerfectInfo) {
      e.stages[t - 1] = pure_stage_solve(*graph, t, next, options);
    } else {
      e.stages[t - 1] = phi_step(*graph, t, next, options);
    }
    accumulate(e.stats, e.stages[t - 1], 0);
  }
  return e;
}

InfiniteSolution solve_infinite(const ValidatedGame& game, double epsilon,
                                const InfiniteOptions& options) {
  const GameSpec& spec = game.spec();
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!spec.decomposed()) {
    throw std::invalid_argument("solve_infinite needs decomposed stage payoffs");
  }
  auto tail = [&](int k) { return truncation_bound(game, k).modulus; };
  const int limit = spec.horizon ? *spec.horizon : std::numeric_limits<int>::max() - 1;

  int T = 1;
  if (options.truncation) {
    T = *options.truncation;
  } else {
    while (T < limit && tail(T + 1) > epsilon / 2.0) ++T;
  }
  int T_eval = T;
  const double target = options.tail_fraction * epsilon;
  while (T_eval < limit && T_eval < T + options.max_extra_stages &&
         tail(T_eval + 1) > target) {
    ++T_eval;
  }

  InfiniteSolution out;
  try {
    out.correspondence = solve_truncation(game, T, T_eval, options.solver);
  } catch (const GraphBudgetExceeded& e) {
    const int reach = std::max(1, e.completed_stages());
    const double achievable = 2.0 * tail(reach + 1);
    throw TruncationBudgetExceeded(
        std::string(e.what()) + "; smallest achievable epsilon " +
            std::to_string(achievable),
        achievable);
  }
  out.profile = forward_extract(out.correspondence);
  const DeviationReport report = one_step_deviation_check(spec, out.profile, epsilon);
  InfiniteCertificate& c = out.certificate;
  c.epsilon = epsilon;
  c.truncation = T;
  c.evaluated = T_eval;
  c.truncation_tail = T < limit ? tail(T + 1) : 0.0;
  c.evaluation_tail = T_eval < limit ? tail(T_eval + 1) : 0.0;
  c.max_regret = report.max_regret;
  c.bound = c.max_regret + 2.0 * c.evaluation_tail;
  c.verified = c.bound <= epsilon;
  return out;
}

}  // namespace spe
