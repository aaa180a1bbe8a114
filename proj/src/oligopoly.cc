#include "spe/oligopoly.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "spe/verify.h"

namespace spe {

std::vector<double> OligopolyParams::shock_grid() const {
  if (shock_points <= 1) return {0.5 * (shock_low + shock_high)};
  std::vector<double> grid(shock_points);
  for (int k = 0; k < shock_points; ++k) {
    grid[k] = shock_low + (shock_high - shock_low) * k / (shock_points - 1);
  }
  return grid;
}

std::vector<double> OligopolyParams::shock_probabilities() const {
  const int m = std::max(1, shock_points);
  std::vector<double> p(m, 1.0);
  if (law == ShockLaw::kTriangular) {
    const double mid = 0.5 * (m - 1);
    for (int k = 0; k < m; ++k) p[k] = mid + 1.0 - std::abs(k - mid);
  }
  double total = 0.0;
  for (double v : p) total += v;
  for (double& v : p) v /= total;
  return p;
}

double OligopolyGame::shock(int t, const History& prev) const {
  const auto grid = params.shock_grid();
  if (grid.size() == 1) return grid[0];
  const int s = t == 1 ? spec.initial.at(prev.initial).state : prev.states.back();
  return grid.at(s);
}

double OligopolyGame::past_average(const History& prev) const {
  if (prev.stage() == 0) return 0.0;
  double total = 0.0;
  for (const auto& x : prev.actions) {
    for (int a : x) total += params.outputs[a];
  }
  return total / prev.stage();
}

double OligopolyGame::price(int t, const History& prev, const ActionProfile& x) const {
  double q = 0.0;
  for (int a : x) q += params.outputs[a];
  const double sticky = params.theta == 0.0 ? 0.0 : params.theta * past_average(prev);
  return std::max(0.0, params.a - params.b * (sticky + q) + shock(t, prev));
}

OligopolyGame build_oligopoly(const OligopolyParams& params) {
  const int n = params.firms;
  if (n < 1) throw std::invalid_argument("firm count must be >= 1");
  if (params.outputs.empty()) throw std::invalid_argument("output grid is empty");
  if (params.b <= 0.0) throw std::invalid_argument("demand slope b must be positive");
  if (params.theta < 0.0 || params.theta > 1.0) {
    throw std::invalid_argument("stickiness theta must lie in [0, 1]");
  }
  if (params.shock_high < params.shock_low) {
    throw std::invalid_argument("shock range is reversed");
  }
  if (params.horizon && *params.horizon < 1) {
    throw std::invalid_argument("horizon must be >= 1");
  }
  for (int i = 0; i < n; ++i) {
    if (!(params.beta(i) >= 0.0 && params.beta(i) < 1.0)) {
      throw std::invalid_argument("discount factors must lie in [0, 1)");
    }
    if (params.cost(i) < 0.0) throw std::invalid_argument("negative marginal cost");
  }
  for (double q : params.outputs) {
    if (q < 0.0) throw std::invalid_argument("negative output level");
  }

  OligopolyGame og;
  og.params = params;
  const auto shocks = params.shock_grid();
  const auto probs = params.shock_probabilities();
  const bool stochastic = shocks.size() > 1;
  const double q_max = *std::max_element(params.outputs.begin(), params.outputs.end());
  const double q_min = *std::min_element(params.outputs.begin(), params.outputs.end());
  const double s_max = *std::max_element(shocks.begin(), shocks.end());
  double c_max = 0.0;
  for (int i = 0; i < n; ++i) c_max = std::max(c_max, params.cost(i));
  og.offset = c_max * q_max;
  const double max_price = std::max(0.0, params.a - params.b * n * q_min + s_max);
  if (params.a - params.b * n * q_min + s_max <= 0.0) {
    og.warnings.push_back("degenerate demand: price is zero on the whole grid");
  }
  const double stage_bound = std::max(1e-12, max_price * q_max + og.offset);

  GameSpec& spec = og.spec;
  spec.name = "oligopoly";
  spec.players = n;
  spec.horizon = params.horizon;
  StageSpec st;
  st.action_counts.assign(n, static_cast<int>(params.outputs.size()));
  if (stochastic) {
    const int m = static_cast<int>(shocks.size());
    st.grid.points = shocks;
    st.grid.weights.assign(m, 1.0 / m);
    for (int k = 0; k < m; ++k) spec.initial.push_back(InitialPoint{0, k, probs[k]});
    std::vector<double> row(m);
    for (int k = 0; k < m; ++k) row[k] = m * probs[k];
    spec.density = [row](int, const History&, const ActionProfile&) { return row; };
  } else {
    // No shock: two identical states keep the stage simultaneous.
    st.grid = StateGrid{{shocks[0], shocks[0]}, {0.5, 0.5}};
    spec.initial = {InitialPoint{0, 0, 1.0}};
  }
  spec.stages.assign(params.horizon ? *params.horizon : 1, st);

  const auto shared = std::make_shared<OligopolyGame>(og);
  DecomposedPayoff dec;
  dec.stage = [shared](int t, const History& prev, const ActionProfile& x, int) {
    const double p = shared->price(t, prev, x);
    Payoff g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double q = shared->params.outputs[x[i]];
      g[i] = (p - shared->params.cost(static_cast<int>(i))) * q + shared->offset;
    }
    return g;
  };
  for (int i = 0; i < n; ++i) dec.discount.push_back(params.beta(i));
  dec.stage_bound = stage_bound;
  spec.payoff = dec;
  double beta_max = 0.0;
  for (double d : dec.discount) beta_max = std::max(beta_max, d);
  if (params.horizon) {
    double sum = 0.0;
    for (int t = 1; t <= *params.horizon; ++t) sum += std::pow(beta_max, t - 1);
    spec.gamma = stage_bound * sum;
  } else {
    spec.gamma = stage_bound / (1.0 - beta_max);
  }

  // Continuation key: the shock for the next period and, when demand is
  // sticky, the total past industry output.
  const bool sticky = params.theta != 0.0;
  const auto outputs = params.outputs;
  spec.markov_key = [stochastic, sticky, outputs](int, const History& h) {
    std::int64_t key = stochastic ? (h.stage() == 0 ? -1 : h.states.back()) : 0;
    if (sticky) {
      double total = 0.0;
      for (const auto& x : h.actions) {
        for (int a : x) total += outputs[a];
      }
      key += 1024 * static_cast<std::int64_t>(std::llround(total * 1e6));
    }
    return key;
  };
  if (stochastic) {
    // Period-1 shocks live in the initial point, so roots stay distinct.
    auto base = spec.markov_key;
    auto initial = spec.initial;
    spec.markov_key = [base, initial](int t, const History& h) {
      if (h.stage() == 0) return std::int64_t{initial.at(h.initial).state} - 1024;
      return base(t, h);
    };
  }
  return og;
}

ClosedForm closed_form_checks(const OligopolyParams& params) {
  for (int i = 1; i < static_cast<int>(params.costs.size()); ++i) {
    if (params.costs[i] != params.costs[0]) {
      throw std::invalid_argument("family mismatch: closed forms need symmetric costs");
    }
  }
  if (params.b <= 0.0) throw std::invalid_argument("family mismatch: b must be positive");
  const double c = params.cost(0);
  const double margin = std::max(0.0, params.a - c);
  ClosedForm out;
  out.monopoly_output = margin / (2.0 * params.b);
  out.cournot_output = margin / ((params.firms + 1) * params.b);
  out.cournot_price = params.a - params.b * params.firms * out.cournot_output;
  return out;
}

ScenarioReport run_scenario(const OligopolyParams& params, double epsilon,
                            const SolverOptions& options) {
  const OligopolyGame og = build_oligopoly(params);
  const ValidatedGame game = validate_spec(og.spec);
  ScenarioReport report;
  report.warnings = og.warnings;
  EquilibriumCorrespondence e;
  StrategyProfile f;
  const std::string hint = "; try a coarser output grid than " +
                           std::to_string(params.outputs.size()) +
                           " points or fewer shock points";
  try {
    if (params.horizon) {
      e = backward_solve(game, options);
      f = forward_extract(e);
    } else {
      InfiniteOptions io;
      io.solver = options;
      InfiniteSolution sol = solve_infinite(game, epsilon, io);
      report.certificate = sol.certificate;
      e = std::move(sol.correspondence);
      f = std::move(sol.profile);
    }
  } catch (const GraphBudgetExceeded& ex) {
    throw ScenarioBudgetExceeded(ex.what() + hint);
  } catch (const TruncationBudgetExceeded& ex) {
    throw ScenarioBudgetExceeded(ex.what() + hint);
  }
  report.stats = e.stats;

  const int n = params.firms;
  const int H = f.horizon;
  std::vector<double> shift(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int t = 1; t <= H; ++t) shift[i] += og.offset * std::pow(params.beta(i), t - 1);
  }
  double init_total = 0.0;
  for (const auto& ip : og.spec.initial) init_total += ip.weight;

  std::vector<double> mass(f.states.size(), 0.0);
  report.firm_values.assign(n, 0.0);
  for (std::size_t k = 0; k < f.roots.size(); ++k) {
    const double w = og.spec.initial[k].weight / init_total;
    mass[f.roots[k]] += w;
    PayoffSet root = e.root_set(static_cast<int>(k));
    for (auto& p : root.points) {
      for (int i = 0; i < n; ++i) p[i] -= shift[i];
    }
    report.root_sets.push_back(std::move(root));
    const Payoff& v = f.states[f.roots[k]].promised;
    for (int i = 0; i < n; ++i) report.firm_values[i] += w * (v[i] - shift[i]);
  }
  // States are created in breadth-first order, so stage t precedes t+1.
  std::vector<int> order(f.states.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return f.point(f.states[a]).t < f.point(f.states[b]).t;
  });
  report.periods.resize(H);
  for (int t = 1; t <= H; ++t) {
    report.periods[t - 1].t = t;
    report.periods[t - 1].expected_output.assign(n, 0.0);
  }
  for (int k : order) {
    if (mass[k] == 0.0) continue;
    const StrategyState& st = f.states[k];
    const DecisionPoint& p = f.point(st);
    ScenarioPeriod& period = report.periods[p.t - 1];
    for (std::size_t x = 0; x < p.profiles.size(); ++x) {
      const double px = f.probability(st, static_cast<int>(x)) * mass[k];
      if (px == 0.0) continue;
      for (int i = 0; i < n; ++i) {
        period.expected_output[i] += px * params.outputs[p.profiles[x][i]];
      }
      period.expected_price += px * og.price(p.t, p.rep, p.profiles[x]);
      if (p.t == H) continue;
      const auto row = og.spec.density_row(p.t, p.rep, p.profiles[x]);
      const auto& weights = og.spec.stage(p.t).grid.weights;
      for (int s = 0; s < p.states; ++s) {
        mass[st.next[x * p.states + s]] += px * row[s] * weights[s];
      }
    }
  }
  return report;
}

void write_scenario_table(std::ostream& out, const ScenarioReport& report) {
  const std::size_t n = report.firm_values.size();
  out << std::setprecision(12);
  out << "period\tprice";
  for (std::size_t i = 0; i < n; ++i) out << "\toutput_" << i + 1;
  out << '\n';
  for (const auto& p : report.periods) {
    out << p.t << '\t' << p.expected_price;
    for (double q : p.expected_output) out << '\t' << q;
    out << '\n';
  }
  out << '\n' << "firm\tvalue\n";
  for (std::size_t i = 0; i < n; ++i) out << i + 1 << '\t' << report.firm_values[i] << '\n';
  out << '\n' << "shock_index\tpoint";
  for (std::size_t i = 0; i < n; ++i) out << "\tvalue_" << i + 1;
  out << '\n';
  for (std::size_t k = 0; k < report.root_sets.size(); ++k) {
    for (std::size_t j = 0; j < report.root_sets[k].size(); ++j) {
      out << k << '\t' << j;
      for (double v : report.root_sets[k].points[j]) out << '\t' << v;
      out << '\n';
    }
  }
}

}  // namespace spe
