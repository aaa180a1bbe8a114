#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spe/engine.h"
#include "spe/nash.h"
#include "spe/oligopoly.h"
#include "spe/payoff_set.h"
#include "spe/verify.h"
#include "testkit.h"

namespace spe {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Solves retained for the path/value criterion.
struct CorpusSolve {
  std::string label;
  ValidatedGame game;
  EquilibriumCorrespondence e;
  StrategyProfile f;
};
std::vector<CorpusSolve> corpus;

std::string fmt(const char* format, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, a);
  return buf;
}

bool all_nodes_nonempty(const EquilibriumCorrespondence& e) {
  for (const auto& stage : e.stages) {
    for (const auto& node : stage) {
      if (node.values.empty()) return false;
    }
  }
  return true;
}

// 1. Finite-horizon existence on a random corpus.
Outcome finite_existence() {
  const std::vector<testkit::RandomGameShape> shapes = {
      {2, 1, 4, 6}, {2, 2, 3, 3}, {2, 2, 2, 4}, {2, 3, 2, 2}, {1, 3, 4, 6},
      {3, 1, 3, 4}, {3, 2, 2, 2}, {3, 1, 4, 2}, {2, 3, 2, 3}, {1, 2, 3, 6},
  };
  std::mt19937_64 rng(101);
  const auto t0 = Clock::now();
  Outcome out;
  int games = 0, failures = 0;
  double worst2 = 0.0, worst3 = 0.0;
  for (int k = 0; k < 60; ++k) {
    const auto& shape = shapes[k % shapes.size()];
    auto game = validate_spec(testkit::random_game(rng, shape));
    auto e = backward_solve(game);
    auto f = forward_extract(e);
    auto report = one_step_deviation_check(game.spec(), f, 1.0);
    const double limit = shape.players >= 3 ? 1e-3 : 1e-6;
    double& worst = shape.players >= 3 ? worst3 : worst2;
    worst = std::max(worst, report.max_regret);
    const bool ok = all_nodes_nonempty(e) && e.stats.nash_failures == 0 &&
                    report.max_regret <= limit;
    if (!ok) {
      ++failures;
      std::fprintf(stderr, "  criterion 1 game %d (%d players, %d stages): regret %.3g\n", k,
                   shape.players, shape.stages, report.max_regret);
    }
    corpus.push_back({"random " + std::to_string(k), std::move(game), std::move(e),
                      std::move(f)});
    ++games;
  }
  const double elapsed = seconds_since(t0);
  out.pass = failures == 0 && games >= 50 && elapsed < 300.0;
  out.detail = std::to_string(games) + " games, " + std::to_string(failures) +
               " failures, max regret " + fmt("%.2e", worst2) + " (<=2 players) " +
               fmt("%.2e", worst3) + " (3 players), " + fmt("%.1f s", elapsed);
  return out;
}

// Exhaustive backward induction on a perfect-information tree.
Payoff tree_oracle(const GameSpec& spec, const History& h) {
  if (h.stage() == *spec.horizon) return spec.evaluate(h);
  const int t = h.stage() + 1;
  const int mover = (t - 1) % spec.players;
  Payoff best;
  for (int a : spec.feasible_actions(t, mover, h)) {
    ActionProfile x(spec.players, 0);
    x[mover] = a;
    Payoff v = tree_oracle(spec, h.extend(x, 0));
    if (best.empty() || v[mover] > best[mover]) best = v;
  }
  return best;
}

// 2. Pure strategies on perfect-information trees.
Outcome perfect_information() {
  std::mt19937_64 rng(202);
  Outcome out;
  int trees = 0, failures = 0;
  for (int k = 0; k < 36; ++k) {
    const int players = 2 + k % 2;
    const int depth = 1 + k % 4;
    const int branching = 2 + (k / 4) % 2;
    auto game = validate_spec(testkit::random_pi_tree(rng, players, depth, branching));
    auto e = backward_solve(game);
    auto f = forward_extract(e);
    bool dirac = true;
    for (const auto& st : f.states) {
      for (const auto& mix : st.play) {
        if (std::count(mix.begin(), mix.end(), 1.0) != 1) dirac = false;
      }
    }
    const Payoff oracle = tree_oracle(game.spec(), History{});
    const bool exact = e.root_set().size() == 1 && e.root_set().points[0] == oracle;
    if (!dirac || !exact) {
      ++failures;
      std::fprintf(stderr, "  criterion 2 tree %d: dirac %d exact %d\n", k, dirac, exact);
    }
    corpus.push_back({"tree " + std::to_string(k), std::move(game), std::move(e),
                      std::move(f)});
    ++trees;
  }
  out.pass = failures == 0 && trees >= 30;
  out.detail = std::to_string(trees) + " trees, " + std::to_string(failures) + " failures";
  return out;
}

// Every SPE payoff of a two-stage desk game: all stage-2 Nash equilibria at
// every stage-1 history, then all stage-1 Nash equilibria of each induced game.
std::vector<Payoff> brute_force_spe(const ValidatedGame& game) {
  const GameSpec& spec = game.spec();
  const auto h1s = enumerate_histories(game, 1);
  std::vector<std::vector<Payoff>> stage2(h1s.size());
  for (std::size_t k = 0; k < h1s.size(); ++k) {
    NormalFormGame g({2, 2});
    for (int x = 0; x < g.profiles(); ++x) {
      const ActionProfile a = g.profile(x);
      const auto row = spec.density_row(2, h1s[k], a);
      const auto& w = spec.stage(2).grid.weights;
      Payoff v(2, 0.0);
      for (std::size_t s = 0; s < row.size(); ++s) {
        const Payoff u = spec.evaluate(h1s[k].extend(a, static_cast<int>(s)));
        for (int i = 0; i < 2; ++i) v[i] += w[s] * row[s] * u[i];
      }
      g.set_payoffs(x, v);
    }
    for (const auto& r : solve_nash_exact(g)) stage2[k].push_back(r.value);
  }
  std::map<History, std::size_t> index;
  for (std::size_t k = 0; k < h1s.size(); ++k) index[h1s[k]] = k;
  std::vector<Payoff> out;
  std::vector<std::size_t> pick(h1s.size(), 0);
  while (true) {
    NormalFormGame g({2, 2});
    const History root;
    for (int x = 0; x < g.profiles(); ++x) {
      const ActionProfile a = g.profile(x);
      const auto row = spec.density_row(1, root, a);
      const auto& w = spec.stage(1).grid.weights;
      Payoff v(2, 0.0);
      for (std::size_t s = 0; s < row.size(); ++s) {
        const std::size_t k = index.at(root.extend(a, static_cast<int>(s)));
        for (int i = 0; i < 2; ++i) v[i] += w[s] * row[s] * stage2[k][pick[k]][i];
      }
      g.set_payoffs(x, v);
    }
    for (const auto& r : solve_nash_exact(g)) out.push_back(r.value);
    std::size_t d = 0;
    while (d < pick.size() && ++pick[d] == stage2[d].size()) pick[d++] = 0;
    if (d == pick.size()) break;
  }
  return out;
}

// 3. Brute-force SPE payoffs lie in the computed root set.
Outcome brute_force_equivalence() {
  std::mt19937_64 rng(303);
  Outcome out;
  int games = 0, failures = 0;
  std::size_t checked = 0;
  double worst = 0.0;
  for (int k = 0; k < 24; ++k) {
    auto game = validate_spec(testkit::random_desk_game(rng));
    SolverOptions o;
    o.selection_cap = 10'000;
    auto e = backward_solve(game, o);
    const double tol = o.resolved_prune_eps(game.spec().gamma) + 1e-9;
    const auto spe = brute_force_spe(game);
    bool ok = e.stats.unexplored == 0;
    for (const auto& p : spe) {
      const double d = distance_to_set(p, e.root_set());
      worst = std::max(worst, d);
      if (d > tol) ok = false;
    }
    checked += spe.size();
    if (!ok) {
      ++failures;
      std::fprintf(stderr, "  criterion 3 game %d: worst distance %.3g, unexplored %llu\n", k,
                   worst, static_cast<unsigned long long>(e.stats.unexplored));
    }
    auto f = forward_extract(e);
    corpus.push_back({"desk " + std::to_string(k), std::move(game), std::move(e),
                      std::move(f)});
    ++games;
  }
  out.pass = failures == 0 && games >= 20;
  out.detail = std::to_string(games) + " games, " + std::to_string(checked) +
               " oracle payoffs, worst distance " + fmt("%.2e", worst);
  return out;
}

// Stage payoffs from a normalized 2x2 table, repeated with discount delta.
GameSpec repeated_matrix(const NormalFormGame& g, double delta, std::optional<int> T) {
  GameSpec spec = testkit::repeated_pd(delta, T);
  auto& dec = std::get<DecomposedPayoff>(spec.payoff);
  dec.stage = [g](int, const History&, const ActionProfile& x, int) {
    const int p = g.index(x);
    return Payoff{g.payoff(p, 0), g.payoff(p, 1)};
  };
  return spec;
}

// Two-period cycle: a battle of the sexes whose stakes depend on the last
// shock, then a prisoner's dilemma. Markov in (phase, last shock).
GameSpec cyclic_game(double delta) {
  GameSpec spec;
  spec.name = "cyclic";
  spec.players = 2;
  spec.initial = {InitialPoint{}};
  StageSpec st;
  st.action_counts = {2, 2};
  st.grid = StateGrid{{0.0, 1.0}, {0.5, 0.5}};
  spec.stages = {st, st};
  spec.density = [](int, const History&, const ActionProfile& x) {
    return x[0] == x[1] ? std::vector<double>{1.5, 0.5} : std::vector<double>{0.5, 1.5};
  };
  DecomposedPayoff dec;
  dec.stage = [](int t, const History& prev, const ActionProfile& x, int) {
    const int last = prev.stage() == 0 ? 0 : prev.states.back();
    if (t % 2 == 1) {
      if (x[0] != x[1]) return Payoff{0.0, 0.0};
      const double hi = last == 0 ? 1.0 : 0.8;
      return x[0] == 0 ? Payoff{hi, 0.5} : Payoff{0.5, hi};
    }
    static const double pd[2][2][2] = {{{0.6, 0.6}, {0.0, 1.0}}, {{1.0, 0.0}, {0.2, 0.2}}};
    return Payoff{pd[x[0]][x[1]][0], pd[x[0]][x[1]][1]};
  };
  dec.discount = {delta, delta};
  dec.stage_bound = 1.0;
  spec.payoff = dec;
  spec.gamma = 1.0 / (1.0 - delta);
  spec.markov_key = [](int, const History& h) {
    const int last = h.stage() == 0 ? 0 : h.states.back();
    return std::int64_t{2 * (h.stage() % 2) + last};
  };
  return spec;
}

NormalFormGame pennies01() {
  NormalFormGame g({2, 2});
  g.set_payoffs(g.index({0, 0}), {1, 0});
  g.set_payoffs(g.index({0, 1}), {0, 1});
  g.set_payoffs(g.index({1, 0}), {0, 1});
  g.set_payoffs(g.index({1, 1}), {1, 0});
  return g;
}

// 4. Truncation bound, infinite-horizon certificates and nesting.
Outcome truncation() {
  Outcome out;
  std::ostringstream detail;
  // Analytic against exhaustive on two-stage members of the family.
  int bound_checks = 0, bound_failures = 0;
  for (const auto& stage : {testkit::prisoners_dilemma(), pennies01()}) {
    auto game = validate_spec(repeated_matrix(stage, 0.9, 2));
    for (int T = 1; T <= 3; ++T) {
      const double a = truncation_bound(game, T).modulus;
      const double x = truncation_bound(game, T, BoundMode::kExhaustive).modulus;
      ++bound_checks;
      if (a != x) {
        ++bound_failures;
        std::fprintf(stderr, "  criterion 4 bound T=%d: analytic %.17g exhaustive %.17g\n", T,
                     a, x);
      }
    }
  }
  detail << bound_checks - bound_failures << "/" << bound_checks << " bounds exact";

  // Certificates at epsilon = .05.
  int certs = 0, cert_failures = 0;
  double worst_regret = 0.0;
  std::vector<std::pair<std::string, GameSpec>> infinite = {
      {"repeated pd", repeated_matrix(testkit::prisoners_dilemma(), 0.9, std::nullopt)},
      {"repeated pennies", repeated_matrix(pennies01(), 0.9, std::nullopt)},
      {"cyclic", cyclic_game(0.9)},
  };
  for (auto& [name, spec] : infinite) {
    auto game = validate_spec(spec);
    auto sol = solve_infinite(game, 0.05);
    auto report = one_step_deviation_check(game.spec(), sol.profile, 0.05);
    worst_regret = std::max(worst_regret, report.max_regret);
    ++certs;
    if (!sol.certificate.verified || report.max_regret > 0.05) {
      ++cert_failures;
      std::fprintf(stderr, "  criterion 4 %s: verified %d regret %.3g\n", name.c_str(),
                   sol.certificate.verified, report.max_regret);
    }
  }
  detail << ", " << certs - cert_failures << "/" << certs << " certificates (max regret "
         << fmt("%.2e", worst_regret) << ")";

  // Nesting of truncated root sets.
  int pairs = 0, nest_failures = 0;
  double worst_slack = -1e300;
  for (auto& [name, spec] : infinite) {
    auto game = validate_spec(spec);
    SolverOptions o;
    const double eps_p = o.resolved_prune_eps(game.spec().gamma);
    std::vector<PayoffSet> roots;
    for (int tau = 1; tau <= 4; ++tau) {
      roots.push_back(solve_truncation(game, tau, tau, o).root_set());
    }
    for (int t1 = 1; t1 <= 4; ++t1) {
      for (int t2 = 1; t2 < t1; ++t2) {
        const double ex = excess(roots[t1 - 1], roots[t2 - 1]);
        const double allowed = truncation_bound(game, t2 + 1).modulus + eps_p;
        worst_slack = std::max(worst_slack, ex - allowed);
        ++pairs;
        if (ex > allowed) {
          ++nest_failures;
          std::fprintf(stderr, "  criterion 4 nesting %s %d>%d: excess %.3g allowed %.3g\n",
                       name.c_str(), t1, t2, ex, allowed);
        }
      }
    }
  }
  detail << ", " << pairs - nest_failures << "/" << pairs << " nesting pairs";
  out.pass = bound_failures == 0 && cert_failures == 0 && nest_failures == 0;
  out.detail = detail.str();
  return out;
}

// 5. Lyapunov convexification under grid refinement.
Outcome lyapunov() {
  Outcome out;
  std::ostringstream detail;
  double previous = 1e300;
  for (int m = 2; m <= 256; m *= 2) {
    std::vector<PayoffSet> sets(m, PayoffSet{{{0.0}, {1.0}}});
    std::vector<double> w(m, 1.0 / m);
    ExpectationOptions o;
    o.size_cap = 1u << 20;
    auto e = selection_expectation(sets, w, o);
    // Hausdorff distance from the hull [min, max] to the point set.
    std::vector<double> xs;
    for (const auto& p : e.points) xs.push_back(p[0]);
    std::sort(xs.begin(), xs.end());
    double gap = 0.0;
    for (std::size_t k = 1; k < xs.size(); ++k) gap = std::max(gap, 0.5 * (xs[k] - xs[k - 1]));
    const bool ok = gap <= 1.0 / m + 1e-12 && gap <= previous + 1e-12;
    if (!ok) out.pass = false;
    detail << (m > 2 ? " " : "") << "m=" << m << ":" << fmt("%.3g", gap);
    previous = gap;
  }
  out.detail = detail.str();
  return out;
}

// 6. Oligopoly closed forms, DP oracle and scenario corpus.
Outcome oligopoly() {
  const auto t0 = Clock::now();
  Outcome out;
  std::ostringstream detail;
  OligopolyParams mono;
  mono.firms = 1;
  mono.outputs.clear();
  for (int k = 0; k <= 80; ++k) mono.outputs.push_back(0.1 * k);
  const double q_mono = run_scenario(mono, 0.05).periods[0].expected_output[0];
  const double mono_ref = closed_form_checks(mono).monopoly_output;
  OligopolyParams duo;
  duo.firms = 2;
  duo.outputs.clear();
  for (int k = 0; k <= 16; ++k) duo.outputs.push_back(0.5 * k);
  const auto duo_report = run_scenario(duo, 0.05);
  const double duo_ref = closed_form_checks(duo).cournot_output;
  double duo_gap = 0.0;
  for (double q : duo_report.periods[0].expected_output) {
    duo_gap = std::max(duo_gap, std::abs(q - duo_ref));
  }
  const bool closed_ok = std::abs(q_mono - mono_ref) <= 0.1 + 1e-12 && duo_gap <= 0.5 + 1e-12;
  detail << "monopoly " << fmt("%.3g", q_mono) << " vs " << mono_ref << ", cournot gap "
         << fmt("%.3g", duo_gap);

  // Two-period sticky monopoly against direct dynamic programming.
  OligopolyParams sticky;
  sticky.firms = 1;
  sticky.theta = 1.0;
  sticky.horizon = 2;
  sticky.shock_low = -1.0;
  sticky.shock_high = 1.0;
  sticky.shock_points = 5;
  sticky.law = ShockLaw::kTriangular;
  const auto shocks = sticky.shock_grid();
  const auto probs = sticky.shock_probabilities();
  auto profit = [&](double q, double past, double s) {
    return (std::max(0.0, sticky.a - sticky.b * (sticky.theta * past + q) + s) -
            sticky.cost(0)) * q;
  };
  double dp = 0.0;
  for (std::size_t k = 0; k < shocks.size(); ++k) {
    double best = -1e300;
    for (double q1 : sticky.outputs) {
      double later = 0.0;
      for (std::size_t j = 0; j < shocks.size(); ++j) {
        double v2 = -1e300;
        for (double q2 : sticky.outputs) v2 = std::max(v2, profit(q2, q1, shocks[j]));
        later += probs[j] * v2;
      }
      best = std::max(best, profit(q1, 0.0, shocks[k]) + sticky.beta(0) * later);
    }
    dp += probs[k] * best;
  }
  const double engine = run_scenario(sticky, 0.05).firm_values[0];
  const bool dp_ok = std::abs(engine - dp) <= 1e-9;
  detail << ", sticky DP gap " << fmt("%.2e", std::abs(engine - dp));

  // Scenario corpus: every root set nonempty.
  int scenarios = 0, empty = 0;
  auto run = [&](int n, int T, double theta, int shocks_n) {
    OligopolyParams p;
    p.firms = n;
    p.horizon = T;
    p.theta = theta;
    if (shocks_n > 1) {
      p.shock_low = -1.0;
      p.shock_high = 1.0;
      p.shock_points = shocks_n;
      p.law = ShockLaw::kTriangular;
    }
    auto r = run_scenario(p, 0.05);
    ++scenarios;
    for (const auto& s : r.root_sets) {
      if (s.empty()) {
        ++empty;
        break;
      }
    }
  };
  for (int T = 1; T <= 3; ++T) {
    for (double theta : {0.0, 1.0}) run(1, T, theta, 5);
  }
  for (int T = 1; T <= 2; ++T) {
    for (double theta : {0.0, 0.5, 1.0}) run(2, T, theta, 5);
  }
  run(3, 1, 0.0, 1);
  run(3, 1, 0.0, 5);
  for (double theta : {0.0, 0.5}) {
    OligopolyParams p;
    p.horizon = 2;
    p.theta = theta;
    p.shock_low = -1.0;
    p.shock_high = 1.0;
    p.shock_points = 3;
    auto game = validate_spec(build_oligopoly(p).spec);
    auto e = backward_solve(game);
    auto f = forward_extract(e);
    corpus.push_back({"duopoly theta " + fmt("%.1f", theta), std::move(game), std::move(e),
                      std::move(f)});
  }
  const double elapsed = seconds_since(t0);
  detail << ", " << scenarios - empty << "/" << scenarios << " scenarios nonempty, "
         << fmt("%.1f s", elapsed);
  out.pass = closed_ok && dp_ok && empty == 0 && elapsed < 120.0;
  out.detail = detail.str();
  return out;
}

// Smallest k with P(Binomial(n, p) <= k) >= q.
int binomial_quantile(int n, double p, double q) {
  double cdf = 0.0;
  for (int k = 0; k <= n; ++k) {
    cdf += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                    k * std::log(p) + (n - k) * std::log1p(-p));
    if (cdf >= q) return k;
  }
  return n;
}

// 7. Path values equal root values; Monte Carlo means within 3 sigma.
Outcome path_value() {
  Outcome out;
  double worst_gap = 0.0;
  double worst_z = 0.0;
  int outside = 0, coordinates = 0, mismatches = 0;
  std::uint64_t seed = 7;
  for (const auto& c : corpus) {
    const GameSpec& spec = c.game.spec();
    const Payoff exact = expected_payoff(spec, induce_path(spec, c.f, History{}));
    const Payoff& root = c.f.states[c.f.roots[0]].promised;
    const Payoff& picked = c.e.root_set().points[0];
    for (std::size_t i = 0; i < exact.size(); ++i) {
      const double gap = std::max(std::abs(exact[i] - root[i]), std::abs(exact[i] - picked[i]));
      worst_gap = std::max(worst_gap, gap);
      if (gap > 1e-9) {
        ++mismatches;
        std::fprintf(stderr, "  criterion 7 %s player %zu: path %.12g root %.12g\n",
                     c.label.c_str(), i, exact[i], picked[i]);
      }
    }
    auto mc = monte_carlo_paths(spec, c.f, 100000, seed++, false, 0);
    for (std::size_t i = 0; i < exact.size(); ++i) {
      const double diff = std::abs(mc.mean[i] - exact[i]);
      const double floor = 1e-9 * std::max(1.0, std::abs(exact[i]));
      const double z = diff <= floor ? 0.0 : diff / mc.std_error[i];
      worst_z = std::max(worst_z, z);
      ++coordinates;
      if (z > 3.0) {
        ++outside;
        std::fprintf(stderr, "  criterion 7 %s player %zu: z = %.2f\n", c.label.c_str(), i, z);
      }
    }
  }
  // Even an exact sampler leaves a 3-sigma band with probability .0027 per
  // coordinate, so the excursion count must be binomially plausible.
  const int allowed = binomial_quantile(coordinates, 0.0027, 0.999);
  out.pass = mismatches == 0 && outside <= allowed && worst_z <= 5.0 && !corpus.empty();
  out.detail = std::to_string(corpus.size()) + " solves, worst path gap " +
               fmt("%.2e", worst_gap) + ", " + std::to_string(coordinates - outside) + "/" +
               std::to_string(coordinates) + " MC means within 3 sigma (max |z| " +
               fmt("%.2f", worst_z) + ", " + std::to_string(allowed) + " excursions allowed)";
  return out;
}

// 8. Upper-hemicontinuity trend under payoff perturbation.
Outcome hemicontinuity() {
  Outcome out;
  std::ostringstream detail;
  std::mt19937_64 rng(808);
  const std::vector<double> etas = {1e-1, 1e-2, 1e-3};
  int games = 0, monotone = 0;
  std::vector<double> mean_excess(etas.size(), 0.0);
  for (int k = 0; k < 8; ++k) {
    const GameSpec base = testkit::random_desk_game(rng);
    const std::uint64_t salt = rng();
    const auto base_payoff = std::get<TerminalPayoffFn>(base.payoff);
    auto solve = [&](double eta) {
      GameSpec spec = base;
      spec.gamma = base.gamma + eta;
      spec.payoff = TerminalPayoffFn([base_payoff, eta, salt](const History& h) {
        Payoff u = base_payoff(h);
        std::seed_seq seq{salt, static_cast<std::uint64_t>(std::hash<std::string>{}(h.label()))};
        std::mt19937_64 g(seq);
        std::uniform_real_distribution<double> z(0.0, 1.0);
        for (double& v : u) v += eta * z(g);
        return u;
      });
      SolverOptions o;
      o.selection_cap = 10'000;
      return backward_solve(validate_spec(spec), o).root_set();
    };
    const PayoffSet reference = solve(0.0);
    std::vector<double> ex;
    for (double eta : etas) ex.push_back(excess(solve(eta), reference));
    bool ok = true;
    for (std::size_t j = 1; j < ex.size(); ++j) {
      if (ex[j] > ex[j - 1] + 1e-12) ok = false;
    }
    for (std::size_t j = 0; j < ex.size(); ++j) mean_excess[j] += ex[j];
    ++games;
    if (ok) {
      ++monotone;
    } else {
      std::fprintf(stderr, "  criterion 8 game %d: excess %.3g %.3g %.3g\n", k, ex[0], ex[1],
                   ex[2]);
    }
  }
  detail << monotone << "/" << games << " games nonincreasing; mean excess";
  for (std::size_t j = 0; j < etas.size(); ++j) {
    detail << " eta=" << fmt("%.0e", etas[j]) << ":" << fmt("%.3g", mean_excess[j] / games);
  }
  out.pass = monotone == games;
  out.detail = detail.str();
  return out;
}

}  // namespace
}  // namespace spe

int main() {
  using namespace spe;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"finite-horizon existence", finite_existence},
      {"pure perfect-information equilibria", perfect_information},
      {"brute-force SPE oracle", brute_force_equivalence},
      {"truncation bound and certificates", truncation},
      {"Lyapunov convexification", lyapunov},
      {"oligopoly cross-checks", oligopoly},
      {"path/value consistency", path_value},
      {"upper-hemicontinuity trend", hemicontinuity},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s criterion %zu (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", k + 1,
                criteria[k].first.c_str(), o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
