#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "spe/engine.h"
#include "spe/io.h"
#include "spe/oligopoly.h"
#include "spe/verify.h"

namespace {

enum Exit { kOk = 0, kInvalidInput = 1, kBudget = 2, kVerification = 3 };

struct CommonFlags {
  std::optional<double> epsilon;
  std::optional<std::uint64_t> seed;
  std::optional<double> prune_eps;
  std::optional<std::size_t> selection_cap;
  std::string out;
  std::string format = "both";
};

void add_solver_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--epsilon", f.epsilon, "equilibrium tolerance (default 1e-3)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "seed for every random choice (default 0)");
  cmd->add_option("--prune-eps", f.prune_eps,
                  "payoff-set pruning radius (default 1e-6 * gamma)");
  cmd->add_option("--selection-cap", f.selection_cap,
                  "selections examined per history (default 256)");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw spe::GameFileError(path, "cannot open file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

spe::SolverOptions merge(spe::SolverOptions o, const CommonFlags& f) {
  if (f.seed) o.seed = *f.seed;
  if (f.prune_eps) o.prune_eps = *f.prune_eps;
  if (f.selection_cap) o.selection_cap = *f.selection_cap;
  return o;
}

void print_payoff(std::ostream& out, const spe::Payoff& p) {
  out << '(';
  for (std::size_t i = 0; i < p.size(); ++i) out << (i ? ", " : "") << p[i];
  out << ')';
}

void print_stats(std::ostream& out, const spe::SolveStats& s) {
  out << "nodes " << s.nodes << ", witnesses " << s.witnesses << ", capped nodes "
      << s.capped_nodes << ", unexplored selections " << s.unexplored
      << ", nash failures " << s.nash_failures << ", pruning error "
      << s.hausdorff_error << "\n";
}

int verdict(const spe::SolveStats& stats, const spe::DeviationReport& report,
            const std::optional<spe::InfiniteCertificate>& certificate) {
  if (stats.nash_failures > 0) return kBudget;
  if (report.violations > 0) return kVerification;
  if (certificate && !certificate->verified) return kVerification;
  return kOk;
}

spe::ResultBundle load_bundle(const std::string& path) {
  std::filesystem::path p(path);
  if (std::filesystem::is_directory(p)) p /= "bundle.json";
  return spe::bundle_from_json(read_text(p.string()));
}

int run_solve(const std::string& path, const CommonFlags& flags) {
  spe::GameFile file = spe::read_game_file(path);
  const double epsilon = flags.epsilon.value_or(file.solver.epsilon.value_or(1e-3));
  spe::SolverOptions options = merge(spe::solver_options(file.solver), flags);
  spe::ResultBundle b = spe::solve_game_file(file, epsilon, options);

  std::cout << std::setprecision(10);
  for (std::size_t k = 0; k < b.root_sets.size(); ++k) {
    std::cout << "root " << k << ": " << b.root_sets[k].size() << " payoff vectors\n";
    for (const auto& p : b.root_sets[k].points) {
      std::cout << "  ";
      print_payoff(std::cout, p);
      std::cout << "\n";
    }
  }
  print_stats(std::cout, b.counters.stats);
  std::cout << "one-step deviation check: max regret " << b.report.max_regret
            << ", violations " << b.report.violations << " at epsilon " << epsilon << "\n";
  if (b.certificate) {
    const auto& c = *b.certificate;
    std::cout << "certificate: T " << c.truncation << ", evaluated to " << c.evaluated
              << ", tail " << c.evaluation_tail << ", bound " << c.bound << " -> "
              << (c.verified ? "verified" : "NOT verified") << "\n";
  }
  if (!flags.out.empty()) {
    spe::EmitFormat format = flags.format == "table"    ? spe::EmitFormat::kTable
                             : flags.format == "bundle" ? spe::EmitFormat::kBundle
                                                        : spe::EmitFormat::kBoth;
    for (const auto& p : spe::emit_results(b, format, flags.out).paths) {
      std::cout << "wrote " << p.string() << "\n";
    }
  }
  return verdict(b.counters.stats, b.report, b.certificate);
}

int run_verify(const std::string& path) {
  spe::ResultBundle b = load_bundle(path);
  spe::ReplayOutcome r = spe::replay_bundle(b);
  std::cout << "input digest: " << (r.digest_ok ? "ok" : "MISMATCH") << "\n";
  std::cout << "deviation report replay: "
            << (r.report_identical ? "identical" : "DIFFERS") << "\n";
  std::cout << "max regret " << r.report.max_regret << ", violations "
            << r.report.violations << " at epsilon " << r.report.epsilon << "\n";
  if (b.certificate) {
    std::cout << "certificate bound " << b.certificate->bound << " -> "
              << (b.certificate->verified ? "verified" : "NOT verified") << "\n";
  }
  if (!r.digest_ok || !r.report_identical) return kVerification;
  return verdict(b.counters.stats, r.report, b.certificate);
}

int run_simulate(const std::string& path, std::size_t paths, const CommonFlags& flags) {
  spe::ResultBundle b = load_bundle(path);
  spe::GameFile file = spe::parse_game_file(b.input);
  spe::ValidatedGame game = spe::validate_spec(spe::to_game_spec(file));
  const spe::GameSpec& spec = game.spec();
  const std::uint64_t seed = flags.seed.value_or(b.seed);
  spe::MonteCarloResult mc = spe::monte_carlo_paths(spec, b.profile, paths, seed, false);
  const auto values = spe::state_values(spec, b.profile);
  spe::Payoff exact(spec.players, 0.0);
  for (std::size_t k = 0; k < b.profile.roots.size(); ++k) {
    for (int i = 0; i < spec.players; ++i) {
      exact[i] += spec.initial[k].weight * values[b.profile.roots[k]][i];
    }
  }
  std::ostringstream table;
  table << std::setprecision(12) << "player\tmean\tstd_error\texact\tz\n";
  bool within = true;
  for (int i = 0; i < spec.players; ++i) {
    const double gap = mc.mean[i] - exact[i];
    const double floor = 1e-9 * std::max(1.0, std::abs(exact[i]));
    const double z = std::abs(gap) <= floor ? 0.0 : gap / std::max(mc.std_error[i], 1e-300);
    within = within && std::abs(z) <= 4.0;
    table << i + 1 << '\t' << mc.mean[i] << '\t' << mc.std_error[i] << '\t' << exact[i]
          << '\t' << z << '\n';
  }
  std::cout << paths << " sampled paths, seed " << seed << "\n" << table.str();
  if (!flags.out.empty()) {
    std::filesystem::create_directories(flags.out);
    std::ofstream out(std::filesystem::path(flags.out) / "simulate.tsv");
    out << table.str();
    if (!out) throw std::runtime_error(flags.out + ": cannot write simulate.tsv");
  }
  return within ? kOk : kVerification;
}

int run_oligopoly(const std::string& path, const CommonFlags& flags) {
  spe::OligopolyParams params = spe::parse_oligopoly_params(read_text(path));
  const double epsilon = flags.epsilon.value_or(1e-3);
  spe::ScenarioReport r = spe::run_scenario(params, epsilon, merge({}, flags));
  std::ostringstream table;
  spe::write_scenario_table(table, r);
  std::cout << table.str();
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  print_stats(std::cout, r.stats);
  if (!flags.out.empty()) {
    std::filesystem::create_directories(flags.out);
    std::ofstream out(std::filesystem::path(flags.out) / "scenario.tsv");
    out << table.str();
    if (!out) throw std::runtime_error(flags.out + ": cannot write scenario.tsv");
  }
  if (r.stats.nash_failures > 0) return kBudget;
  if (r.certificate && !r.certificate->verified) return kVerification;
  return kOk;
}

int run_bound(const std::string& path, int horizon, const std::string& mode) {
  spe::GameFile file = spe::read_game_file(path);
  spe::ValidatedGame game = spe::validate_spec(spe::to_game_spec(file));
  std::cout << std::setprecision(12);
  if (mode != "exhaustive") {
    auto b = spe::truncation_bound(game, horizon, spe::BoundMode::kAnalytic);
    std::cout << "analytic w^" << horizon << " = " << b.modulus << "\n";
  }
  if (mode != "analytic") {
    if (game.horizon()) {
      auto b = spe::truncation_bound(game, horizon, spe::BoundMode::kExhaustive);
      std::cout << "exhaustive w^" << horizon << " = " << b.modulus << "\n";
    } else if (mode == "exhaustive") {
      throw std::invalid_argument("exhaustive bound needs a finite horizon");
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subgame-perfect equilibrium solver for discretized dynamic games"};
  app.require_subcommand(1);
  CommonFlags flags;
  std::string input;
  std::size_t paths = 0;
  int horizon = 1;
  std::string mode = "both";

  auto* solve = app.add_subcommand("solve", "solve a game file");
  solve->add_option("game-file", input)->required();
  add_solver_flags(solve, flags);
  solve->add_option("--out", flags.out, "output directory");
  solve->add_option("--format", flags.format, "table, bundle or both (default both)")
      ->check(CLI::IsMember({"table", "bundle", "both"}));

  auto* verify = app.add_subcommand("verify", "replay the checks stored in a bundle");
  verify->add_option("bundle", input, "bundle.json or a directory holding it")->required();

  auto* simulate = app.add_subcommand("simulate", "sample paths of a bundled profile");
  simulate->add_option("bundle", input)->required();
  simulate->add_option("--paths", paths, "number of sampled paths")
      ->required()
      ->check(CLI::PositiveNumber);
  simulate->add_option("--seed", flags.seed, "sampling seed (default: bundle seed)");
  simulate->add_option("--out", flags.out, "output directory");

  auto* oligopoly = app.add_subcommand("oligopoly", "run an oligopoly scenario");
  oligopoly->add_option("params-file", input)->required();
  add_solver_flags(oligopoly, flags);
  oligopoly->add_option("--out", flags.out, "output directory");

  auto* bound = app.add_subcommand("bound", "truncation bound w^T of a game file");
  bound->add_option("game-file", input)->required();
  bound->add_option("--horizon", horizon, "truncation stage T")
      ->required()
      ->check(CLI::PositiveNumber);
  bound->add_option("--mode", mode, "analytic, exhaustive or both (default both)")
      ->check(CLI::IsMember({"analytic", "exhaustive", "both"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalidInput;
  }

  try {
    if (*solve) return run_solve(input, flags);
    if (*verify) return run_verify(input);
    if (*simulate) return run_simulate(input, paths, flags);
    if (*oligopoly) return run_oligopoly(input, flags);
    if (*bound) return run_bound(input, horizon, mode);
  } catch (const spe::GameFileError& e) {
    for (const auto& d : e.diagnostics()) {
      std::cerr << "error: " << d.location << ": " << d.message << "\n";
    }
    return kInvalidInput;
  } catch (const spe::ValidationError& e) {
    for (const auto& issue : e.issues()) std::cerr << "invalid game: " << issue << "\n";
    return kInvalidInput;
  } catch (const spe::IncompleteSolve& e) {
    std::cerr << "budget: " << e.what() << "\n";
    return kBudget;
  } catch (const spe::GraphBudgetExceeded& e) {
    std::cerr << "budget: " << e.what() << "\n";
    return kBudget;
  } catch (const spe::TruncationBudgetExceeded& e) {
    std::cerr << "budget: " << e.what() << "\n";
    return kBudget;
  } catch (const spe::ScenarioBudgetExceeded& e) {
    std::cerr << "budget: " << e.what() << "\n";
    return kBudget;
  } catch (const spe::PathBudgetExceeded& e) {
    std::cerr << "budget: " << e.what() << "\n";
    return kBudget;
  } catch (const spe::BudgetExceeded& e) {
    std::cerr << "budget: " << e.what() << "\n";
    return kBudget;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalidInput;
  }
  return kInvalidInput;
}
