#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "spe/game.h"
#include "spe/strategy.h"

namespace spe {

struct PathAtom {
  History history;
  double mass = 0.0;
};

// Finitely supported measure over histories extending `root`.
struct PathMeasure {
  History root;
  std::vector<PathAtom> atoms;
  double total_mass() const;
};

class PathBudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exact forward product of stage mixtures and kernels from h, up to stage
// `until` (default: the profile horizon). Zero-mass branches are dropped.
PathMeasure induce_path(const GameSpec& spec, const StrategyProfile& f,
                        const History& h, std::optional<int> until = {},
                        std::size_t atom_budget = 5'000'000);

// Push-forward of a path measure onto its stage-t prefixes.
PathMeasure path_marginal(const PathMeasure& path, int t);

Payoff expected_payoff(const GameSpec& spec, const PathMeasure& path);

struct DeviationEntry {
  int stage = 1;
  History history;  // h_{t-1}
  int player = 1;   // PlayerId index
  double value = 0.0;
  double best_deviation = 0.0;
  int best_action = -1;
  double regret = 0.0;
};

struct DeviationReport {
  std::vector<DeviationEntry> entries;  // sorted by stage, history, player
  double epsilon = 0.0;
  double max_regret = 0.0;
  std::size_t violations = 0;  // entries with regret > epsilon
};

// Pure one-shot deviations at every state of the profile, against the
// profile's own continuation values.
DeviationReport one_step_deviation_check(const GameSpec& spec,
                                         const StrategyProfile& f, double epsilon);

// Values of every strategy state computed from the spec alone.
std::vector<Payoff> state_values(const GameSpec& spec, const StrategyProfile& f);

struct MonteCarloResult {
  std::vector<History> samples;
  Payoff mean;
  Payoff std_error;  // sample standard deviation / sqrt(count)
  std::size_t count = 0;
};

// Samples start from `initial` when given, else from the initial-point weights.
MonteCarloResult monte_carlo_paths(const GameSpec& spec, const StrategyProfile& f,
                                   std::size_t count, std::uint64_t seed,
                                   bool keep_samples = true,
                                   std::optional<int> initial = {});

// Tab-separated exports with a header row.
void write_deviation_table(std::ostream& out, const DeviationReport& report);
void write_path_table(std::ostream& out, const PathMeasure& path);

}  // namespace spe
