#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "spe/game.h"
#include "spe/nash.h"
#include "spe/payoff_set.h"
#include "spe/stage_graph.h"
#include "spe/strategy.h"

namespace spe {

struct SolverOptions {
  double prune_eps = -1.0;  // negative: 1e-6 * gamma
  std::size_t selection_cap = 256;
  std::size_t minkowski_cap = 10'000;
  std::size_t value_cap = 4'000;  // points kept per Q_t(h)
  double nash_epsilon = 1e-6;     // certificate for iterative stage solves
  double exact_tolerance = 1e-9;
  std::uint64_t seed = 0;
  bool punishment = true;
  StageGraphOptions graph;

  double resolved_prune_eps(double gamma) const {
    return prune_eps < 0.0 ? 1e-6 * gamma : prune_eps;
  }
};

// Continuation payoffs available after profile x at one history. Points are
// realizable selections; links[k][s] is the index into Q_{t+1} of the child
// reached by (x, s). The first `extreme` points span the convex hull.
struct ContinuationOptions {
  std::vector<Payoff> points;
  std::vector<std::vector<int>> links;
  std::size_t extreme = 0;
};

struct ExpectedContinuationSet {
  std::vector<std::vector<int>> feasible;
  std::vector<ActionProfile> profiles;
  std::vector<ContinuationOptions> options;  // per profile
  double hausdorff_error = 0.0;
};

struct WitnessRecord {
  Payoff value;
  MixedProfile alpha;               // over the feasible lists
  std::vector<int> selection;       // per profile, index into options
  std::vector<int> links;           // profile * states + s -> index into Q_{t+1}
  double regret = 0.0;
};

struct SharingRuleResult {
  std::vector<WitnessRecord> witnesses;
  std::uint64_t unexplored = 0;  // selections skipped because of the cap
  bool cap_reached = false;
  int nash_failures = 0;
  double best_failed_regret = 0.0;
  std::uint64_t selections_solved = 0;
};

struct NodeSolution {
  PayoffSet values;                     // Q_t(h), one point per witness
  std::vector<WitnessRecord> witnesses;
  std::uint64_t unexplored = 0;
  int nash_failures = 0;
  double hausdorff_error = 0.0;
};

struct SolveStats {
  std::uint64_t nodes = 0;
  std::uint64_t selections = 0;
  std::uint64_t witnesses = 0;
  std::uint64_t unexplored = 0;
  std::uint64_t capped_nodes = 0;
  std::uint64_t nash_failures = 0;
  double hausdorff_error = 0.0;  // worst accumulated per-node bound
};

class IncompleteSolve : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Q_t(h) with witnesses for every stage of a stage graph.
struct EquilibriumCorrespondence {
  std::shared_ptr<const StageGraph> graph;
  std::vector<std::vector<NodeSolution>> stages;  // [t-1][node]
  std::vector<PayoffSet> terminal;                // Q_{T+1}
  SolveStats stats;
  SolverOptions options;
  int myopic_from = 0;  // first stage solved myopically, 0 if none

  const NodeSolution& at(int t, int node) const { return stages[t - 1][node]; }
  const PayoffSet& values(int t, int node) const;  // t == horizon+1: terminal
  const PayoffSet& root_set(int initial = 0) const;
};

ExpectedContinuationSet build_expected_continuation(
    const StageGraph& graph, int t, int node,
    const std::vector<const PayoffSet*>& next, const SolverOptions& options);

SharingRuleResult sharing_rule_search(const ExpectedContinuationSet& p,
                                      const SolverOptions& options,
                                      std::uint64_t seed = 0);

// Exact pure-strategy rule for a stage with at most one active player.
SharingRuleResult pure_stage_rule(const ExpectedContinuationSet& p,
                                  int active_player);

std::vector<NodeSolution> phi_step(const StageGraph& graph, int t,
                                   const std::vector<const PayoffSet*>& next,
                                   const SolverOptions& options);
std::vector<NodeSolution> pure_stage_solve(
    const StageGraph& graph, int t, const std::vector<const PayoffSet*>& next,
    const SolverOptions& options);

EquilibriumCorrespondence backward_solve(const ValidatedGame& game,
                                         const SolverOptions& options = {});
EquilibriumCorrespondence backward_solve(std::shared_ptr<const StageGraph> graph,
                                         const SolverOptions& options = {});

// picks[k]: index into Q_1 at the root of initial point k (missing: 0).
StrategyProfile forward_extract(const EquilibriumCorrespondence& e,
                                const std::vector<int>& picks = {});

// Recomputes the three witness identities; returns the worst violation of
// value aggregation and link expectation, and the worst Nash regret.
struct WitnessAudit {
  double aggregation_error = 0.0;
  double link_error = 0.0;
  double max_regret = 0.0;
  std::uint64_t witnesses = 0;
};
WitnessAudit audit_witnesses(const EquilibriumCorrespondence& e);

enum class BoundMode { kAnalytic, kExhaustive };

struct TruncationBound {
  int horizon = 1;
  double modulus = 0.0;  // w^T
  BoundMode mode = BoundMode::kAnalytic;
};

TruncationBound truncation_bound(const ValidatedGame& game, int T,
                                 BoundMode mode = BoundMode::kAnalytic);

struct InfiniteOptions {
  SolverOptions solver;
  double tail_fraction = 1e-6;  // w^{T_eval+1} target relative to epsilon
  int max_extra_stages = 2000;
  std::optional<int> truncation;  // override T
};

struct InfiniteCertificate {
  double epsilon = 0.0;
  int truncation = 0;         // T, full equilibrium stages
  int evaluated = 0;          // T_eval, myopic stages up to here
  double truncation_tail = 0.0;  // w^{T+1}
  double evaluation_tail = 0.0;  // w^{T_eval+1}
  double max_regret = 0.0;       // one-step regret on the evaluated game
  double bound = 0.0;            // max_regret + 2 w^{T_eval+1}
  bool verified = false;
  double achievable_epsilon = 0.0;  // filled when the graph budget is hit
};

struct InfiniteSolution {
  EquilibriumCorrespondence correspondence;
  StrategyProfile profile;
  InfiniteCertificate certificate;
};

class TruncationBudgetExceeded : public std::runtime_error {
 public:
  TruncationBudgetExceeded(const std::string& what, double achievable)
      : std::runtime_error(what), achievable_(achievable) {}
  double achievable_epsilon() const { return achievable_; }

 private:
  double achievable_;
};

// Equilibrium sets for stages 1..T, myopic stage Nash play from T+1 to
// T_eval, zero value afterwards.
EquilibriumCorrespondence solve_truncation(const ValidatedGame& game, int T,
                                           int T_eval,
                                           const SolverOptions& options);

InfiniteSolution solve_infinite(const ValidatedGame& game, double epsilon,
                                const InfiniteOptions& options = {});

}  // namespace spe
