#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace spe {

using Payoff = std::vector<double>;
// One action index per player, indices into that player's stage action grid.
using ActionProfile = std::vector<int>;

// Players are numbered 1..n; Nature (player 0) never carries a PlayerId.
struct PlayerId {
  int index = 1;
  int slot() const { return index - 1; }
  static PlayerId from_slot(int slot) { return PlayerId{slot + 1}; }
  friend bool operator==(PlayerId, PlayerId) = default;
};

// h_t = (x_0, s_0, x_1, s_1, ..., x_t, s_t). The initial pair (x_0, s_0) is
// referenced through its index in GameSpec::initial.
struct History {
  int initial = 0;
  std::vector<ActionProfile> actions;
  std::vector<int> states;

  int stage() const { return static_cast<int>(actions.size()); }
  History extend(const ActionProfile& x, int s) const;
  History prefix(int t) const;

  // "0/1,0:1/0,0:0" -> initial 0, then x_1 = (1,0), s_1 = 1, ...
  std::string label() const;
  static History parse(const std::string& label);

  friend bool operator==(const History&, const History&) = default;
  friend auto operator<=>(const History&, const History&) = default;
};

struct InitialPoint {
  int action = 0;  // x_0
  int state = 0;   // s_0
  double weight = 1.0;
  friend bool operator==(const InitialPoint&, const InitialPoint&) = default;
};

struct StateGrid {
  std::vector<double> points;
  std::vector<double> weights;  // reference measure lambda_t
  std::size_t size() const { return points.size(); }
  friend bool operator==(const StateGrid&, const StateGrid&) = default;
};

enum class StageKind { kSimultaneous, kPerfectInfo };

struct StageClass {
  StageKind kind = StageKind::kSimultaneous;
  int active_player = -1;  // slot of the single mover when kind == kPerfectInfo
  friend bool operator==(const StageClass&, const StageClass&) = default;
};

struct StageSpec {
  std::vector<int> action_counts;  // |X_ti| per player
  StateGrid grid;
  StageKind declared = StageKind::kSimultaneous;
  // Optional envelope phi_bar_t(s); derived from the visited rows when empty.
  std::vector<double> envelope;
};

using FeasibilityFn =
    std::function<std::vector<int>(int t, int player, const History& prev)>;
// Density of the stage-t state w.r.t. lambda_t, one entry per grid point.
using DensityFn = std::function<std::vector<double>(
    int t, const History& prev, const ActionProfile& x)>;
using TerminalPayoffFn = std::function<Payoff(const History&)>;
using StagePayoffFn = std::function<Payoff(int t, const History& prev,
                                           const ActionProfile& x, int s)>;
// Compressed continuation key for h_t. Two stage-t histories with equal keys
// must have identical feasibility, densities and future stage payoffs.
using MarkovKeyFn = std::function<std::int64_t(int t, const History& h)>;

// u_i = sum_t discount_i^{t-1} g_ti with g_ti in [0, stage_bound].
struct DecomposedPayoff {
  StagePayoffFn stage;
  std::vector<double> discount;
  double stage_bound = 1.0;
};

struct GameSpec {
  std::string name;
  int players = 1;
  std::optional<int> horizon;  // nullopt: infinite horizon
  std::vector<InitialPoint> initial;
  // stage t uses stages[(t - 1) % stages.size()]; finite games list every stage.
  std::vector<StageSpec> stages;
  FeasibilityFn feasible;  // empty: every action in the grid
  DensityFn density;       // empty: uniform (density 1)
  std::variant<TerminalPayoffFn, DecomposedPayoff> payoff;
  double gamma = 1.0;
  MarkovKeyFn markov_key;  // empty: full history tree

  const StageSpec& stage(int t) const;
  bool decomposed() const {
    return std::holds_alternative<DecomposedPayoff>(payoff);
  }
  bool infinite() const { return !horizon.has_value(); }

  std::vector<int> feasible_actions(int t, int player, const History& prev) const;
  std::vector<double> density_row(int t, const History& prev,
                                  const ActionProfile& x) const;
  // Total payoff of a terminal history (finite games) or of the truncated
  // stage sum for decomposed payoffs.
  Payoff evaluate(const History& h) const;
  // Stage reward discount_i^{t-1} g_ti, zero for terminal-payoff games.
  Payoff stage_reward(int t, const History& prev, const ActionProfile& x,
                      int s) const;
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

struct ValidationOptions {
  double density_tolerance = 1e-12;
  double payoff_floor = 1e-12;
  int infinite_depth = 0;  // stages checked for infinite games; 0 = 2 cycles
  std::size_t history_budget = 2'000'000;
};

// Immutable, read-only shareable view of a checked game.
class ValidatedGame {
 public:
  const GameSpec& spec() const { return *spec_; }
  std::shared_ptr<const GameSpec> shared_spec() const { return spec_; }
  int players() const { return spec_->players; }
  std::optional<int> horizon() const { return spec_->horizon; }
  // Stage classes as computed from the structure for stages 1..checked depth.
  const StageClass& stage_class(int t) const;
  int checked_depth() const { return static_cast<int>(classes_.size()); }

 private:
  friend ValidatedGame validate_spec(std::shared_ptr<const GameSpec> spec,
                                     const ValidationOptions& options);
  std::shared_ptr<const GameSpec> spec_;
  std::vector<StageClass> classes_;
};

ValidatedGame validate_spec(std::shared_ptr<const GameSpec> spec,
                            const ValidationOptions& options = {});
inline ValidatedGame validate_spec(GameSpec spec,
                                   const ValidationOptions& options = {}) {
  return validate_spec(std::make_shared<const GameSpec>(std::move(spec)),
                       options);
}

// Reachable stage-t histories in lexicographic order. The position of a
// history in the returned list is its interned history-key.
std::vector<History> enumerate_histories(const ValidatedGame& game, int t);

StageClass stage_class(const ValidatedGame& game, int t);

// Cartesian product of per-player action lists, player 1 most significant.
std::vector<ActionProfile> profile_product(
    const std::vector<std::vector<int>>& per_player);

// Checks the History invariant: every x_k feasible, every s_k on the grid.
bool history_consistent(const GameSpec& spec, const History& h);

}  // namespace spe
