#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace spe {

// Finite n-player normal-form game. Profiles are flattened with player 1
// most significant; payoffs hold n entries per profile.
class NormalFormGame {
 public:
  NormalFormGame() = default;
  explicit NormalFormGame(std::vector<int> action_counts);

  int players() const { return static_cast<int>(counts_.size()); }
  int actions(int player) const { return counts_[player]; }
  const std::vector<int>& action_counts() const { return counts_; }
  int profiles() const { return profiles_; }

  int index(const std::vector<int>& profile) const;
  std::vector<int> profile(int index) const;

  double payoff(int profile_index, int player) const {
    return payoffs_[static_cast<std::size_t>(profile_index) * players() + player];
  }
  void set_payoff(int profile_index, int player, double value) {
    payoffs_[static_cast<std::size_t>(profile_index) * players() + player] = value;
  }
  void set_payoffs(int profile_index, const std::vector<double>& values);

 private:
  std::vector<int> counts_;
  std::vector<int> strides_;
  int profiles_ = 0;
  std::vector<double> payoffs_;
};

// Per-player probability vectors over that player's actions.
using MixedProfile = std::vector<std::vector<double>>;

MixedProfile pure_profile(const NormalFormGame& game,
                          const std::vector<int>& actions);
bool is_valid_profile(const NormalFormGame& game, const MixedProfile& profile,
                      double tolerance = 1e-12);

struct NashResult {
  MixedProfile profile;
  std::vector<double> value;
  double regret = 0.0;  // max unilateral gain over all players
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class BudgetExceeded : public std::runtime_error {
 public:
  BudgetExceeded(const std::string& what, double best_regret)
      : std::runtime_error(what), best_regret_(best_regret) {}
  double best_regret() const { return best_regret_; }

 private:
  double best_regret_;
};

std::vector<double> expected_value(const NormalFormGame& game,
                                   const MixedProfile& profile);
// Payoff of each pure action of each player against the others' mixture.
std::vector<std::vector<double>> deviation_values(const NormalFormGame& game,
                                                  const MixedProfile& profile);
// Max over pure deviations of (deviation payoff - current payoff), per player.
std::vector<double> regret(const NormalFormGame& game,
                           const MixedProfile& profile);
double max_regret(const NormalFormGame& game, const MixedProfile& profile);

// All pure equilibria in lexicographic profile order.
std::vector<NashResult> pure_equilibria(const NormalFormGame& game,
                                        double tolerance = 0.0);

// Support enumeration for one- and two-player games. Returns one certified
// representative per support pair, deduplicated.
std::vector<NashResult> solve_nash_exact(const NormalFormGame& game,
                                         double tolerance = 1e-9);

struct IterativeOptions {
  double epsilon = 1e-6;
  std::uint64_t seed = 0;
  int restarts = 8;
  int iterations = 4000;
  std::size_t grid_budget = 2'000'000;
};

// Certified epsilon-equilibrium for any player count. Throws BudgetExceeded
// when no profile with regret <= epsilon is found.
NashResult solve_nash_iterative(const NormalFormGame& game,
                                const IterativeOptions& options);

// Equilibria used by the backward-induction operator: exact enumeration for
// up to two players, otherwise all pure equilibria or one iterative result.
std::vector<NashResult> solve_nash_all(const NormalFormGame& game,
                                       const IterativeOptions& options);

}  // namespace spe
