#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spe/engine.h"
#include "spe/game.h"

namespace spe {

enum class ShockLaw { kUniform, kTriangular };

struct OligopolyParams {
  int firms = 2;
  // Linear sticky demand P_t = max(0, a - b (theta * Qbar_{t-1} + Q_t) + s_t).
  double a = 10.0;
  double b = 1.0;
  double theta = 0.0;
  std::vector<double> costs = {2.0};     // per firm; one entry applies to all
  std::vector<double> discount = {0.9};  // per firm; one entry applies to all
  // Shock grid: `shock_points` equally spaced points on [shock_low, shock_high].
  double shock_low = 0.0;
  double shock_high = 0.0;
  int shock_points = 1;
  ShockLaw law = ShockLaw::kUniform;
  std::vector<double> outputs = {0, 1, 2, 3, 4, 5, 6, 7, 8};
  std::optional<int> horizon = 1;  // nullopt: infinite horizon

  double cost(int firm) const { return costs.size() == 1 ? costs[0] : costs.at(firm); }
  double beta(int firm) const {
    return discount.size() == 1 ? discount[0] : discount.at(firm);
  }
  std::vector<double> shock_grid() const;
  std::vector<double> shock_probabilities() const;
};

struct OligopolyGame {
  GameSpec spec;
  OligopolyParams params;
  double offset = 0.0;  // added to every stage profit to keep payoffs >= 0
  std::vector<std::string> warnings;

  // Price and undiscounted, unshifted profits of period t after h_{t-1}.
  double price(int t, const History& prev, const ActionProfile& x) const;
  double shock(int t, const History& prev) const;
  double past_average(const History& prev) const;
};

// Throws std::invalid_argument on invalid parameters.
OligopolyGame build_oligopoly(const OligopolyParams& params);

struct ClosedForm {
  double monopoly_output = 0.0;  // (a - c) / (2b)
  double cournot_output = 0.0;   // (a - c) / ((n + 1) b), per firm
  double cournot_price = 0.0;    // a - b n q*, expected under mean-zero shocks
};

// Static linear subfamily with symmetric costs.
ClosedForm closed_form_checks(const OligopolyParams& params);

struct ScenarioPeriod {
  int t = 1;
  std::vector<double> expected_output;  // per firm
  double expected_price = 0.0;
};

struct ScenarioReport {
  std::vector<ScenarioPeriod> periods;
  std::vector<double> firm_values;  // expected discounted profits, unshifted
  std::vector<PayoffSet> root_sets;  // per period-1 shock, unshifted
  SolveStats stats;
  std::optional<InfiniteCertificate> certificate;
  std::vector<std::string> warnings;
};

class ScenarioBudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ScenarioReport run_scenario(const OligopolyParams& params, double epsilon,
                            const SolverOptions& options = {});

// Tab-separated report: one row per period, then the root payoff sets.
void write_scenario_table(std::ostream& out, const ScenarioReport& report);

}  // namespace spe
