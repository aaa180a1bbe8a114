#pragma once

#include <vector>

#include "spe/game.h"
#include "spe/nash.h"

namespace spe {

// A decision point h_{t-1} shared by all strategy states at that history.
struct DecisionPoint {
  int t = 1;    // stage whose actions are chosen here
  History rep;  // h_{t-1}; for compressed games any history with the same key
  std::vector<std::vector<int>> feasible;  // per player
  std::vector<ActionProfile> profiles;     // product of `feasible`
  int states = 1;                          // |S_t|
};

// For full history trees there is one state per history; for compressed
// games a state also remembers which continuation value was promised.
struct StrategyState {
  int point = -1;  // index into StrategyProfile::points
  int node = -1;   // stage-graph node
  int witness = -1;
  MixedProfile play;      // over the feasible lists
  std::vector<int> next;  // profile * states + s -> state, -1 after last stage
  Payoff promised;        // continuation value claimed by the solver
};

struct StrategyProfile {
  int players = 1;
  int horizon = 1;
  std::vector<DecisionPoint> points;
  std::vector<StrategyState> states;
  std::vector<int> roots;  // per initial point

  const DecisionPoint& point(const StrategyState& s) const { return points[s.point]; }
  // Index of x within the decision point's product, -1 when infeasible.
  int profile_index(const DecisionPoint& p, const ActionProfile& x) const;
  // State prescribing stage h.stage()+1 play after h; -1 if h leaves the
  // feasible tree or reaches the horizon.
  int locate(const History& h) const;
  double probability(const StrategyState& s, int profile) const;
};

}  // namespace spe
