#pragma once

#include <cstddef>
#include <vector>

#include "spe/game.h"

namespace spe {

// Decision node of stage t, standing for a history h_{t-1} (or, for games
// with a continuation key, for every history sharing that key).
struct GraphNode {
  int parent = -1;          // node id at stage t-1, -1 at stage 1
  int parent_profile = -1;  // profile index in the parent's product
  int parent_state = -1;
  int initial = -1;         // initial point, stage-1 nodes only
  History rep;              // representative history (compressed graphs)
  std::vector<std::vector<int>> feasible;  // per player
  std::vector<ActionProfile> profiles;     // lexicographic product
  std::vector<double> prob;                // profile * states + s
  std::vector<int> child;                  // profile * states + s
  std::vector<double> reward;              // (profile * states + s) * n + i
};

struct StageGraphOptions {
  bool compress = true;  // use the game's continuation key when present
  std::size_t node_budget = 5'000'000;
};

class GraphBudgetExceeded : public std::runtime_error {
 public:
  GraphBudgetExceeded(const std::string& what, int completed_stages)
      : std::runtime_error(what), completed_stages_(completed_stages) {}
  int completed_stages() const { return completed_stages_; }

 private:
  int completed_stages_;
};

// Interned, immutable view of the first `horizon` stages. Node ids at each
// stage follow lexicographic history order.
class StageGraph {
 public:
  StageGraph(const ValidatedGame& game, int horizon,
             const StageGraphOptions& options = {});

  const GameSpec& spec() const { return *spec_; }
  int players() const { return spec_->players; }
  int horizon() const { return horizon_; }
  bool compressed() const { return compressed_; }
  int states(int t) const { return state_counts_[t - 1]; }
  const StageClass& stage_class(int t) const { return classes_[t - 1]; }

  const std::vector<GraphNode>& nodes(int t) const { return stages_[t - 1]; }
  const GraphNode& node(int t, int id) const { return stages_[t - 1][id]; }
  std::size_t terminal_count() const { return terminal_.size(); }
  // Value of reaching stage horizon+1: u(h_T) for terminal payoffs, 0 otherwise.
  const Payoff& terminal_value(int id) const { return terminal_[id]; }
  const std::vector<int>& roots() const { return roots_; }

  History history(int t, int id) const;
  History terminal_history(int id) const;
  std::size_t node_count() const;

 private:
  std::shared_ptr<const GameSpec> spec_;
  int horizon_;
  bool compressed_;
  std::vector<int> state_counts_;
  std::vector<StageClass> classes_;
  std::vector<std::vector<GraphNode>> stages_;
  std::vector<Payoff> terminal_;
  std::vector<std::pair<int, int>> terminal_source_;  // (stage-T node, edge)
  std::vector<int> roots_;
};

}  // namespace spe
