#include "spe/stage_graph.h"

#include <algorithm>
#include <map>

namespace spe {

StageGraph::StageGraph(const ValidatedGame& game, int horizon,
                       const StageGraphOptions& options)
    : spec_(game.shared_spec()), horizon_(horizon) {
  const GameSpec& spec = *spec_;
  if (horizon < 1) throw std::invalid_argument("graph horizon must be >= 1");
  if (spec.horizon && horizon > *spec.horizon) {
    throw std::invalid_argument("graph horizon beyond game horizon");
  }
  compressed_ = options.compress && static_cast<bool>(spec.markov_key);
  const int n = spec.players;
  stages_.resize(horizon);
  for (int t = 1; t <= horizon; ++t) {
    state_counts_.push_back(static_cast<int>(spec.stage(t).grid.size()));
    classes_.push_back(game.stage_class(t));
  }

  std::size_t total = 0;
  auto charge = [&](int t) {
    if (++total > options.node_budget) {
      throw GraphBudgetExceeded(
          "history tree exceeds node budget at stage " + std::to_string(t), t - 1);
    }
  };

  std::map<std::int64_t, int> root_keys;
  for (std::size_t k = 0; k < spec.initial.size(); ++k) {
    History h;
    h.initial = static_cast<int>(k);
    if (compressed_) {
      auto [it, fresh] = root_keys.emplace(spec.markov_key(0, h),
                                           static_cast<int>(stages_[0].size()));
      if (!fresh) {
        roots_.push_back(it->second);
        continue;
      }
    }
    GraphNode node;
    node.initial = static_cast<int>(k);
    if (compressed_) node.rep = h;
    roots_.push_back(static_cast<int>(stages_[0].size()));
    stages_[0].push_back(std::move(node));
    charge(1);
  }

  for (int t = 1; t <= horizon; ++t) {
    const int states = state_counts_[t - 1];
    const auto& weights = spec.stage(t).grid.weights;
    std::map<std::int64_t, int> keys;
    for (std::size_t id = 0; id < stages_[t - 1].size(); ++id) {
      const History h = history(t, static_cast<int>(id));
      std::vector<std::vector<int>> feasible(n);
      for (int i = 0; i < n; ++i) feasible[i] = spec.feasible_actions(t, i, h);
      std::vector<ActionProfile> profiles = profile_product(feasible);
      const std::size_t edges = profiles.size() * states;
      std::vector<double> prob(edges);
      std::vector<int> child(edges);
      std::vector<double> reward;
      if (spec.decomposed()) reward.assign(edges * n, 0.0);
      for (std::size_t x = 0; x < profiles.size(); ++x) {
        const auto row = spec.density_row(t, h, profiles[x]);
        for (int s = 0; s < states; ++s) {
          const std::size_t e = x * states + s;
          prob[e] = row[s] * weights[s];
          if (spec.decomposed()) {
            const Payoff r = spec.stage_reward(t, h, profiles[x], s);
            std::copy(r.begin(), r.end(), reward.begin() + e * n);
          }
          const bool last = t == horizon;
          if (compressed_) {
            const History next = h.extend(profiles[x], s);
            const std::int64_t key = spec.markov_key(t, next);
            auto found = keys.find(key);
            if (found != keys.end()) {
              child[e] = found->second;
              continue;
            }
            if (last) {
              child[e] = static_cast<int>(terminal_.size());
              terminal_.push_back(Payoff(n, 0.0));
              terminal_source_.emplace_back(static_cast<int>(id), static_cast<int>(e));
            } else {
              GraphNode node;
              node.parent = static_cast<int>(id);
              node.parent_profile = static_cast<int>(x);
              node.parent_state = s;
              node.rep = next;
              child[e] = static_cast<int>(stages_[t].size());
              stages_[t].push_back(std::move(node));
            }
            keys.emplace(key, child[e]);
            charge(t + 1);
          } else if (last) {
            child[e] = static_cast<int>(terminal_.size());
            terminal_.push_back(spec.decomposed()
                                    ? Payoff(n, 0.0)
                                    : spec.evaluate(h.extend(profiles[x], s)));
            terminal_source_.emplace_back(static_cast<int>(id), static_cast<int>(e));
            charge(t + 1);
          } else {
            GraphNode node;
            node.parent = static_cast<int>(id);
            node.parent_profile = static_cast<int>(x);
            node.parent_state = s;
            child[e] = static_cast<int>(stages_[t].size());
            stages_[t].push_back(std::move(node));
            charge(t + 1);
          }
        }
      }
      GraphNode& node = stages_[t - 1][id];
      node.feasible = std::move(feasible);
      node.profiles = std::move(profiles);
      node.prob = std::move(prob);
      node.child = std::move(child);
      node.reward = std::move(reward);
    }
  }
}

History StageGraph::history(int t, int id) const {
  const GraphNode& node = stages_[t - 1][id];
  if (compressed_) return node.rep;
  History h;
  std::vector<std::pair<ActionProfile, int>> path;
  int stage = t;
  int cur = id;
  while (stage > 1) {
    const GraphNode& n = stages_[stage - 1][cur];
    const GraphNode& parent = stages_[stage - 2][n.parent];
    path.emplace_back(parent.profiles[n.parent_profile], n.parent_state);
    cur = n.parent;
    --stage;
  }
  h.initial = stages_[0][cur].initial;
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    h.actions.push_back(it->first);
    h.states.push_back(it->second);
  }
  return h;
}

History StageGraph::terminal_history(int id) const {
  const auto [node_id, edge] = terminal_source_[id];
  const GraphNode& node = stages_[horizon_ - 1][node_id];
  const int states = state_counts_[horizon_ - 1];
  const History h = compressed_ ? node.rep : history(horizon_, node_id);
  return h.extend(node.profiles[edge / states], edge % states);
}

std::size_t StageGraph::node_count() const {
  std::size_t total = terminal_.size();
  for (const auto& s : stages_) total += s.size();
  return total;
}

}  // namespace spe
