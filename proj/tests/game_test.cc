#include <gtest/gtest.h>

#include <random>
#include <set>

#include "spe/game.h"
#include "testkit.h"

namespace spe {
namespace {

GameSpec one_player_two_states() {
  GameSpec spec;
  spec.players = 1;
  spec.horizon = 1;
  spec.initial = {InitialPoint{}};
  StageSpec st;
  st.action_counts = {2};
  st.grid = StateGrid{{0.0, 1.0}, {0.5, 0.5}};
  spec.stages = {st};
  spec.payoff = TerminalPayoffFn([](const History& h) {
    return Payoff{1.0 + h.actions[0][0] + 0.5 * h.states[0]};
  });
  spec.gamma = 2.5;
  return spec;
}

bool mentions(const ValidationError& e, const std::string& text) {
  for (const auto& issue : e.issues()) {
    if (issue.find(text) != std::string::npos) return true;
  }
  return false;
}

TEST(ValidateSpec, MinimalGameIsValid) {
  auto game = validate_spec(one_player_two_states());
  EXPECT_EQ(game.players(), 1);
  EXPECT_EQ(game.horizon(), 1);
}

TEST(ValidateSpec, ReportsDensityMass) {
  GameSpec spec = one_player_two_states();
  spec.density = [](int, const History&, const ActionProfile&) {
    return std::vector<double>{0.9, 0.9};
  };
  try {
    validate_spec(spec);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_TRUE(mentions(e, "density mass 0.9")) << e.what();
    EXPECT_TRUE(mentions(e, "at h=0")) << e.what();
  }
}

TEST(ValidateSpec, PerfectInfoStageNeedsSingletonGrid) {
  GameSpec spec = one_player_two_states();
  spec.stages[0].declared = StageKind::kPerfectInfo;
  try {
    validate_spec(spec);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_TRUE(mentions(e, "singleton state grid")) << e.what();
  }
}

TEST(ValidateSpec, RejectsEmptyFeasibility) {
  GameSpec spec = one_player_two_states();
  spec.feasible = [](int, int, const History&) { return std::vector<int>{}; };
  EXPECT_THROW(validate_spec(spec), ValidationError);
}

TEST(ValidateSpec, RejectsPayoffOutsideBound) {
  GameSpec spec = one_player_two_states();
  spec.gamma = 1.5;
  EXPECT_THROW(validate_spec(spec), ValidationError);
  spec = one_player_two_states();
  spec.payoff = TerminalPayoffFn([](const History&) { return Payoff{0.0}; });
  EXPECT_THROW(validate_spec(spec), ValidationError);
}

TEST(ValidateSpec, RejectsDensityAboveEnvelope) {
  GameSpec spec = one_player_two_states();
  spec.stages[0].envelope = {1.5, 0.5};
  spec.density = [](int, const History&, const ActionProfile&) {
    return std::vector<double>{0.0, 2.0};
  };
  EXPECT_THROW(validate_spec(spec), ValidationError);
}

TEST(EnumerateHistories, StageZeroIsInitialPoints) {
  GameSpec spec = one_player_two_states();
  spec.initial = {InitialPoint{0, 0, 0.25}, InitialPoint{1, 0, 0.75}};
  auto game = validate_spec(spec);
  auto h0 = enumerate_histories(game, 0);
  ASSERT_EQ(h0.size(), 2u);
  EXPECT_EQ(h0[0].initial, 0);
  EXPECT_EQ(h0[1].initial, 1);
  EXPECT_EQ(h0[0].stage(), 0);
}

TEST(EnumerateHistories, ProductCounts) {
  auto game = validate_spec(one_player_two_states());
  EXPECT_EQ(enumerate_histories(game, 1).size(), 4u);

  GameSpec spec;
  spec.players = 2;
  spec.horizon = 1;
  spec.initial = {InitialPoint{}};
  StageSpec st;
  st.action_counts = {2, 3};
  st.grid = StateGrid{{0.0, 1.0}, {0.5, 0.5}};
  spec.stages = {st};
  spec.payoff = TerminalPayoffFn([](const History&) { return Payoff{1.0, 1.0}; });
  auto two = validate_spec(spec);
  auto h1 = enumerate_histories(two, 1);
  EXPECT_EQ(h1.size(), 12u);
  EXPECT_EQ(std::set<History>(h1.begin(), h1.end()).size(), 12u);
}

TEST(StageClassTest, AlternatingMoveIsPerfectInfo) {
  std::mt19937_64 rng(5);
  auto game = validate_spec(testkit::random_pi_tree(rng, 2, 3, 3));
  for (int t = 1; t <= 3; ++t) {
    StageClass c = stage_class(game, t);
    EXPECT_EQ(c.kind, StageKind::kPerfectInfo);
    EXPECT_EQ(c.active_player, (t - 1) % 2);
  }
}

TEST(StageClassTest, DuopolyStageIsSimultaneous) {
  auto game = validate_spec(testkit::matrix_game(testkit::prisoners_dilemma()));
  EXPECT_EQ(stage_class(game, 1).kind, StageKind::kSimultaneous);
}

TEST(StageClassTest, StochasticSingleMoverIsSimultaneous) {
  auto game = validate_spec(one_player_two_states());
  EXPECT_EQ(stage_class(game, 1).kind, StageKind::kSimultaneous);
}

TEST(HistoryLabel, RoundTrips) {
  History h;
  h.initial = 2;
  h = h.extend({1, 0}, 1).extend({0, 2}, 0);
  EXPECT_EQ(h.label(), "2/1,0:1/0,2:0");
  EXPECT_EQ(History::parse(h.label()), h);
  EXPECT_EQ(h.prefix(1).label(), "2/1,0:1");
  EXPECT_THROW(History::parse("0/1,0"), std::invalid_argument);
}

// Every enumerated history is consistent, densities normalize, and stage
// t+1 histories project onto stage t histories.
TEST(GameProperties, RandomCorpus) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    testkit::RandomGameShape shape;
    shape.players = 1 + trial % 3;
    shape.stages = 1 + trial % 3;
    shape.max_actions = 3;
    shape.max_states = 3;
    auto game = validate_spec(testkit::random_game(rng, shape));
    const GameSpec& spec = game.spec();
    std::vector<History> prev = enumerate_histories(game, 0);
    for (int t = 1; t <= shape.stages; ++t) {
      auto cur = enumerate_histories(game, t);
      std::set<History> projected;
      for (const auto& h : cur) {
        EXPECT_TRUE(history_consistent(spec, h));
        projected.insert(h.prefix(t - 1));
      }
      EXPECT_EQ(projected, std::set<History>(prev.begin(), prev.end()));
      for (const auto& h : prev) {
        std::vector<std::vector<int>> feasible;
        for (int i = 0; i < spec.players; ++i) {
          feasible.push_back(spec.feasible_actions(t, i, h));
        }
        for (const auto& x : profile_product(feasible)) {
          auto row = spec.density_row(t, h, x);
          double mass = 0.0;
          for (std::size_t s = 0; s < row.size(); ++s) {
            mass += row[s] * spec.stage(t).grid.weights[s];
          }
          EXPECT_NEAR(mass, 1.0, 1e-12);
        }
      }
      prev = cur;
    }
  }
}

}  // namespace
}  // namespace spe
