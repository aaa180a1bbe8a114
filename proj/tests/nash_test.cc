#include <gtest/gtest.h>

#include <random>

#include "spe/nash.h"
#include "testkit.h"

namespace spe {
namespace {

NormalFormGame random_game(std::mt19937_64& rng, std::vector<int> counts) {
  NormalFormGame g(counts);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int x = 0; x < g.profiles(); ++x) {
    for (int i = 0; i < g.players(); ++i) g.set_payoff(x, i, u(rng));
  }
  return g;
}

// Player i wants to match player i+1 (mod 3) on a binary choice; no pure
// equilibrium exists.
NormalFormGame cycle_game() {
  NormalFormGame g({2, 2, 2});
  for (int x = 0; x < g.profiles(); ++x) {
    auto p = g.profile(x);
    for (int i = 0; i < 3; ++i) {
      const bool match = p[i] == p[(i + 1) % 3];
      g.set_payoff(x, i, i == 2 ? (match ? 0.0 : 1.0) : (match ? 1.0 : 0.0));
    }
  }
  return g;
}

TEST(Regret, MatchingPenniesUniform) {
  auto g = testkit::matching_pennies();
  auto r = regret(g, {{0.5, 0.5}, {0.5, 0.5}});
  EXPECT_NEAR(r[0], 0.0, 1e-15);
  EXPECT_NEAR(r[1], 0.0, 1e-15);
}

TEST(Regret, PrisonersDilemmaCooperation) {
  auto g = testkit::prisoners_dilemma();
  auto r = regret(g, pure_profile(g, {0, 0}));
  // Defecting against a cooperator pays 1 instead of .6.
  EXPECT_NEAR(r[0], 0.4, 1e-15);
  EXPECT_NEAR(r[1], 0.4, 1e-15);
}

TEST(Regret, SingleActionGameHasNone) {
  NormalFormGame g({1, 1, 1});
  g.set_payoffs(0, {0.3, 0.1, 0.7});
  auto r = regret(g, pure_profile(g, {0, 0, 0}));
  for (double v : r) EXPECT_EQ(v, 0.0);
}

TEST(Regret, DimensionMismatch) {
  auto g = testkit::matching_pennies();
  EXPECT_THROW(regret(g, {{1.0}, {0.5, 0.5}}), DimensionMismatch);
  EXPECT_THROW(regret(g, {{0.5, 0.5}}), DimensionMismatch);
}

TEST(SolveNashExact, MatchingPennies) {
  auto eq = solve_nash_exact(testkit::matching_pennies());
  ASSERT_EQ(eq.size(), 1u);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(eq[0].profile[i][0], 0.5, 1e-12);
    EXPECT_NEAR(eq[0].value[i], 0.0, 1e-12);
  }
}

TEST(SolveNashExact, CoordinationHasThreeEquilibria) {
  auto eq = solve_nash_exact(testkit::coordination());
  ASSERT_EQ(eq.size(), 3u);
  int pure = 0;
  bool mixed = false;
  for (const auto& r : eq) {
    EXPECT_LE(r.regret, 1e-9);
    if (r.profile[0][0] == 1.0 || r.profile[0][0] == 0.0) {
      ++pure;
    } else {
      mixed = true;
      EXPECT_NEAR(r.profile[0][0], 1.0 / 3, 1e-12);
      EXPECT_NEAR(r.profile[1][0], 1.0 / 3, 1e-12);
      EXPECT_NEAR(r.value[0], 2.0 / 3, 1e-12);
    }
  }
  EXPECT_EQ(pure, 2);
  EXPECT_TRUE(mixed);
}

TEST(SolveNashExact, SinglePlayerTies) {
  NormalFormGame g({3});
  g.set_payoffs(0, {3.0});
  g.set_payoffs(1, {7.0});
  g.set_payoffs(2, {7.0});
  auto eq = solve_nash_exact(g);
  ASSERT_EQ(eq.size(), 2u);
  EXPECT_EQ(eq[0].profile[0], (std::vector<double>{0, 1, 0}));
  EXPECT_EQ(eq[1].profile[0], (std::vector<double>{0, 0, 1}));
  EXPECT_EQ(eq[0].value[0], 7.0);
}

TEST(SolveNashExact, RandomGamesCertified) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto g = random_game(rng, {1 + trial % 4, 1 + (trial / 4) % 4});
    auto eq = solve_nash_exact(g);
    ASSERT_FALSE(eq.empty());
    for (const auto& r : eq) {
      EXPECT_TRUE(is_valid_profile(g, r.profile));
      EXPECT_LE(max_regret(g, r.profile), 1e-9);
      auto v = expected_value(g, r.profile);
      for (int i = 0; i < 2; ++i) EXPECT_NEAR(v[i], r.value[i], 1e-12);
    }
  }
}

TEST(SolveNashIterative, ThreePlayerCycle) {
  auto g = cycle_game();
  EXPECT_TRUE(pure_equilibria(g).empty());
  IterativeOptions o;
  o.epsilon = 1e-3;
  auto r = solve_nash_iterative(g, o);
  EXPECT_LE(r.regret, 1e-3);
  EXPECT_LE(max_regret(g, r.profile), 1e-3);
}

TEST(SolveNashIterative, StrictlyDominantProfile) {
  NormalFormGame g({2, 2, 2});
  for (int x = 0; x < g.profiles(); ++x) {
    auto p = g.profile(x);
    for (int i = 0; i < 3; ++i) g.set_payoff(x, i, p[i] == 1 ? 0.9 : 0.1 + 0.1 * p[(i + 1) % 3]);
  }
  auto r = solve_nash_iterative(g, {});
  EXPECT_EQ(r.regret, 0.0);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(r.profile[i], (std::vector<double>{0, 1}));
}

TEST(SolveNashIterative, AgreesWithExactOnTwoPlayers) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    auto g = random_game(rng, {3, 3});
    IterativeOptions o;
    o.epsilon = 1e-6;
    o.seed = trial;
    auto it = solve_nash_iterative(g, o);
    ASSERT_LE(it.regret, 1e-6);
    double best = 1e300;
    for (const auto& r : solve_nash_exact(g)) {
      double d = 0.0;
      for (int i = 0; i < 2; ++i) d = std::max(d, std::abs(r.value[i] - it.value[i]));
      best = std::min(best, d);
    }
    // Values of nearby equilibria differ by at most the payoff range times
    // the strategy gap; 1e-3 is ample for regret 1e-6 on generic games.
    EXPECT_LE(best, 1e-3) << "trial " << trial;
  }
}

TEST(SolveNashIterative, Deterministic) {
  auto g = cycle_game();
  IterativeOptions o;
  o.epsilon = 1e-4;
  o.seed = 42;
  auto a = solve_nash_iterative(g, o);
  auto b = solve_nash_iterative(g, o);
  EXPECT_EQ(a.profile, b.profile);
  EXPECT_EQ(a.value, b.value);
}

TEST(SolveNashIterative, ReportsBudget) {
  auto g = cycle_game();
  IterativeOptions o;
  o.epsilon = 1e-12;
  o.restarts = 1;
  o.iterations = 5;
  o.grid_budget = 1;
  try {
    auto r = solve_nash_iterative(g, o);
    EXPECT_LE(r.regret, 1e-12);
  } catch (const BudgetExceeded& e) {
    EXPECT_GT(e.best_regret(), 1e-12);
  }
}

TEST(NashProperties, ScaleCovariance) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = random_game(rng, {3, 2});
    auto shifted = g;
    for (int x = 0; x < g.profiles(); ++x) {
      shifted.set_payoff(x, trial % 2, g.payoff(x, trial % 2) + 5.0);
    }
    for (const auto& r : solve_nash_exact(g)) {
      auto a = regret(g, r.profile);
      auto b = regret(shifted, r.profile);
      for (int i = 0; i < 2; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
    }
  }
}

TEST(NashProperties, ThreePlayerRandomCertified) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 15; ++trial) {
    auto g = random_game(rng, {2, 3, 2});
    IterativeOptions o;
    o.epsilon = 1e-6;
    for (const auto& r : solve_nash_all(g, o)) {
      EXPECT_LE(max_regret(g, r.profile), 1e-6);
      EXPECT_NEAR(r.regret, max_regret(g, r.profile), 1e-12);
    }
  }
}

}  // namespace
}  // namespace spe
