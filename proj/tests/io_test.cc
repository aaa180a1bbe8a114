#include <gtest/gtest.h>

#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spe/io.h"

namespace spe {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const char* kPrisoners = R"({
  "format": "spe-game",
  "version": 1,
  "name": "pd",
  "players": 2,
  "horizon": 1,
  "gamma": 1,
  "stages": [
    {
      "class": "simultaneous",
      "actions": [2, 2],
      "grid": {"points": [0, 1], "weights": [0.5, 0.5]}
    }
  ],
  "payoff": {
    "type": "terminal",
    "table": [
      {"history": "0/0,0:0", "value": [0.6, 0.6]},
      {"history": "0/0,0:1", "value": [0.6, 0.6]},
      {"history": "0/0,1:0", "value": [0.1, 1.0]},
      {"history": "0/0,1:1", "value": [0.1, 1.0]},
      {"history": "0/1,0:0", "value": [1.0, 0.1]},
      {"history": "0/1,0:1", "value": [1.0, 0.1]}
    ],
    "default": [0.2, 0.2]
  }
})";

std::vector<Diagnostic> diagnostics_of(const std::string& text) {
  try {
    parse_game_file(text);
  } catch (const GameFileError& e) {
    return e.diagnostics();
  }
  return {};
}

bool any_message(const std::vector<Diagnostic>& ds, const std::string& needle) {
  for (const auto& d : ds) {
    if (d.message.find(needle) != std::string::npos) return true;
  }
  return false;
}

std::string edited(const std::function<void(json&)>& edit) {
  json doc = json::parse(kPrisoners);
  edit(doc);
  return doc.dump();
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("spe_io_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(GameFileParse, ReadsExample) {
  GameFile f = parse_game_file(kPrisoners);
  EXPECT_EQ(f.players, 2);
  EXPECT_EQ(f.horizon, 1);
  EXPECT_EQ(f.stages.size(), 1u);
  EXPECT_EQ(f.terminal.size(), 6u);
  ASSERT_TRUE(f.terminal_default);
  EXPECT_EQ(*f.terminal_default, (Payoff{0.2, 0.2}));
  auto spec = to_game_spec(f);
  auto game = validate_spec(spec);
  History h;
  h = h.extend({1, 1}, 0);
  EXPECT_EQ(game.spec().evaluate(h), (Payoff{0.2, 0.2}));
}

TEST(GameFileParse, RoundTripIsStable) {
  GameFile f = parse_game_file(kPrisoners);
  const std::string once = serialize_game_file(f);
  EXPECT_EQ(parse_game_file(once), f);
  EXPECT_EQ(serialize_game_file(parse_game_file(once)), once);
}

TEST(GameFileParse, RoundTripsSampleGames) {
  for (const auto& entry : fs::directory_iterator(SPE_GAMES_DIR)) {
    const std::string text = slurp(entry.path());
    if (json::parse(text).value("format", "") != "spe-game") continue;
    GameFile f = parse_game_file(text);
    EXPECT_EQ(parse_game_file(serialize_game_file(f)), f) << entry.path();
    EXPECT_NO_THROW(validate_spec(to_game_spec(f))) << entry.path();
  }
}

TEST(GameFileDiagnostics, VersionMismatch) {
  auto ds = diagnostics_of(edited([](json& d) { d["version"] = 7; }));
  ASSERT_FALSE(ds.empty());
  EXPECT_EQ(ds[0].location, "/version");
  EXPECT_TRUE(any_message(ds, "version mismatch: file has 7, reader supports 1"));
}

TEST(GameFileDiagnostics, DensityArityNamesStageAndRow) {
  auto ds = diagnostics_of(edited([](json& d) {
    d["stages"][0]["density"] = json::array({{{"row", {1.0, 1.0, 1.0}}}});
  }));
  EXPECT_TRUE(any_message(ds, "stage block 1, density row 0: 3 entries, grid has 2 points"));
}

TEST(GameFileDiagnostics, UnknownStageClass) {
  auto ds = diagnostics_of(edited([](json& d) { d["stages"][0]["class"] = "chance"; }));
  EXPECT_TRUE(any_message(ds, "stage block 1: unknown stage-class tag"));
}

TEST(GameFileDiagnostics, UnknownFieldAndCollectsSeveral) {
  auto ds = diagnostics_of(edited([](json& d) {
    d["colour"] = "red";
    d["players"] = "two";
  }));
  EXPECT_GE(ds.size(), 2u);
  EXPECT_TRUE(any_message(ds, "unknown field 'colour'"));
}

TEST(GameFileDiagnostics, SyntaxErrorHasLineAndColumn) {
  auto ds = diagnostics_of("{\n  \"format\": \"spe-game\",\n  oops\n}");
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0].location.rfind("line 3, column", 0), 0u) << ds[0].location;
}

TEST(OligopolyParamsFile, RoundTrip) {
  OligopolyParams p;
  p.firms = 3;
  p.theta = 0.25;
  p.shock_low = -1;
  p.shock_high = 2;
  p.shock_points = 4;
  p.law = ShockLaw::kTriangular;
  p.horizon = std::nullopt;
  auto q = parse_oligopoly_params(serialize_oligopoly_params(p));
  EXPECT_EQ(q.firms, 3);
  EXPECT_EQ(q.theta, 0.25);
  EXPECT_EQ(q.law, ShockLaw::kTriangular);
  EXPECT_FALSE(q.horizon.has_value());
  EXPECT_EQ(serialize_oligopoly_params(q), serialize_oligopoly_params(p));
}

TEST(Digest, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

ResultBundle solved_prisoners() {
  GameFile f = parse_game_file(kPrisoners);
  return solve_game_file(f, 1e-6, solver_options(f.solver));
}

TEST(Bundle, JsonRoundTripReplaysIdentically) {
  ResultBundle b = solved_prisoners();
  ASSERT_EQ(b.root_sets.size(), 1u);
  EXPECT_EQ(b.root_sets[0].points, (std::vector<Payoff>{{0.2, 0.2}}));
  ResultBundle back = bundle_from_json(bundle_to_json(b));
  EXPECT_EQ(bundle_to_json(back), bundle_to_json(b));
  ReplayOutcome r = replay_bundle(back);
  EXPECT_TRUE(r.digest_ok);
  EXPECT_TRUE(r.report_identical);
}

TEST(Bundle, TamperedInputFailsDigest) {
  ResultBundle b = solved_prisoners();
  b.input += " ";
  EXPECT_FALSE(replay_bundle(b).digest_ok);
}

TEST(Bundle, Deterministic) {
  EXPECT_EQ(bundle_to_json(solved_prisoners()), bundle_to_json(solved_prisoners()));
}

TEST(Emit, CreatesDirectoryAndFiles) {
  const fs::path dir = fresh_dir("emit") / "nested";
  auto files = emit_results(solved_prisoners(), EmitFormat::kBoth, dir);
  EXPECT_EQ(files.paths.size(), 5u);
  for (const auto& p : files.paths) EXPECT_TRUE(fs::exists(p)) << p;
  // Timing lives only in the sidecar.
  EXPECT_EQ(slurp(dir / "bundle.json").find("wall_seconds"), std::string::npos);
  EXPECT_NE(slurp(dir / "timing.json").find("wall_seconds"), std::string::npos);
}

TEST(Emit, StrategyTableForOneStage) {
  ResultBundle b = solved_prisoners();
  std::ostringstream out;
  write_strategy_table(out, b.profile);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "state\tstage\thistory\tplayer\taction\tprobability");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4);  // one state, two players, two actions
}

}  // namespace
}  // namespace spe
