#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spe/engine.h"
#include "spe/game.h"
#include "spe/oligopoly.h"
#include "spe/strategy.h"
#include "spe/verify.h"

namespace spe {

inline constexpr int kGameFileVersion = 1;
inline constexpr int kBundleVersion = 1;

// Location is a JSON pointer ("/stages/0/density/2/row") or, for syntax
// errors, "line L, column C".
struct Diagnostic {
  std::string location;
  std::string message;
  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

class GameFileError : public std::runtime_error {
 public:
  explicit GameFileError(std::vector<Diagnostic> diagnostics);
  GameFileError(std::string location, std::string message)
      : GameFileError(std::vector<Diagnostic>{{std::move(location), std::move(message)}}) {}
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

// Table entries apply to histories h_{t-1} that match every given field.
// The most specific match wins; ties go to the earliest entry.
struct Condition {
  std::optional<std::string> history;  // label of h_{t-1}
  std::optional<int> prev_state;       // last state of h_{t-1}
  std::optional<ActionProfile> profile;
  std::optional<int> state;  // realized s_t (stage rewards only)
  friend bool operator==(const Condition&, const Condition&) = default;
};

struct FeasibleEntry {
  Condition when;
  std::vector<std::vector<int>> actions;  // per player
  friend bool operator==(const FeasibleEntry&, const FeasibleEntry&) = default;
};

struct DensityEntry {
  Condition when;
  std::vector<double> row;
  friend bool operator==(const DensityEntry&, const DensityEntry&) = default;
};

struct PayoffEntry {
  Condition when;
  Payoff value;
  friend bool operator==(const PayoffEntry&, const PayoffEntry&) = default;
};

struct StageBlock {
  StageKind kind = StageKind::kSimultaneous;
  std::vector<int> actions;
  StateGrid grid;
  std::vector<double> envelope;
  std::vector<FeasibleEntry> feasible;  // empty: whole grid
  std::vector<DensityEntry> density;    // empty: density 1
  std::vector<PayoffEntry> rewards;     // decomposed payoffs; unmatched: 0
  friend bool operator==(const StageBlock&, const StageBlock&) = default;
};

enum class Compression { kNone, kLastState };

struct SolverSection {
  std::optional<double> epsilon;
  std::optional<double> prune_eps;
  std::optional<std::size_t> selection_cap;
  std::optional<std::size_t> value_cap;
  std::optional<std::size_t> minkowski_cap;
  std::optional<std::uint64_t> seed;
  std::optional<bool> punishment;
  friend bool operator==(const SolverSection&, const SolverSection&) = default;
};

struct GameFile {
  int version = kGameFileVersion;
  std::string name;
  int players = 1;
  std::optional<int> horizon;  // nullopt: infinite, stages repeat cyclically
  double gamma = 1.0;
  std::vector<InitialPoint> initial;
  std::vector<StageBlock> stages;
  bool decomposed = false;
  std::vector<double> discount;         // decomposed only
  double stage_bound = 1.0;             // decomposed only
  std::vector<PayoffEntry> terminal;    // keyed by the label of h_T
  std::optional<Payoff> terminal_default;
  Compression compression = Compression::kNone;
  SolverSection solver;
  friend bool operator==(const GameFile&, const GameFile&) = default;
};

// Throws GameFileError carrying every diagnostic found.
GameFile parse_game_file(const std::string& text);
GameFile read_game_file(const std::filesystem::path& path);
std::string serialize_game_file(const GameFile& file);

// Throws GameFileError for references the schema cannot catch (labels that
// do not parse, compression with history-keyed entries).
GameSpec to_game_spec(const GameFile& file);

// Solver options from the file's solver section, overridden by the caller.
SolverOptions solver_options(const SolverSection& section);

// Oligopoly parameter documents.
OligopolyParams parse_oligopoly_params(const std::string& text);
std::string serialize_oligopoly_params(const OligopolyParams& params);

std::string sha256_hex(const std::string& data);

// Deterministic work counters; wall-clock time goes to a sidecar.
struct WorkCounters {
  SolveStats stats;
  std::uint64_t strategy_states = 0;
  std::uint64_t deviation_entries = 0;
};

struct ResultBundle {
  int version = kBundleVersion;
  std::string input;         // canonical game file text
  std::string input_digest;  // sha256 of `input`
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  EquilibriumCorrespondence correspondence;  // graph is not stored
  std::vector<std::vector<std::string>> node_histories;  // [t-1][node]
  std::vector<PayoffSet> root_sets;                      // per initial point
  StrategyProfile profile;
  DeviationReport report;
  std::optional<InfiniteCertificate> certificate;
  WorkCounters counters;
  double wall_seconds = 0.0;  // sidecar only
};

// Solves the game described by `file`; ε and option overrides come from
// the caller. Finite games go through backward_solve, infinite ones through
// solve_infinite.
ResultBundle solve_game_file(const GameFile& file, double epsilon,
                             const SolverOptions& options);

std::string bundle_to_json(const ResultBundle& bundle);
ResultBundle bundle_from_json(const std::string& text);

enum class EmitFormat { kTable, kBundle, kBoth };

struct EmittedFiles {
  std::vector<std::filesystem::path> paths;
};

// Creates `dir` when missing. Table mode writes root_set.tsv, strategy.tsv
// and deviations.tsv; bundle mode writes bundle.json and timing.json.
// Throws std::runtime_error with the OS message on write failures.
EmittedFiles emit_results(const ResultBundle& bundle, EmitFormat format,
                          const std::filesystem::path& dir);

void write_root_table(std::ostream& out, const ResultBundle& bundle);
void write_strategy_table(std::ostream& out, const StrategyProfile& profile);

struct ReplayOutcome {
  bool digest_ok = false;
  bool report_identical = false;
  DeviationReport report;
};

// Rebuilds the game from the stored input and recomputes the deviation
// report for the stored profile.
ReplayOutcome replay_bundle(const ResultBundle& bundle);

}  // namespace spe
