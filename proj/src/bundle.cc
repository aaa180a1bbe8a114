#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "spe/io.h"

namespace spe {

using Json = nlohmann::ordered_json;

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream out;
  for (unsigned int k = 0; k < length; ++k) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[k]);
  }
  return out.str();
}

namespace {

Json options_json(const SolverOptions& o) {
  return {{"prune_eps", o.prune_eps},
          {"selection_cap", o.selection_cap},
          {"minkowski_cap", o.minkowski_cap},
          {"value_cap", o.value_cap},
          {"nash_epsilon", o.nash_epsilon},
          {"exact_tolerance", o.exact_tolerance},
          {"seed", o.seed},
          {"punishment", o.punishment}};
}

SolverOptions options_from(const Json& j) {
  SolverOptions o;
  o.prune_eps = j.at("prune_eps").get<double>();
  o.selection_cap = j.at("selection_cap").get<std::size_t>();
  o.minkowski_cap = j.at("minkowski_cap").get<std::size_t>();
  o.value_cap = j.at("value_cap").get<std::size_t>();
  o.nash_epsilon = j.at("nash_epsilon").get<double>();
  o.exact_tolerance = j.at("exact_tolerance").get<double>();
  o.seed = j.at("seed").get<std::uint64_t>();
  o.punishment = j.at("punishment").get<bool>();
  return o;
}

Json stats_json(const SolveStats& s) {
  return {{"nodes", s.nodes},
          {"selections", s.selections},
          {"witnesses", s.witnesses},
          {"unexplored", s.unexplored},
          {"capped_nodes", s.capped_nodes},
          {"nash_failures", s.nash_failures},
          {"hausdorff_error", s.hausdorff_error}};
}

SolveStats stats_from(const Json& j) {
  SolveStats s;
  s.nodes = j.at("nodes").get<std::uint64_t>();
  s.selections = j.at("selections").get<std::uint64_t>();
  s.witnesses = j.at("witnesses").get<std::uint64_t>();
  s.unexplored = j.at("unexplored").get<std::uint64_t>();
  s.capped_nodes = j.at("capped_nodes").get<std::uint64_t>();
  s.nash_failures = j.at("nash_failures").get<std::uint64_t>();
  s.hausdorff_error = j.at("hausdorff_error").get<double>();
  return s;
}

Json report_json(const DeviationReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"stage", e.stage},
                       {"history", e.history.label()},
                       {"player", e.player},
                       {"value", e.value},
                       {"best_deviation", e.best_deviation},
                       {"best_action", e.best_action},
                       {"regret", e.regret}});
  }
  return {{"epsilon", r.epsilon},
          {"max_regret", r.max_regret},
          {"violations", r.violations},
          {"entries", entries}};
}

DeviationReport report_from(const Json& j) {
  DeviationReport r;
  r.epsilon = j.at("epsilon").get<double>();
  r.max_regret = j.at("max_regret").get<double>();
  r.violations = j.at("violations").get<std::size_t>();
  for (const auto& e : j.at("entries")) {
    DeviationEntry d;
    d.stage = e.at("stage").get<int>();
    d.history = History::parse(e.at("history").get<std::string>());
    d.player = e.at("player").get<int>();
    d.value = e.at("value").get<double>();
    d.best_deviation = e.at("best_deviation").get<double>();
    d.best_action = e.at("best_action").get<int>();
    d.regret = e.at("regret").get<double>();
    r.entries.push_back(std::move(d));
  }
  return r;
}

Json certificate_json(const InfiniteCertificate& c) {
  return {{"epsilon", c.epsilon},
          {"truncation", c.truncation},
          {"evaluated", c.evaluated},
          {"truncation_tail", c.truncation_tail},
          {"evaluation_tail", c.evaluation_tail},
          {"max_regret", c.max_regret},
          {"bound", c.bound},
          {"verified", c.verified}};
}

InfiniteCertificate certificate_from(const Json& j) {
  InfiniteCertificate c;
  c.epsilon = j.at("epsilon").get<double>();
  c.truncation = j.at("truncation").get<int>();
  c.evaluated = j.at("evaluated").get<int>();
  c.truncation_tail = j.at("truncation_tail").get<double>();
  c.evaluation_tail = j.at("evaluation_tail").get<double>();
  c.max_regret = j.at("max_regret").get<double>();
  c.bound = j.at("bound").get<double>();
  c.verified = j.at("verified").get<bool>();
  return c;
}

Json profile_json(const StrategyProfile& f) {
  Json points = Json::array();
  for (const auto& p : f.points) {
    points.push_back({{"stage", p.t},
                      {"history", p.rep.label()},
                      {"feasible", p.feasible},
                      {"states", p.states}});
  }
  Json states = Json::array();
  for (const auto& s : f.states) {
    states.push_back({{"point", s.point},
                      {"node", s.node},
                      {"witness", s.witness},
                      {"play", s.play},
                      {"next", s.next},
                      {"promised", s.promised}});
  }
  return {{"players", f.players},
          {"horizon", f.horizon},
          {"roots", f.roots},
          {"points", points},
          {"states", states}};
}

StrategyProfile profile_from(const Json& j) {
  StrategyProfile f;
  f.players = j.at("players").get<int>();
  f.horizon = j.at("horizon").get<int>();
  f.roots = j.at("roots").get<std::vector<int>>();
  for (const auto& p : j.at("points")) {
    DecisionPoint d;
    d.t = p.at("stage").get<int>();
    d.rep = History::parse(p.at("history").get<std::string>());
    d.feasible = p.at("feasible").get<std::vector<std::vector<int>>>();
    d.profiles = profile_product(d.feasible);
    d.states = p.at("states").get<int>();
    f.points.push_back(std::move(d));
  }
  for (const auto& s : j.at("states")) {
    StrategyState st;
    st.point = s.at("point").get<int>();
    st.node = s.at("node").get<int>();
    st.witness = s.at("witness").get<int>();
    st.play = s.at("play").get<MixedProfile>();
    st.next = s.at("next").get<std::vector<int>>();
    st.promised = s.at("promised").get<Payoff>();
    f.states.push_back(std::move(st));
  }
  return f;
}

Json correspondence_json(const ResultBundle& b) {
  const auto& e = b.correspondence;
  Json stages = Json::array();
  for (std::size_t t = 0; t < e.stages.size(); ++t) {
    Json nodes = Json::array();
    for (std::size_t k = 0; k < e.stages[t].size(); ++k) {
      const NodeSolution& n = e.stages[t][k];
      Json witnesses = Json::array();
      for (const auto& w : n.witnesses) {
        witnesses.push_back({{"value", w.value},
                             {"alpha", w.alpha},
                             {"selection", w.selection},
                             {"links", w.links},
                             {"regret", w.regret}});
      }
      nodes.push_back({{"history", b.node_histories.at(t).at(k)},
                       {"values", n.values.points},
                       {"unexplored", n.unexplored},
                       {"nash_failures", n.nash_failures},
                       {"hausdorff_error", n.hausdorff_error},
                       {"witnesses", witnesses}});
    }
    stages.push_back({{"stage", t + 1}, {"nodes", nodes}});
  }
  Json terminal = Json::array();
  for (const auto& s : e.terminal) terminal.push_back(s.points);
  return {{"myopic_from", e.myopic_from}, {"stages", stages}, {"terminal", terminal}};
}

void correspondence_from(const Json& j, ResultBundle& b) {
  auto& e = b.correspondence;
  e.myopic_from = j.at("myopic_from").get<int>();
  for (const auto& stage : j.at("stages")) {
    std::vector<NodeSolution> nodes;
    std::vector<std::string> labels;
    for (const auto& n : stage.at("nodes")) {
      NodeSolution s;
      labels.push_back(n.at("history").get<std::string>());
      s.values.points = n.at("values").get<std::vector<Payoff>>();
      s.unexplored = n.at("unexplored").get<std::uint64_t>();
      s.nash_failures = n.at("nash_failures").get<int>();
      s.hausdorff_error = n.at("hausdorff_error").get<double>();
      for (const auto& w : n.at("witnesses")) {
        WitnessRecord r;
        r.value = w.at("value").get<Payoff>();
        r.alpha = w.at("alpha").get<MixedProfile>();
        r.selection = w.at("selection").get<std::vector<int>>();
        r.links = w.at("links").get<std::vector<int>>();
        r.regret = w.at("regret").get<double>();
        s.witnesses.push_back(std::move(r));
      }
      nodes.push_back(std::move(s));
    }
    e.stages.push_back(std::move(nodes));
    b.node_histories.push_back(std::move(labels));
  }
  for (const auto& s : j.at("terminal")) {
    e.terminal.push_back(PayoffSet{s.get<std::vector<Payoff>>()});
  }
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error(path.string() + ": " + std::strerror(errno));
  }
  out << content;
  out.flush();
  if (!out) {
    throw std::runtime_error(path.string() + ": " + std::strerror(errno));
  }
}

}  // namespace

ResultBundle solve_game_file(const GameFile& file, double epsilon,
                             const SolverOptions& options) {
  ResultBundle b;
  b.input = serialize_game_file(file);
  b.input_digest = sha256_hex(b.input);
  b.epsilon = epsilon;
  b.seed = options.seed;
  const auto start = std::chrono::steady_clock::now();
  ValidatedGame game = validate_spec(to_game_spec(file));
  if (file.horizon) {
    b.correspondence = backward_solve(game, options);
    b.profile = forward_extract(b.correspondence);
  } else {
    InfiniteOptions io;
    io.solver = options;
    InfiniteSolution sol = solve_infinite(game, epsilon, io);
    b.correspondence = std::move(sol.correspondence);
    b.profile = std::move(sol.profile);
    b.certificate = sol.certificate;
  }
  b.report = one_step_deviation_check(game.spec(), b.profile, epsilon);
  const StageGraph& graph = *b.correspondence.graph;
  for (int t = 1; t <= graph.horizon(); ++t) {
    std::vector<std::string> labels;
    for (std::size_t k = 0; k < graph.nodes(t).size(); ++k) {
      labels.push_back(graph.history(t, static_cast<int>(k)).label());
    }
    b.node_histories.push_back(std::move(labels));
  }
  for (std::size_t k = 0; k < game.spec().initial.size(); ++k) {
    b.root_sets.push_back(b.correspondence.root_set(static_cast<int>(k)));
  }
  b.counters.stats = b.correspondence.stats;
  b.counters.strategy_states = b.profile.states.size();
  b.counters.deviation_entries = b.report.entries.size();
  b.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                       .count();
  return b;
}

std::string bundle_to_json(const ResultBundle& b) {
  Json doc;
  doc["format"] = "spe-bundle";
  doc["version"] = b.version;
  Json index = Json::array();
  auto record = [&](const char* name, const char* content) {
    index.push_back({{"record", name}, {"content", content}});
  };
  record("input", "canonical game file text and its sha256 digest");
  record("run", "epsilon, seed and solver options");
  record("roots", "equilibrium payoff set per initial point");
  record("correspondence", "per-stage payoff sets with witnesses");
  record("profile", "extracted strategy automaton");
  record("deviation_report", "one-step deviation check of the profile");
  if (b.certificate) record("certificate", "infinite-horizon truncation certificate");
  record("counters", "deterministic work counters");
  doc["index"] = index;
  doc["input"] = {{"digest", b.input_digest}, {"document", b.input}};
  doc["run"] = {{"epsilon", b.epsilon},
                {"seed", b.seed},
                {"solver", options_json(b.correspondence.options)}};
  Json roots = Json::array();
  for (const auto& s : b.root_sets) roots.push_back(s.points);
  doc["roots"] = roots;
  doc["correspondence"] = correspondence_json(b);
  doc["profile"] = profile_json(b.profile);
  doc["deviation_report"] = report_json(b.report);
  if (b.certificate) doc["certificate"] = certificate_json(*b.certificate);
  Json counters = stats_json(b.counters.stats);
  counters["strategy_states"] = b.counters.strategy_states;
  counters["deviation_entries"] = b.counters.deviation_entries;
  doc["counters"] = counters;
  return doc.dump() + "\n";
}

ResultBundle bundle_from_json(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw GameFileError("bundle", e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "spe-bundle") {
      throw GameFileError("/format", "not a result bundle");
    }
    const int version = doc.at("version").get<int>();
    if (version != kBundleVersion) {
      throw GameFileError("/version", "version mismatch: bundle has " +
                                            std::to_string(version) + ", reader supports " +
                                            std::to_string(kBundleVersion));
    }
    ResultBundle b;
    b.version = version;
    b.input_digest = doc.at("input").at("digest").get<std::string>();
    b.input = doc.at("input").at("document").get<std::string>();
    b.epsilon = doc.at("run").at("epsilon").get<double>();
    b.seed = doc.at("run").at("seed").get<std::uint64_t>();
    b.correspondence.options = options_from(doc.at("run").at("solver"));
    for (const auto& s : doc.at("roots")) {
      b.root_sets.push_back(PayoffSet{s.get<std::vector<Payoff>>()});
    }
    correspondence_from(doc.at("correspondence"), b);
    b.profile = profile_from(doc.at("profile"));
    b.report = report_from(doc.at("deviation_report"));
    if (doc.contains("certificate")) b.certificate = certificate_from(doc["certificate"]);
    const Json& c = doc.at("counters");
    b.counters.stats = stats_from(c);
    b.correspondence.stats = b.counters.stats;
    b.counters.strategy_states = c.at("strategy_states").get<std::uint64_t>();
    b.counters.deviation_entries = c.at("deviation_entries").get<std::uint64_t>();
    return b;
  } catch (const Json::exception& e) {
    throw GameFileError("bundle", e.what());
  } catch (const std::invalid_argument& e) {
    throw GameFileError("bundle", e.what());
  }
}

void write_root_table(std::ostream& out, const ResultBundle& b) {
  const int n = b.profile.players;
  out << "initial\tpoint";
  for (int i = 1; i <= n; ++i) out << "\tu" << i;
  out << "\n" << std::setprecision(17);
  for (std::size_t k = 0; k < b.root_sets.size(); ++k) {
    for (std::size_t j = 0; j < b.root_sets[k].points.size(); ++j) {
      out << k << '\t' << j;
      for (double v : b.root_sets[k].points[j]) out << '\t' << v;
      out << '\n';
    }
  }
}

void write_strategy_table(std::ostream& out, const StrategyProfile& f) {
  out << "state\tstage\thistory\tplayer\taction\tprobability\n" << std::setprecision(17);
  for (std::size_t k = 0; k < f.states.size(); ++k) {
    const StrategyState& s = f.states[k];
    const DecisionPoint& p = f.point(s);
    for (int i = 0; i < f.players; ++i) {
      for (std::size_t a = 0; a < p.feasible[i].size(); ++a) {
        out << k << '\t' << p.t << '\t' << p.rep.label() << '\t' << i + 1 << '\t'
            << p.feasible[i][a] << '\t' << s.play[i][a] << '\n';
      }
    }
  }
}

EmittedFiles emit_results(const ResultBundle& b, EmitFormat format,
                          const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error(dir.string() + ": " + ec.message());
  EmittedFiles files;
  auto emit = [&](const char* name, const std::string& content) {
    const auto path = dir / name;
    write_file(path, content);
    files.paths.push_back(path);
  };
  if (format == EmitFormat::kTable || format == EmitFormat::kBoth) {
    std::ostringstream roots, strategy, deviations;
    write_root_table(roots, b);
    write_strategy_table(strategy, b.profile);
    write_deviation_table(deviations, b.report);
    emit("root_set.tsv", roots.str());
    emit("strategy.tsv", strategy.str());
    emit("deviations.tsv", deviations.str());
  }
  if (format == EmitFormat::kBundle || format == EmitFormat::kBoth) {
    emit("bundle.json", bundle_to_json(b));
    Json timing = {{"input_digest", b.input_digest}, {"wall_seconds", b.wall_seconds}};
    emit("timing.json", timing.dump(2) + "\n");
  }
  return files;
}

ReplayOutcome replay_bundle(const ResultBundle& b) {
  ReplayOutcome out;
  out.digest_ok = sha256_hex(b.input) == b.input_digest;
  GameFile file = parse_game_file(b.input);
  ValidatedGame game = validate_spec(to_game_spec(file));
  out.report = one_step_deviation_check(game.spec(), b.profile, b.epsilon);
  out.report_identical = report_json(out.report) == report_json(b.report);
  return out;
}

}  // namespace spe
