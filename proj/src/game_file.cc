#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spe/io.h"

namespace spe {

using Json = nlohmann::ordered_json;

namespace {

std::string join_messages(const std::vector<Diagnostic>& diagnostics) {
  std::string out;
  for (const auto& d : diagnostics) {
    if (!out.empty()) out += "; ";
    out += d.location + ": " + d.message;
  }
  return out;
}

std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, column = 1;
  for (std::size_t k = 0; k < std::min(byte, text.size()); ++k) {
    if (text[k] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

class Reader {
 public:
  std::vector<Diagnostic> diagnostics;

  void error(const std::string& where, std::string message) {
    diagnostics.push_back({where.empty() ? "/" : where, std::move(message)});
  }

  bool object(const Json& v, const std::string& where,
              std::initializer_list<const char*> allowed) {
    if (!v.is_object()) {
      error(where, "expected an object");
      return false;
    }
    for (const auto& item : v.items()) {
      if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
            return item.key() == k;
          }) == allowed.end()) {
        error(where + "/" + item.key(), "unknown field '" + item.key() + "'");
      }
    }
    return true;
  }

  const Json* field(const Json& obj, const std::string& where, const char* key,
                    bool required) {
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) error(where, std::string("missing field '") + key + "'");
      return nullptr;
    }
    return &*it;
  }

  std::optional<long long> integer(const Json& v, const std::string& where) {
    if (!v.is_number_integer()) {
      error(where, "expected an integer");
      return std::nullopt;
    }
    return v.get<long long>();
  }

  std::optional<int> small_int(const Json& v, const std::string& where,
                               long long lo = 0) {
    auto x = integer(v, where);
    if (!x) return std::nullopt;
    if (*x < lo || *x > 1'000'000'000) {
      error(where, "integer " + std::to_string(*x) + " out of range");
      return std::nullopt;
    }
    return static_cast<int>(*x);
  }

  std::optional<double> number(const Json& v, const std::string& where) {
    if (!v.is_number()) {
      error(where, "expected a number");
      return std::nullopt;
    }
    return v.get<double>();
  }

  std::optional<std::string> string(const Json& v, const std::string& where) {
    if (!v.is_string()) {
      error(where, "expected a string");
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  std::optional<std::vector<double>> numbers(const Json& v, const std::string& where) {
    if (!v.is_array()) {
      error(where, "expected an array of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    bool ok = true;
    for (std::size_t k = 0; k < v.size(); ++k) {
      auto x = number(v[k], where + "/" + std::to_string(k));
      if (x) out.push_back(*x);
      ok = ok && x.has_value();
    }
    if (!ok) return std::nullopt;
    return out;
  }

  std::optional<std::vector<int>> ints(const Json& v, const std::string& where) {
    if (!v.is_array()) {
      error(where, "expected an array of integers");
      return std::nullopt;
    }
    std::vector<int> out;
    bool ok = true;
    for (std::size_t k = 0; k < v.size(); ++k) {
      auto x = small_int(v[k], where + "/" + std::to_string(k));
      if (x) out.push_back(*x);
      ok = ok && x.has_value();
    }
    if (!ok) return std::nullopt;
    return out;
  }
};

struct ConditionFields {
  bool history = false;
  bool prev_state = false;
  bool profile = false;
  bool state = false;
};

void read_condition(Reader& r, const Json& v, const std::string& where,
                    const ConditionFields& allowed, Condition& c) {
  if (const Json* h = r.field(v, where, "history", false)) {
    if (!allowed.history) {
      r.error(where + "/history", "field not allowed here");
    } else if (auto s = r.string(*h, where + "/history")) {
      try {
        History::parse(*s);
        c.history = *s;
      } catch (const std::exception& e) {
        r.error(where + "/history", e.what());
      }
    }
  }
  if (const Json* p = r.field(v, where, "prev_state", false)) {
    if (!allowed.prev_state) {
      r.error(where + "/prev_state", "field not allowed here");
    } else {
      c.prev_state = r.small_int(*p, where + "/prev_state");
    }
  }
  if (const Json* p = r.field(v, where, "profile", false)) {
    if (!allowed.profile) {
      r.error(where + "/profile", "field not allowed here");
    } else {
      c.profile = r.ints(*p, where + "/profile");
    }
  }
  if (const Json* p = r.field(v, where, "state", false)) {
    if (!allowed.state) {
      r.error(where + "/state", "field not allowed here");
    } else {
      c.state = r.small_int(*p, where + "/state");
    }
  }
}

void check_profile(Reader& r, const Condition& c, const std::vector<int>& counts,
                   const std::string& where) {
  if (!c.profile) return;
  if (c.profile->size() != counts.size()) {
    r.error(where + "/profile", "profile has " + std::to_string(c.profile->size()) +
                                    " entries for " + std::to_string(counts.size()) +
                                    " players");
    return;
  }
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if ((*c.profile)[i] >= counts[i]) {
      r.error(where + "/profile/" + std::to_string(i),
              "action " + std::to_string((*c.profile)[i]) + " outside grid of size " +
                  std::to_string(counts[i]));
    }
  }
}

StageBlock read_stage(Reader& r, const Json& v, const std::string& where, int index,
                      int players) {
  StageBlock b;
  const std::string stage_name = "stage block " + std::to_string(index + 1);
  if (!r.object(v, where, {"class", "actions", "grid", "envelope", "feasible",
                           "density", "rewards"})) {
    return b;
  }
  if (const Json* c = r.field(v, where, "class", false)) {
    if (auto s = r.string(*c, where + "/class")) {
      if (*s == "simultaneous") {
        b.kind = StageKind::kSimultaneous;
      } else if (*s == "perfect-info") {
        b.kind = StageKind::kPerfectInfo;
      } else {
        r.error(where + "/class", stage_name + ": unknown stage-class tag '" + *s +
                                      "' (expected simultaneous or perfect-info)");
      }
    }
  }
  if (const Json* a = r.field(v, where, "actions", true)) {
    if (auto counts = r.ints(*a, where + "/actions")) {
      b.actions = *counts;
      if (static_cast<int>(b.actions.size()) != players) {
        r.error(where + "/actions", stage_name + ": " + std::to_string(b.actions.size()) +
                                        " action grids for " + std::to_string(players) +
                                        " players");
      }
      for (std::size_t i = 0; i < b.actions.size(); ++i) {
        if (b.actions[i] < 1) {
          r.error(where + "/actions/" + std::to_string(i), "empty action grid");
        }
      }
    }
  }
  if (const Json* g = r.field(v, where, "grid", true)) {
    const std::string gw = where + "/grid";
    if (r.object(*g, gw, {"points", "weights"})) {
      if (const Json* p = r.field(*g, gw, "points", true)) {
        if (auto pts = r.numbers(*p, gw + "/points")) b.grid.points = *pts;
      }
      if (const Json* w = r.field(*g, gw, "weights", false)) {
        if (auto ws = r.numbers(*w, gw + "/weights")) b.grid.weights = *ws;
      } else if (!b.grid.points.empty()) {
        b.grid.weights.assign(b.grid.points.size(), 1.0 / b.grid.points.size());
      }
      if (b.grid.points.empty()) r.error(gw + "/points", "empty state grid");
      if (b.grid.weights.size() != b.grid.points.size()) {
        r.error(gw + "/weights", stage_name + ": " + std::to_string(b.grid.weights.size()) +
                                     " weights for " + std::to_string(b.grid.points.size()) +
                                     " grid points");
      }
    }
  }
  const std::size_t grid_size = b.grid.points.size();
  if (const Json* e = r.field(v, where, "envelope", false)) {
    if (auto env = r.numbers(*e, where + "/envelope")) {
      b.envelope = *env;
      if (b.envelope.size() != grid_size) {
        r.error(where + "/envelope", stage_name + ": envelope has " +
                                         std::to_string(b.envelope.size()) +
                                         " entries, grid has " + std::to_string(grid_size));
      }
    }
  }
  if (const Json* f = r.field(v, where, "feasible", false)) {
    const std::string fw = where + "/feasible";
    if (!f->is_array()) {
      r.error(fw, "expected an array");
    } else {
      for (std::size_t k = 0; k < f->size(); ++k) {
        const std::string ew = fw + "/" + std::to_string(k);
        const Json& item = (*f)[k];
        if (!r.object(item, ew, {"history", "prev_state", "actions"})) continue;
        FeasibleEntry entry;
        read_condition(r, item, ew, {true, true, false, false}, entry.when);
        if (const Json* a = r.field(item, ew, "actions", true)) {
          if (!a->is_array() || static_cast<int>(a->size()) != players) {
            r.error(ew + "/actions", "expected one action list per player");
          } else {
            for (std::size_t i = 0; i < a->size(); ++i) {
              const std::string aw = ew + "/actions/" + std::to_string(i);
              auto list = r.ints((*a)[i], aw);
              if (!list) continue;
              if (list->empty()) r.error(aw, "empty feasibility set");
              for (int x : *list) {
                if (i < b.actions.size() && x >= b.actions[i]) {
                  r.error(aw, "action " + std::to_string(x) + " outside grid of size " +
                                  std::to_string(b.actions[i]));
                }
              }
              entry.actions.push_back(*list);
            }
          }
        }
        b.feasible.push_back(std::move(entry));
      }
    }
  }
  if (const Json* d = r.field(v, where, "density", false)) {
    const std::string dw = where + "/density";
    if (!d->is_array()) {
      r.error(dw, "expected an array");
    } else {
      for (std::size_t k = 0; k < d->size(); ++k) {
        const std::string ew = dw + "/" + std::to_string(k);
        const Json& item = (*d)[k];
        if (!r.object(item, ew, {"history", "prev_state", "profile", "row"})) continue;
        DensityEntry entry;
        read_condition(r, item, ew, {true, true, true, false}, entry.when);
        check_profile(r, entry.when, b.actions, ew);
        if (const Json* row = r.field(item, ew, "row", true)) {
          if (auto values = r.numbers(*row, ew + "/row")) {
            entry.row = *values;
            if (entry.row.size() != grid_size) {
              r.error(ew + "/row", stage_name + ", density row " + std::to_string(k) +
                                       ": " + std::to_string(entry.row.size()) +
                                       " entries, grid has " +
                                       std::to_string(grid_size) + " points");
            }
            for (double x : entry.row) {
              if (x < 0.0) {
                r.error(ew + "/row", stage_name + ", density row " +
                                         std::to_string(k) + ": negative entry");
                break;
              }
            }
          }
        }
        b.density.push_back(std::move(entry));
      }
    }
  }
  if (const Json* rw = r.field(v, where, "rewards", false)) {
    const std::string pw = where + "/rewards";
    if (!rw->is_array()) {
      r.error(pw, "expected an array");
    } else {
      for (std::size_t k = 0; k < rw->size(); ++k) {
        const std::string ew = pw + "/" + std::to_string(k);
        const Json& item = (*rw)[k];
        if (!r.object(item, ew, {"history", "prev_state", "profile", "state", "value"})) {
          continue;
        }
        PayoffEntry entry;
        read_condition(r, item, ew, {true, true, true, true}, entry.when);
        check_profile(r, entry.when, b.actions, ew);
        if (entry.when.state && static_cast<std::size_t>(*entry.when.state) >= grid_size) {
          r.error(ew + "/state", "state outside grid");
        }
        if (const Json* value = r.field(item, ew, "value", true)) {
          if (auto p = r.numbers(*value, ew + "/value")) {
            entry.value = *p;
            if (static_cast<int>(p->size()) != players) {
              r.error(ew + "/value", "payoff has " + std::to_string(p->size()) +
                                         " entries for " + std::to_string(players) +
                                         " players");
            }
          }
        }
        b.rewards.push_back(std::move(entry));
      }
    }
  }
  return b;
}

GameFile read_document(Reader& r, const Json& doc) {
  GameFile f;
  if (!r.object(doc, "", {"format", "version", "name", "players", "horizon", "gamma",
                          "initial", "compression", "stages", "payoff", "solver"})) {
    return f;
  }
  if (const Json* fmt = r.field(doc, "", "format", false)) {
    auto s = r.string(*fmt, "/format");
    if (s && *s != "spe-game") r.error("/format", "expected format 'spe-game'");
  }
  if (const Json* v = r.field(doc, "", "version", true)) {
    if (auto x = r.integer(*v, "/version")) {
      if (*x != kGameFileVersion) {
        r.error("/version", "version mismatch: file has " + std::to_string(*x) +
                                ", reader supports " + std::to_string(kGameFileVersion));
        return f;
      }
    }
  } else {
    return f;
  }
  if (const Json* n = r.field(doc, "", "name", false)) {
    if (auto s = r.string(*n, "/name")) f.name = *s;
  }
  if (const Json* p = r.field(doc, "", "players", true)) {
    if (auto x = r.small_int(*p, "/players", 1)) f.players = *x;
  }
  if (const Json* h = r.field(doc, "", "horizon", true)) {
    if (!h->is_null()) f.horizon = r.small_int(*h, "/horizon", 1);
  }
  if (const Json* g = r.field(doc, "", "gamma", true)) {
    if (auto x = r.number(*g, "/gamma")) {
      f.gamma = *x;
      if (!(f.gamma > 0.0)) r.error("/gamma", "payoff bound must be positive");
    }
  }
  if (const Json* init = r.field(doc, "", "initial", false)) {
    if (!init->is_array() || init->empty()) {
      r.error("/initial", "expected a nonempty array");
    } else {
      for (std::size_t k = 0; k < init->size(); ++k) {
        const std::string w = "/initial/" + std::to_string(k);
        const Json& item = (*init)[k];
        if (!r.object(item, w, {"action", "state", "weight"})) continue;
        InitialPoint p;
        if (const Json* a = r.field(item, w, "action", false)) {
          p.action = r.small_int(*a, w + "/action").value_or(0);
        }
        if (const Json* s = r.field(item, w, "state", false)) {
          p.state = r.small_int(*s, w + "/state").value_or(0);
        }
        if (const Json* x = r.field(item, w, "weight", false)) {
          p.weight = r.number(*x, w + "/weight").value_or(1.0);
        }
        f.initial.push_back(p);
      }
    }
  } else {
    f.initial.push_back(InitialPoint{});
  }
  if (const Json* c = r.field(doc, "", "compression", false)) {
    if (auto s = r.string(*c, "/compression")) {
      if (*s == "none") {
        f.compression = Compression::kNone;
      } else if (*s == "last-state") {
        f.compression = Compression::kLastState;
      } else {
        r.error("/compression", "unknown compression '" + *s + "'");
      }
    }
  }
  if (const Json* st = r.field(doc, "", "stages", true)) {
    if (!st->is_array() || st->empty()) {
      r.error("/stages", "expected a nonempty array of stage blocks");
    } else {
      for (std::size_t k = 0; k < st->size(); ++k) {
        f.stages.push_back(read_stage(r, (*st)[k], "/stages/" + std::to_string(k),
                                      static_cast<int>(k), f.players));
      }
      if (f.horizon && static_cast<int>(f.stages.size()) != *f.horizon) {
        r.error("/stages", "horizon " + std::to_string(*f.horizon) + " needs " +
                               std::to_string(*f.horizon) + " stage blocks, found " +
                               std::to_string(f.stages.size()));
      }
    }
  }
  if (const Json* p = r.field(doc, "", "payoff", true)) {
    if (r.object(*p, "/payoff", {"type", "discount", "stage_bound", "table", "default"})) {
      std::string type;
      if (const Json* t = r.field(*p, "/payoff", "type", true)) {
        type = r.string(*t, "/payoff/type").value_or("");
      }
      if (type == "decomposed") {
        f.decomposed = true;
        if (const Json* d = r.field(*p, "/payoff", "discount", true)) {
          if (auto ds = r.numbers(*d, "/payoff/discount")) {
            f.discount = *ds;
            if (static_cast<int>(ds->size()) != f.players) {
              r.error("/payoff/discount", "one discount factor per player expected");
            }
          }
        }
        if (const Json* b = r.field(*p, "/payoff", "stage_bound", true)) {
          f.stage_bound = r.number(*b, "/payoff/stage_bound").value_or(1.0);
        }
        if (p->contains("table") || p->contains("default")) {
          r.error("/payoff", "terminal table given for decomposed payoffs");
        }
      } else if (type == "terminal") {
        if (p->contains("discount") || p->contains("stage_bound")) {
          r.error("/payoff", "discounting given for terminal payoffs");
        }
        if (const Json* t = r.field(*p, "/payoff", "table", false)) {
          if (!t->is_array()) {
            r.error("/payoff/table", "expected an array");
          } else {
            for (std::size_t k = 0; k < t->size(); ++k) {
              const std::string w = "/payoff/table/" + std::to_string(k);
              const Json& item = (*t)[k];
              if (!r.object(item, w, {"history", "value"})) continue;
              PayoffEntry e;
              read_condition(r, item, w, {true, false, false, false}, e.when);
              if (!e.when.history) r.error(w, "missing field 'history'");
              if (const Json* v = r.field(item, w, "value", true)) {
                e.value = r.numbers(*v, w + "/value").value_or(Payoff{});
                if (static_cast<int>(e.value.size()) != f.players) {
                  r.error(w + "/value", "payoff has " + std::to_string(e.value.size()) +
                                            " entries for " + std::to_string(f.players) +
                                            " players");
                }
              }
              f.terminal.push_back(std::move(e));
            }
          }
        }
        if (const Json* d = r.field(*p, "/payoff", "default", false)) {
          f.terminal_default = r.numbers(*d, "/payoff/default");
          if (f.terminal_default &&
              static_cast<int>(f.terminal_default->size()) != f.players) {
            r.error("/payoff/default", "default payoff arity differs from player count");
          }
        }
        if (f.terminal.empty() && !f.terminal_default) {
          r.error("/payoff", "terminal payoffs need a table or a default");
        }
      } else if (!type.empty()) {
        r.error("/payoff/type", "unknown payoff type '" + type +
                                    "' (expected terminal or decomposed)");
      }
    }
  }
  if (!f.decomposed) {
    for (std::size_t k = 0; k < f.stages.size(); ++k) {
      if (!f.stages[k].rewards.empty()) {
        r.error("/stages/" + std::to_string(k) + "/rewards",
                "stage rewards need decomposed payoffs");
      }
    }
  }
  if (f.compression == Compression::kLastState) {
    for (std::size_t k = 0; k < f.stages.size(); ++k) {
      const StageBlock& b = f.stages[k];
      const std::string w = "/stages/" + std::to_string(k);
      auto flag = [&](const Condition& c, const std::string& where) {
        if (c.history) {
          r.error(where + "/history",
                  "history-keyed entries are not allowed with last-state compression");
        }
      };
      for (std::size_t j = 0; j < b.feasible.size(); ++j) {
        flag(b.feasible[j].when, w + "/feasible/" + std::to_string(j));
      }
      for (std::size_t j = 0; j < b.density.size(); ++j) {
        flag(b.density[j].when, w + "/density/" + std::to_string(j));
      }
      for (std::size_t j = 0; j < b.rewards.size(); ++j) {
        flag(b.rewards[j].when, w + "/rewards/" + std::to_string(j));
      }
    }
  }
  if (const Json* s = r.field(doc, "", "solver", false)) {
    const std::string w = "/solver";
    if (r.object(*s, w, {"epsilon", "prune_eps", "selection_cap", "value_cap",
                         "minkowski_cap", "seed", "punishment"})) {
      auto count = [&](const char* key, std::optional<std::size_t>& out) {
        if (const Json* v = r.field(*s, w, key, false)) {
          if (auto x = r.integer(*v, w + "/" + key)) {
            if (*x < 0) {
              r.error(w + "/" + key, "must be nonnegative");
            } else {
              out = static_cast<std::size_t>(*x);
            }
          }
        }
      };
      if (const Json* v = r.field(*s, w, "epsilon", false)) {
        f.solver.epsilon = r.number(*v, w + "/epsilon");
        if (f.solver.epsilon && !(*f.solver.epsilon > 0.0)) {
          r.error(w + "/epsilon", "must be positive");
        }
      }
      if (const Json* v = r.field(*s, w, "prune_eps", false)) {
        f.solver.prune_eps = r.number(*v, w + "/prune_eps");
      }
      count("selection_cap", f.solver.selection_cap);
      count("value_cap", f.solver.value_cap);
      count("minkowski_cap", f.solver.minkowski_cap);
      if (const Json* v = r.field(*s, w, "seed", false)) {
        if (!v->is_number_unsigned()) {
          r.error(w + "/seed", "expected a nonnegative integer");
        } else {
          f.solver.seed = v->get<std::uint64_t>();
        }
      }
      if (const Json* v = r.field(*s, w, "punishment", false)) {
        if (!v->is_boolean()) {
          r.error(w + "/punishment", "expected true or false");
        } else {
          f.solver.punishment = v->get<bool>();
        }
      }
    }
  }
  return f;
}

Json write_condition(const Condition& c) {
  Json j = Json::object();
  if (c.history) j["history"] = *c.history;
  if (c.prev_state) j["prev_state"] = *c.prev_state;
  if (c.profile) j["profile"] = *c.profile;
  if (c.state) j["state"] = *c.state;
  return j;
}

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw GameFileError(line_column(text, e.byte), e.what());
  }
}

// Entry lookup by most specific matching condition.
struct CompiledCondition {
  std::optional<History> history;
  std::optional<int> prev_state;
  std::optional<ActionProfile> profile;
  std::optional<int> state;
  int specificity = 0;
};

CompiledCondition compile(const Condition& c) {
  CompiledCondition out;
  if (c.history) out.history = History::parse(*c.history);
  out.prev_state = c.prev_state;
  out.profile = c.profile;
  out.state = c.state;
  out.specificity = c.history.has_value() + c.prev_state.has_value() +
                    c.profile.has_value() + c.state.has_value();
  return out;
}

template <class T>
struct Table {
  std::vector<CompiledCondition> when;
  std::vector<T> values;

  const T* find(const History& prev, int prev_state, const ActionProfile* x,
                int s) const {
    const T* best = nullptr;
    int best_spec = -1;
    for (std::size_t k = 0; k < when.size(); ++k) {
      const auto& c = when[k];
      if (c.history && *c.history != prev) continue;
      if (c.prev_state && *c.prev_state != prev_state) continue;
      if (c.profile && (!x || *c.profile != *x)) continue;
      if (c.state && *c.state != s) continue;
      if (c.specificity > best_spec) {
        best = &values[k];
        best_spec = c.specificity;
      }
    }
    return best;
  }
};

struct CompiledStage {
  Table<std::vector<std::vector<int>>> feasible;
  Table<std::vector<double>> density;
  Table<Payoff> rewards;
};

}  // namespace

GameFileError::GameFileError(std::vector<Diagnostic> diagnostics)
    : std::runtime_error(join_messages(diagnostics)),
      diagnostics_(std::move(diagnostics)) {}

GameFile parse_game_file(const std::string& text) {
  Json doc = parse_json(text);
  Reader r;
  GameFile f = read_document(r, doc);
  if (!r.diagnostics.empty()) throw GameFileError(std::move(r.diagnostics));
  return f;
}

GameFile read_game_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw GameFileError(path.string(), "cannot open file");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_game_file(buffer.str());
}

std::string serialize_game_file(const GameFile& f) {
  Json doc;
  doc["format"] = "spe-game";
  doc["version"] = f.version;
  doc["name"] = f.name;
  doc["players"] = f.players;
  doc["horizon"] = f.horizon ? Json(*f.horizon) : Json(nullptr);
  doc["gamma"] = f.gamma;
  Json init = Json::array();
  for (const auto& p : f.initial) {
    init.push_back({{"action", p.action}, {"state", p.state}, {"weight", p.weight}});
  }
  doc["initial"] = init;
  doc["compression"] = f.compression == Compression::kLastState ? "last-state" : "none";
  Json stages = Json::array();
  for (const auto& b : f.stages) {
    Json s;
    s["class"] = b.kind == StageKind::kPerfectInfo ? "perfect-info" : "simultaneous";
    s["actions"] = b.actions;
    s["grid"] = {{"points", b.grid.points}, {"weights", b.grid.weights}};
    if (!b.envelope.empty()) s["envelope"] = b.envelope;
    if (!b.feasible.empty()) {
      Json arr = Json::array();
      for (const auto& e : b.feasible) {
        Json j = write_condition(e.when);
        j["actions"] = e.actions;
        arr.push_back(j);
      }
      s["feasible"] = arr;
    }
    if (!b.density.empty()) {
      Json arr = Json::array();
      for (const auto& e : b.density) {
        Json j = write_condition(e.when);
        j["row"] = e.row;
        arr.push_back(j);
      }
      s["density"] = arr;
    }
    if (!b.rewards.empty()) {
      Json arr = Json::array();
      for (const auto& e : b.rewards) {
        Json j = write_condition(e.when);
        j["value"] = e.value;
        arr.push_back(j);
      }
      s["rewards"] = arr;
    }
    stages.push_back(s);
  }
  doc["stages"] = stages;
  Json payoff;
  if (f.decomposed) {
    payoff["type"] = "decomposed";
    payoff["discount"] = f.discount;
    payoff["stage_bound"] = f.stage_bound;
  } else {
    payoff["type"] = "terminal";
    Json table = Json::array();
    for (const auto& e : f.terminal) {
      Json j = write_condition(e.when);
      j["value"] = e.value;
      table.push_back(j);
    }
    payoff["table"] = table;
    if (f.terminal_default) payoff["default"] = *f.terminal_default;
  }
  doc["payoff"] = payoff;
  Json solver = Json::object();
  if (f.solver.epsilon) solver["epsilon"] = *f.solver.epsilon;
  if (f.solver.prune_eps) solver["prune_eps"] = *f.solver.prune_eps;
  if (f.solver.selection_cap) solver["selection_cap"] = *f.solver.selection_cap;
  if (f.solver.value_cap) solver["value_cap"] = *f.solver.value_cap;
  if (f.solver.minkowski_cap) solver["minkowski_cap"] = *f.solver.minkowski_cap;
  if (f.solver.seed) solver["seed"] = *f.solver.seed;
  if (f.solver.punishment) solver["punishment"] = *f.solver.punishment;
  doc["solver"] = solver;
  return doc.dump(2) + "\n";
}

GameSpec to_game_spec(const GameFile& f) {
  std::vector<Diagnostic> problems;
  auto compiled = std::make_shared<std::vector<CompiledStage>>();
  auto terminal = std::make_shared<Table<Payoff>>();
  try {
    for (const auto& b : f.stages) {
      CompiledStage c;
      for (const auto& e : b.feasible) {
        c.feasible.when.push_back(compile(e.when));
        c.feasible.values.push_back(e.actions);
      }
      for (const auto& e : b.density) {
        c.density.when.push_back(compile(e.when));
        c.density.values.push_back(e.row);
      }
      for (const auto& e : b.rewards) {
        c.rewards.when.push_back(compile(e.when));
        c.rewards.values.push_back(e.value);
      }
      compiled->push_back(std::move(c));
    }
    for (const auto& e : f.terminal) {
      terminal->when.push_back(compile(e.when));
      terminal->values.push_back(e.value);
    }
  } catch (const std::invalid_argument& e) {
    throw GameFileError("/", e.what());
  }

  GameSpec spec;
  spec.name = f.name;
  spec.players = f.players;
  spec.horizon = f.horizon;
  spec.initial = f.initial;
  spec.gamma = f.gamma;
  for (const auto& b : f.stages) {
    StageSpec st;
    st.action_counts = b.actions;
    st.grid = b.grid;
    st.declared = b.kind;
    st.envelope = b.envelope;
    spec.stages.push_back(std::move(st));
  }
  const auto initial = f.initial;
  auto last_state = [initial](const History& h) {
    return h.states.empty() ? initial.at(h.initial).state : h.states.back();
  };
  const std::size_t cycle = f.stages.size();
  auto block = [compiled, cycle](int t) -> const CompiledStage& {
    return (*compiled)[(t - 1) % cycle];
  };
  bool any_feasible = false, any_density = false;
  for (const auto& b : f.stages) {
    any_feasible = any_feasible || !b.feasible.empty();
    any_density = any_density || !b.density.empty();
  }
  const std::vector<StageBlock> blocks = f.stages;
  if (any_feasible) {
    spec.feasible = [block, last_state, blocks, cycle](int t, int player,
                                                       const History& prev) {
      if (auto* hit = block(t).feasible.find(prev, last_state(prev), nullptr, -1)) {
        return (*hit)[player];
      }
      std::vector<int> all(blocks[(t - 1) % cycle].actions[player]);
      for (std::size_t a = 0; a < all.size(); ++a) all[a] = static_cast<int>(a);
      return all;
    };
  }
  if (any_density) {
    spec.density = [block, last_state, blocks, cycle](int t, const History& prev,
                                                      const ActionProfile& x) {
      if (auto* hit = block(t).density.find(prev, last_state(prev), &x, -1)) {
        return *hit;
      }
      return std::vector<double>(blocks[(t - 1) % cycle].grid.size(), 1.0);
    };
  }
  const int players = f.players;
  if (f.decomposed) {
    DecomposedPayoff d;
    d.discount = f.discount;
    d.stage_bound = f.stage_bound;
    d.stage = [block, last_state, players](int t, const History& prev,
                                           const ActionProfile& x, int s) {
      if (auto* hit = block(t).rewards.find(prev, last_state(prev), &x, s)) return *hit;
      return Payoff(players, 0.0);
    };
    spec.payoff = d;
  } else {
    const auto fallback = f.terminal_default;
    spec.payoff = TerminalPayoffFn([terminal, fallback](const History& h) {
      if (auto* hit = terminal->find(h, -1, nullptr, -1)) return *hit;
      if (fallback) return *fallback;
      throw std::out_of_range("no terminal payoff for history " + h.label());
    });
  }
  if (f.compression == Compression::kLastState) {
    spec.markov_key = [last_state](int, const History& h) -> std::int64_t {
      return last_state(h);
    };
  }
  return spec;
}

SolverOptions solver_options(const SolverSection& s) {
  SolverOptions o;
  if (s.prune_eps) o.prune_eps = *s.prune_eps;
  if (s.selection_cap) o.selection_cap = *s.selection_cap;
  if (s.value_cap) o.value_cap = *s.value_cap;
  if (s.minkowski_cap) o.minkowski_cap = *s.minkowski_cap;
  if (s.seed) o.seed = *s.seed;
  if (s.punishment) o.punishment = *s.punishment;
  return o;
}

OligopolyParams parse_oligopoly_params(const std::string& text) {
  Json doc = parse_json(text);
  Reader r;
  OligopolyParams p;
  if (!r.object(doc, "", {"format", "version", "firms", "a", "b", "theta", "costs",
                          "discount", "shock_low", "shock_high", "shock_points",
                          "shock_law", "outputs", "horizon"})) {
    throw GameFileError(std::move(r.diagnostics));
  }
  if (const Json* fmt = r.field(doc, "", "format", false)) {
    auto s = r.string(*fmt, "/format");
    if (s && *s != "spe-oligopoly") r.error("/format", "expected format 'spe-oligopoly'");
  }
  if (const Json* v = r.field(doc, "", "version", true)) {
    if (auto x = r.integer(*v, "/version"); x && *x != kGameFileVersion) {
      r.error("/version", "version mismatch: file has " + std::to_string(*x) +
                              ", reader supports " + std::to_string(kGameFileVersion));
    }
  }
  auto num = [&](const char* key, double& out) {
    if (const Json* v = r.field(doc, "", key, false)) {
      if (auto x = r.number(*v, std::string("/") + key)) out = *x;
    }
  };
  if (const Json* v = r.field(doc, "", "firms", false)) {
    p.firms = r.small_int(*v, "/firms", 1).value_or(p.firms);
  }
  num("a", p.a);
  num("b", p.b);
  num("theta", p.theta);
  num("shock_low", p.shock_low);
  num("shock_high", p.shock_high);
  if (const Json* v = r.field(doc, "", "costs", false)) {
    p.costs = r.numbers(*v, "/costs").value_or(p.costs);
  }
  if (const Json* v = r.field(doc, "", "discount", false)) {
    p.discount = r.numbers(*v, "/discount").value_or(p.discount);
  }
  if (const Json* v = r.field(doc, "", "outputs", false)) {
    p.outputs = r.numbers(*v, "/outputs").value_or(p.outputs);
  }
  if (const Json* v = r.field(doc, "", "shock_points", false)) {
    p.shock_points = r.small_int(*v, "/shock_points", 1).value_or(p.shock_points);
  }
  if (const Json* v = r.field(doc, "", "shock_law", false)) {
    if (auto s = r.string(*v, "/shock_law")) {
      if (*s == "uniform") {
        p.law = ShockLaw::kUniform;
      } else if (*s == "triangular") {
        p.law = ShockLaw::kTriangular;
      } else {
        r.error("/shock_law", "unknown shock law '" + *s + "'");
      }
    }
  }
  if (const Json* v = r.field(doc, "", "horizon", false)) {
    if (v->is_null()) {
      p.horizon.reset();
    } else {
      p.horizon = r.small_int(*v, "/horizon", 1);
    }
  }
  if (!r.diagnostics.empty()) throw GameFileError(std::move(r.diagnostics));
  return p;
}

std::string serialize_oligopoly_params(const OligopolyParams& p) {
  Json doc;
  doc["format"] = "spe-oligopoly";
  doc["version"] = kGameFileVersion;
  doc["firms"] = p.firms;
  doc["a"] = p.a;
  doc["b"] = p.b;
  doc["theta"] = p.theta;
  doc["costs"] = p.costs;
  doc["discount"] = p.discount;
  doc["shock_low"] = p.shock_low;
  doc["shock_high"] = p.shock_high;
  doc["shock_points"] = p.shock_points;
  doc["shock_law"] = p.law == ShockLaw::kTriangular ? "triangular" : "uniform";
  doc["outputs"] = p.outputs;
  doc["horizon"] = p.horizon ? Json(*p.horizon) : Json(nullptr);
  return doc.dump(2) + "\n";
}

}  // namespace spe
