#include "chemlab/fsm.hpp"

#include <deque>

namespace chemlab::fsm {

const StateId* StateMachine::next_state(const StateId& from,
                                        const SymbolId& symbol) const {
  auto row = transitions.find(from);
  if (row == transitions.end()) return nullptr;
  auto cell = row->second.find(symbol);
  if (cell == row->second.end()) return nullptr;
  return &cell->second;
}

nlohmann::json StateMachine::to_json() const {
  nlohmann::json trans(nlohmann::json::value_t::object);
  for (const auto& [from, row] : transitions) {
    nlohmann::json cells(nlohmann::json::value_t::object);
    for (const auto& [symbol, to] : row) cells[symbol] = to;
    trans[from] = std::move(cells);
  }
  return nlohmann::json{
      {"states", states},
      {"input_symbols", symbols},
      {"initial_state", initial},
      {"accepting_states", accepting},
      {"transitions", std::move(trans)},
  };
}

namespace {

const nlohmann::json& expect(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw SchemaViolation(key);
  return *it;
}

std::set<std::string> string_set(const nlohmann::json& j, const char* key) {
  if (!j.is_array()) throw SchemaViolation(key);
  std::set<std::string> out;
  for (const auto& item : j) {
    if (!item.is_string()) throw SchemaViolation(key);
    out.insert(item.get<std::string>());
  }
  return out;
}

}  // namespace

StateMachine StateMachine::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaViolation("state_machine");
  StateMachine m;
  m.states = string_set(expect(j, "states"), "states");
  m.symbols = string_set(expect(j, "input_symbols"), "input_symbols");
  const auto& init = expect(j, "initial_state");
  if (!init.is_string()) throw SchemaViolation("initial_state");
  m.initial = init.get<std::string>();
  m.accepting =
      string_set(expect(j, "accepting_states"), "accepting_states");
  const auto& trans = expect(j, "transitions");
  if (!trans.is_object()) throw SchemaViolation("transitions");
  for (const auto& [from, row] : trans.items()) {
    if (!row.is_object()) throw SchemaViolation("transitions");
    for (const auto& [symbol, to] : row.items()) {
      if (!to.is_string()) throw SchemaViolation("transitions");
      m.transitions[from][symbol] = to.get<std::string>();
    }
  }
  return m;
}

StateId MachineCursor::step(const SymbolId& symbol, double timestamp,
                            const std::string& emitter) {
  if (!history_.empty() && timestamp < history_.back().timestamp) {
    throw Error("transition timestamp regressed: " +
                std::to_string(timestamp));
  }
  const StateId* to = machine_->next_state(current_, symbol);
  if (to == nullptr) throw UndefinedTransition(current_, symbol);
  history_.push_back({current_, symbol, *to, timestamp, emitter});
  current_ = *to;
  return current_;
}

std::vector<Diagnostic> validate(const StateMachine& m) {
  std::vector<Diagnostic> out;
  if (m.states.count(m.initial) == 0) {
    out.push_back({"dangling_initial",
                   "initial state '" + m.initial + "' not in Q"});
  }
  for (const auto& s : m.accepting) {
    if (m.states.count(s) == 0) {
      out.push_back({"dangling_accepting",
                     "accepting state '" + s + "' not in Q"});
    }
  }
  for (const auto& [from, row] : m.transitions) {
    if (m.states.count(from) == 0) {
      out.push_back({"dangling_state",
                     "transition source '" + from + "' not in Q"});
    }
    for (const auto& [symbol, to] : row) {
      if (m.symbols.count(symbol) == 0) {
        out.push_back({"dangling_symbol",
                       "transition symbol '" + symbol + "' not in Sigma"});
      }
      if (m.states.count(to) == 0) {
        out.push_back({"dangling_state",
                       "transition target '" + to + "' not in Q"});
      }
    }
  }

  // Reachability from q0 over declared states only.
  std::set<StateId> seen;
  std::deque<StateId> frontier;
  if (m.states.count(m.initial) > 0) {
    seen.insert(m.initial);
    frontier.push_back(m.initial);
  }
  while (!frontier.empty()) {
    StateId cur = frontier.front();
    frontier.pop_front();
    auto row = m.transitions.find(cur);
    if (row == m.transitions.end()) continue;
    for (const auto& [symbol, to] : row->second) {
      if (m.states.count(to) > 0 && seen.insert(to).second) {
        frontier.push_back(to);
      }
    }
  }
  for (const auto& s : m.accepting) {
    if (m.states.count(s) > 0 && seen.count(s) == 0) {
      out.push_back({"unreachable_accepting",
                     "accepting state '" + s + "' unreachable from '" +
                         m.initial + "'"});
    }
  }
  return out;
}

StateId replay(const StateMachine& machine,
               const std::vector<SymbolId>& symbols) {
  MachineCursor cursor(machine);
  double t = 0.0;
  for (const auto& s : symbols) cursor.step(s, t++, "replay");
  return cursor.current();
}

}  // namespace chemlab::fsm
