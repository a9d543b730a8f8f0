#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "chemlab/errors.hpp"
#include "json.hpp"

namespace chemlab::fsm {

using StateId = std::string;
using SymbolId = std::string;

// One validation finding; an empty list means the machine is well formed.
struct Diagnostic {
  std::string code;    // e.g. "dangling_state", "unreachable_accepting"
  std::string detail;  // names the offending element
};

// Deterministic finite state machine (Q, Sigma, delta, q0, F). Immutable by
// convention once built; cursors hold a pointer to it.
struct StateMachine {
  std::set<StateId> states;
  std::set<SymbolId> symbols;
  // delta as a nested map state -> symbol -> state; at most one target per
  // (state, symbol) pair by construction.
  std::map<StateId, std::map<SymbolId, StateId>> transitions;
  StateId initial;
  std::set<StateId> accepting;

  // Returns nullptr when delta is undefined at (from, symbol).
  const StateId* next_state(const StateId& from, const SymbolId& symbol) const;
  bool has_transition(const StateId& from, const SymbolId& symbol) const {
    return next_state(from, symbol) != nullptr;
  }

  // The "state_machine" block of the task-plan JSON.
  nlohmann::json to_json() const;
  static StateMachine from_json(const nlohmann::json& j);
};

struct TransitionRecord {
  StateId from;
  SymbolId symbol;
  StateId to;
  double timestamp = 0.0;  // simulation seconds
  std::string emitter;     // agent that fired the symbol
};

// Tracks the current state q_t and the replayable transition history.
class MachineCursor {
 public:
  explicit MachineCursor(const StateMachine& machine)
      : machine_(&machine), current_(machine.initial) {}

  const StateMachine& machine() const { return *machine_; }
  const StateId& current() const { return current_; }
  const std::vector<TransitionRecord>& history() const { return history_; }

  // Applies delta(q_t, symbol). Throws UndefinedTransition when no edge is
  // defined; that is a protocol violation for the caller to escalate.
  StateId step(const SymbolId& symbol, double timestamp,
               const std::string& emitter);

  bool is_accepting() const {
    return machine_->accepting.count(current_) > 0;
  }

 private:
  const StateMachine* machine_;
  StateId current_;
  std::vector<TransitionRecord> history_;
};

// Advisory diagnostics: dangling state/symbol references and accepting states
// unreachable from the initial state.
std::vector<Diagnostic> validate(const StateMachine& machine);

// Replays a symbol sequence from the initial state; used by tests and by the
// report generator to confirm history integrity.
StateId replay(const StateMachine& machine,
               const std::vector<SymbolId>& symbols);

}  // namespace chemlab::fsm
