#pragma once

#include <stdexcept>
#include <string>

namespace chemlab {

// Base type for everything this library throws on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// fsm-engine
struct UndefinedTransition : Error {
  UndefinedTransition(const std::string& state, const std::string& symbol)
      : Error("undefined transition: no edge for symbol '" + symbol +
              "' at state '" + state + "'"),
        state(state),
        symbol(symbol) {}
  std::string state;
  std::string symbol;
};

// agent-protocol
struct MalformedDocument : Error {
  explicit MalformedDocument(const std::string& detail)
      : Error("malformed document: " + detail) {}
};

struct SchemaViolation : Error {
  explicit SchemaViolation(const std::string& key)
      : Error("schema violation: missing or mistyped key '" + key + "'"),
        key(key) {}
  std::string key;
};

struct UnknownReceiver : Error {
  explicit UnknownReceiver(const std::string& name)
      : Error("unknown receiver: '" + name + "'") {}
};

struct UnresolvedSubtask : Error {
  explicit UnresolvedSubtask(const std::string& id)
      : Error("message references subtask '" + id + "' absent from the plan"),
        id(id) {}
  std::string id;
};

struct ProtocolError : Error {
  explicit ProtocolError(const std::string& detail)
      : Error("protocol error: " + detail) {}
};

// planner
struct UnrecognizedInstruction : Error {
  explicit UnrecognizedInstruction(const std::string& text)
      : Error("no grammar pattern matched the instruction: \"" + text + "\""),
        text(text) {}
  std::string text;
};

struct MissingParameter : Error {
  explicit MissingParameter(const std::string& slot)
      : Error("instruction matched a pattern but lacks required parameter '" +
              slot + "'"),
        slot(slot) {}
  std::string slot;
};

struct UnsupportedScenario : Error {
  explicit UnsupportedScenario(const std::string& kind)
      : Error("no canonical state machine for scenario kind '" + kind + "'") {}
};

// chem-equilibrium
struct NoBracket : Error {
  explicit NoBracket(const std::string& detail)
      : Error("charge-balance residual does not bracket a root: " + detail) {}
};

// plant-sim
struct OverlappingFault : Error {
  explicit OverlappingFault(const std::string& detail)
      : Error("overlapping fault of the same kind: " + detail) {}
};

// precision-controller
struct NegativeDisplacement : Error {
  NegativeDisplacement()
      : Error("displacement increment must be non-negative") {}
};

// fusion-recorder
struct TimestampRegression : Error {
  TimestampRegression(double incoming, double tail)
      : Error("record timestamp " + std::to_string(incoming) +
              " precedes datastore tail " + std::to_string(tail)) {}
};

// analysis-report
struct TooFewPoints : Error {
  explicit TooFewPoints(const std::string& detail)
      : Error("too few points: " + detail) {}
};

struct BadWindow : Error {
  explicit BadWindow(const std::string& detail)
      : Error("bad filter window: " + detail) {}
};

struct NonUniformGrid : Error {
  explicit NonUniformGrid(const std::string& detail)
      : Error("series is not on a uniform grid: " + detail) {}
};

struct HalfPointOutOfRange : Error {
  explicit HalfPointOutOfRange(const std::string& detail)
      : Error("half-equivalence volume outside the curve: " + detail) {}
};

struct GridMismatch : Error {
  explicit GridMismatch(const std::string& detail)
      : Error("replicate grids do not match: " + detail) {}
};

struct IncompleteRun : Error {
  explicit IncompleteRun(const std::string& requirement)
      : Error("run did not satisfy data requirement: " + requirement),
        requirement(requirement) {}
  std::string requirement;
};

// cli / scenario loading
struct ConfigError : Error {
  explicit ConfigError(const std::string& detail)
      : Error("config error: " + detail) {}
};

}  // namespace chemlab
