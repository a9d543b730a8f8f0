#pragma once

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chemlab/errors.hpp"
#include "chemlab/fsm.hpp"
#include "json.hpp"

namespace chemlab::proto {

// Closed enumeration of the system's agents and modules.
enum class AgentId {
  Planner,
  VisionSupervisor,
  AudioSupervisor,
  ActionAgent,
  StatLogger,
  Recorder,
  Summarizer,
};

std::string to_string(AgentId id);
AgentId agent_from_string(const std::string& name);  // throws UnknownReceiver

// The inter-agent tuple {sender, receiver, t, q_target} plus an optional
// structured payload. Payload kinds and required fields:
//   completion: {kind, subtask, symbol, success, timestamp}
//   anomaly:    {kind, code, detail, timestamp}
//   estimate:   {kind, channel, value, unit, confidence, timestamp}
//   command:    {kind, symbol, params}
struct AgentMessage {
  AgentId sender = AgentId::Planner;
  AgentId receiver = AgentId::Planner;
  std::string subtask;       // t in the active plan
  fsm::StateId q_target;     // expected state after the subtask
  std::optional<nlohmann::json> payload;
  double sent_at = 0.0;      // simulation seconds
};

nlohmann::json make_completion(const std::string& subtask,
                               const std::string& symbol, bool success,
                               double timestamp);
nlohmann::json make_anomaly(const std::string& code, const std::string& detail,
                            double timestamp);
nlohmann::json make_estimate(const std::string& channel, double value,
                             const std::string& unit, double confidence,
                             double timestamp);
nlohmann::json make_command(const std::string& symbol,
                            const nlohmann::json& params);

struct Subtask {
  std::string id;  // "t1", "t2", ...
  AgentId receiver = AgentId::VisionSupervisor;
  std::string description;
  std::optional<fsm::SymbolId> input_symbol;
  std::optional<fsm::StateId> resulting_state;
};

struct ExpectedTransition {
  fsm::StateId from;
  fsm::SymbolId on;
  fsm::StateId to;
  std::string via;  // subtask id
};

// A parsed parameter: numeric value with unit, or a bare text value (e.g. an
// endpoint color) when `text` is non-empty.
struct Quantity {
  double value = 0.0;
  std::string unit;
  std::string text;
};

struct ParsedInstruction {
  std::vector<std::string> objects;
  std::vector<std::string> reagents;
  std::vector<std::string> instruments;
  std::string chemical_system;
  std::map<std::string, Quantity> initial_parameters;
  std::map<std::string, Quantity> target_parameters;
  std::vector<std::string> operation_intent;
  struct DataRequirement {
    std::string quantity;
    std::string unit;
    std::string frequency;
  };
  std::vector<DataRequirement> data_requirements;
  std::string output_format;
  std::vector<std::string> operation_primitives;
};

struct EnvironmentCheck {
  bool satisfied = true;
  std::vector<std::string> missing_objects;
  std::optional<std::string> user_feedback;
};

struct StatLoggerConfig {
  bool activate = true;
  fsm::StateId activation_phase;
  AgentId activation_trigger = AgentId::VisionSupervisor;
  std::vector<std::string> associated_subtasks;
};

struct RecorderConfig {
  bool activate = true;
  std::string activation_time = "experiment_start";
  std::string deactivation_time = "experiment_end";
  std::vector<std::string> data_sources;
};

// The Planner's five-block plan.
struct TaskPlan {
  ParsedInstruction parsed_instruction;
  EnvironmentCheck environment_check;
  fsm::StateMachine state_machine;
  std::vector<Subtask> subtasks;
  std::map<std::string, std::vector<std::string>> dependencies;
  std::vector<ExpectedTransition> expected_transitions;
  StatLoggerConfig statistics_logger;
  RecorderConfig high_confidence_recorder;

  const Subtask* find_subtask(const std::string& id) const;
};

// Empty iff all plan invariants hold: acyclic dependencies, every expected
// transition present in the machine, symbol/state references resolved, and
// the embedded machine itself valid.
std::vector<fsm::Diagnostic> validate_plan(const TaskPlan& plan);

// Canonical JSON (sorted keys). decode(encode(x)) == x.
std::string encode(const AgentMessage& msg);
std::string encode(const TaskPlan& plan);
nlohmann::json plan_to_json(const TaskPlan& plan);
AgentMessage decode_message(const std::string& bytes);
TaskPlan decode_plan(const std::string& bytes);
TaskPlan plan_from_json(const nlohmann::json& j);

// In-process delivery bus with per-receiver FIFO queues and a global monotone
// sequence counter; delivery order is a pure function of send order.
class MessageBus {
 public:
  // Binding a plan enables subtask/q_target validation on send.
  void bind_plan(const TaskPlan* plan) { plan_ = plan; }

  // The delivery log is for tests and debugging; off by default because the
  // estimate stream sends at the tick rate.
  void keep_log(bool enabled) { keep_log_ = enabled; }

  std::uint64_t send(AgentMessage msg);
  std::vector<AgentMessage> poll(AgentId receiver);

  std::uint64_t sequence() const { return sequence_; }
  const std::vector<std::pair<std::uint64_t, AgentMessage>>& log() const {
    return log_;
  }

 private:
  const TaskPlan* plan_ = nullptr;
  std::map<AgentId, std::deque<AgentMessage>> queues_;
  std::uint64_t sequence_ = 0;
  bool keep_log_ = false;
  std::vector<std::pair<std::uint64_t, AgentMessage>> log_;
};

}  // namespace chemlab::proto
