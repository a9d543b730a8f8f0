#include "chemlab/protocol.hpp"

#include <algorithm>

namespace chemlab::proto {

namespace {

const std::map<std::string, AgentId>& agent_names() {
  static const std::map<std::string, AgentId> names = {
      {"Planner", AgentId::Planner},
      {"VisionSupervisor", AgentId::VisionSupervisor},
      {"AudioSupervisor", AgentId::AudioSupervisor},
      {"ActionAgent", AgentId::ActionAgent},
      {"StatLogger", AgentId::StatLogger},
      {"Recorder", AgentId::Recorder},
      {"Summarizer", AgentId::Summarizer},
  };
  return names;
}

const nlohmann::json& expect(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw SchemaViolation(key);
  return *it;
}

std::vector<std::string> string_list(const nlohmann::json& j,
                                     const char* key) {
  if (!j.is_array()) throw SchemaViolation(key);
  std::vector<std::string> out;
  for (const auto& item : j) {
    if (!item.is_string()) throw SchemaViolation(key);
    out.push_back(item.get<std::string>());
  }
  return out;
}

nlohmann::json parameters_to_json(const std::map<std::string, Quantity>& m) {
  nlohmann::json out(nlohmann::json::value_t::object);
  for (const auto& [name, q] : m) {
    if (!q.text.empty()) {
      out[name] = {{"text", q.text}};
    } else {
      out[name] = {{"value", q.value}, {"unit", q.unit}};
    }
  }
  return out;
}

std::map<std::string, Quantity> parameters_from_json(const nlohmann::json& j,
                                                     const char* key) {
  if (!j.is_object()) throw SchemaViolation(key);
  std::map<std::string, Quantity> out;
  for (const auto& [name, body] : j.items()) {
    Quantity q;
    if (body.contains("text")) {
      q.text = body["text"].get<std::string>();
    } else {
      q.value = expect(body, "value").get<double>();
      q.unit = expect(body, "unit").get<std::string>();
    }
    out[name] = q;
  }
  return out;
}

}  // namespace

std::string to_string(AgentId id) {
  for (const auto& [name, value] : agent_names()) {
    if (value == id) return name;
  }
  return "?";
}

AgentId agent_from_string(const std::string& name) {
  auto it = agent_names().find(name);
  if (it == agent_names().end()) throw UnknownReceiver(name);
  return it->second;
}

nlohmann::json make_completion(const std::string& subtask,
                               const std::string& symbol, bool success,
                               double timestamp) {
  return {{"kind", "completion"},
          {"subtask", subtask},
          {"symbol", symbol},
          {"success", success},
          {"timestamp", timestamp}};
}

nlohmann::json make_anomaly(const std::string& code, const std::string& detail,
                            double timestamp) {
  return {{"kind", "anomaly"},
          {"code", code},
          {"detail", detail},
          {"timestamp", timestamp}};
}

nlohmann::json make_estimate(const std::string& channel, double value,
                             const std::string& unit, double confidence,
                             double timestamp) {
  return {{"kind", "estimate"}, {"channel", channel},
          {"value", value},     {"unit", unit},
          {"confidence", confidence}, {"timestamp", timestamp}};
}

nlohmann::json make_command(const std::string& symbol,
                            const nlohmann::json& params) {
  return {{"kind", "command"}, {"symbol", symbol}, {"params", params}};
}

const Subtask* TaskPlan::find_subtask(const std::string& id) const {
  for (const auto& t : subtasks) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

std::vector<fsm::Diagnostic> validate_plan(const TaskPlan& plan) {
  std::vector<fsm::Diagnostic> out = fsm::validate(plan.state_machine);
  const auto& machine = plan.state_machine;

  for (const auto& t : plan.subtasks) {
    if (t.resulting_state && machine.states.count(*t.resulting_state) == 0) {
      out.push_back({"dangling_subtask_state",
                     t.id + " resulting_state '" + *t.resulting_state +
                         "' not in Q"});
    }
    if (t.input_symbol && machine.symbols.count(*t.input_symbol) == 0) {
      out.push_back({"dangling_subtask_symbol",
                     t.id + " input_symbol '" + *t.input_symbol +
                         "' not in Sigma"});
    }
    if (t.input_symbol && t.resulting_state) {
      bool found = false;
      for (const auto& [from, row] : machine.transitions) {
        auto cell = row.find(*t.input_symbol);
        if (cell != row.end() && cell->second == *t.resulting_state) {
          found = true;
          break;
        }
      }
      if (!found) {
        out.push_back({"unmatched_state_association",
                       t.id + " pair (" + *t.input_symbol + ", " +
                           *t.resulting_state + ") not in delta"});
      }
    }
  }

  for (const auto& [id, deps] : plan.dependencies) {
    if (plan.find_subtask(id) == nullptr) {
      out.push_back({"dangling_dependency", "unknown subtask '" + id + "'"});
    }
    for (const auto& d : deps) {
      if (plan.find_subtask(d) == nullptr) {
        out.push_back({"dangling_dependency",
                       id + " depends on unknown subtask '" + d + "'"});
      }
    }
  }

  // Cycle detection over the dependency graph (iterative DFS, three colors).
  {
    std::map<std::string, int> color;  // 0 white, 1 grey, 2 black
    bool cycle = false;
    for (const auto& t : plan.subtasks) color[t.id] = 0;
    for (const auto& t : plan.subtasks) {
      if (color[t.id] != 0 || cycle) continue;
      std::vector<std::pair<std::string, std::size_t>> stack{{t.id, 0}};
      color[t.id] = 1;
      while (!stack.empty() && !cycle) {
        auto& [node, next] = stack.back();
        auto deps = plan.dependencies.find(node);
        const std::size_t fan =
            deps == plan.dependencies.end() ? 0 : deps->second.size();
        if (next >= fan) {
          color[node] = 2;
          stack.pop_back();
          continue;
        }
        const std::string& nbr = deps->second[next++];
        auto it = color.find(nbr);
        if (it == color.end()) continue;  // already reported as dangling
        if (it->second == 1) {
          cycle = true;
        } else if (it->second == 0) {
          it->second = 1;
          stack.push_back({nbr, 0});
        }
      }
    }
    if (cycle) {
      out.push_back({"dependency_cycle", "subtask dependency graph is cyclic"});
    }
  }

  for (const auto& e : plan.expected_transitions) {
    const fsm::StateId* to = machine.next_state(e.from, e.on);
    if (to == nullptr || *to != e.to) {
      out.push_back({"unmatched_expected_transition",
                     "(" + e.from + ", " + e.on + ") -> " + e.to +
                         " not in delta"});
    }
    if (plan.find_subtask(e.via) == nullptr) {
      out.push_back({"dangling_dependency",
                     "expected transition via unknown subtask '" + e.via +
                         "'"});
    }
  }

  if (plan.statistics_logger.activate &&
      machine.states.count(plan.statistics_logger.activation_phase) == 0) {
    out.push_back({"dangling_activation_phase",
                   "statistics_logger activation_phase '" +
                       plan.statistics_logger.activation_phase +
                       "' not in Q"});
  }
  return out;
}

nlohmann::json plan_to_json(const TaskPlan& plan) {
  const auto& p = plan.parsed_instruction;
  nlohmann::json data_requirements = nlohmann::json::array();
  for (const auto& d : p.data_requirements) {
    data_requirements.push_back({{"quantity", d.quantity},
                                 {"unit", d.unit},
                                 {"frequency", d.frequency}});
  }
  nlohmann::json parsed = {
      {"entities",
       {{"objects", p.objects},
        {"reagents", p.reagents},
        {"instruments", p.instruments}}},
      {"initial_conditions",
       {{"chemical_system", p.chemical_system},
        {"parameters", parameters_to_json(p.initial_parameters)}}},
      {"target_conditions",
       {{"parameters", parameters_to_json(p.target_parameters)}}},
      {"operation_intent", p.operation_intent},
      {"data_requirements", data_requirements},
      {"output_format", p.output_format},
      {"operation_primitives", p.operation_primitives},
  };

  nlohmann::json environment = {
      {"satisfied", plan.environment_check.satisfied},
      {"missing_objects", plan.environment_check.missing_objects},
      {"user_feedback", plan.environment_check.user_feedback
                            ? nlohmann::json(*plan.environment_check
                                                  .user_feedback)
                            : nlohmann::json(nullptr)},
  };

  nlohmann::json subtasks = nlohmann::json::array();
  nlohmann::json associations(nlohmann::json::value_t::object);
  for (const auto& t : plan.subtasks) {
    subtasks.push_back({{"id", t.id},
                        {"receiver", to_string(t.receiver)},
                        {"description", t.description}});
    if (t.input_symbol || t.resulting_state) {
      nlohmann::json a(nlohmann::json::value_t::object);
      if (t.input_symbol) a["input_symbol"] = *t.input_symbol;
      if (t.resulting_state) a["resulting_state"] = *t.resulting_state;
      associations[t.id] = std::move(a);
    }
  }
  nlohmann::json expected = nlohmann::json::array();
  for (const auto& e : plan.expected_transitions) {
    expected.push_back(
        {{"from", e.from}, {"on", e.on}, {"to", e.to}, {"via", e.via}});
  }

  nlohmann::json decomposition = {
      {"subtasks", std::move(subtasks)},
      {"dependencies", plan.dependencies},
      {"state_associations", std::move(associations)},
      {"expected_transitions", std::move(expected)},
  };

  nlohmann::json modules = {
      {"statistics_logger",
       {{"activate", plan.statistics_logger.activate},
        {"activation_phase", plan.statistics_logger.activation_phase},
        {"activation_trigger",
         to_string(plan.statistics_logger.activation_trigger)},
        {"associated_subtasks", plan.statistics_logger.associated_subtasks}}},
      {"high_confidence_recorder",
       {{"activate", plan.high_confidence_recorder.activate},
        {"activation_time", plan.high_confidence_recorder.activation_time},
        {"deactivation_time", plan.high_confidence_recorder.deactivation_time},
        {"data_sources", plan.high_confidence_recorder.data_sources}}},
  };

  return nlohmann::json{
      {"parsed_instruction", std::move(parsed)},
      {"environment_check", std::move(environment)},
      {"state_machine", plan.state_machine.to_json()},
      {"task_decomposition", std::move(decomposition)},
      {"module_instantiation", std::move(modules)},
  };
}

TaskPlan plan_from_json(const nlohmann::json& j) {
  TaskPlan plan;
  const auto& parsed = expect(j, "parsed_instruction");
  const auto& entities = expect(parsed, "entities");
  plan.parsed_instruction.objects =
      string_list(expect(entities, "objects"), "objects");
  plan.parsed_instruction.reagents =
      string_list(expect(entities, "reagents"), "reagents");
  plan.parsed_instruction.instruments =
      string_list(expect(entities, "instruments"), "instruments");
  const auto& initial = expect(parsed, "initial_conditions");
  plan.parsed_instruction.chemical_system =
      expect(initial, "chemical_system").get<std::string>();
  plan.parsed_instruction.initial_parameters =
      parameters_from_json(expect(initial, "parameters"), "parameters");
  plan.parsed_instruction.target_parameters = parameters_from_json(
      expect(expect(parsed, "target_conditions"), "parameters"), "parameters");
  plan.parsed_instruction.operation_intent =
      string_list(expect(parsed, "operation_intent"), "operation_intent");
  for (const auto& d : expect(parsed, "data_requirements")) {
    plan.parsed_instruction.data_requirements.push_back(
        {expect(d, "quantity").get<std::string>(),
         expect(d, "unit").get<std::string>(),
         expect(d, "frequency").get<std::string>()});
  }
  plan.parsed_instruction.output_format =
      expect(parsed, "output_format").get<std::string>();
  plan.parsed_instruction.operation_primitives = string_list(
      expect(parsed, "operation_primitives"), "operation_primitives");

  const auto& environment = expect(j, "environment_check");
  plan.environment_check.satisfied =
      expect(environment, "satisfied").get<bool>();
  plan.environment_check.missing_objects =
      string_list(expect(environment, "missing_objects"), "missing_objects");
  const auto& feedback = expect(environment, "user_feedback");
  if (!feedback.is_null()) {
    plan.environment_check.user_feedback = feedback.get<std::string>();
  }

  plan.state_machine = fsm::StateMachine::from_json(expect(j, "state_machine"));

  const auto& decomposition = expect(j, "task_decomposition");
  const auto& associations = expect(decomposition, "state_associations");
  for (const auto& t : expect(decomposition, "subtasks")) {
    Subtask subtask;
    subtask.id = expect(t, "id").get<std::string>();
    subtask.receiver =
        agent_from_string(expect(t, "receiver").get<std::string>());
    subtask.description = expect(t, "description").get<std::string>();
    auto a = associations.find(subtask.id);
    if (a != associations.end()) {
      if (a->contains("input_symbol")) {
        subtask.input_symbol = (*a)["input_symbol"].get<std::string>();
      }
      if (a->contains("resulting_state")) {
        subtask.resulting_state = (*a)["resulting_state"].get<std::string>();
      }
    }
    plan.subtasks.push_back(std::move(subtask));
  }
  for (const auto& [id, deps] : expect(decomposition, "dependencies").items()) {
    plan.dependencies[id] = string_list(deps, "dependencies");
  }
  for (const auto& e : expect(decomposition, "expected_transitions")) {
    plan.expected_transitions.push_back(
        {expect(e, "from").get<std::string>(),
         expect(e, "on").get<std::string>(),
         expect(e, "to").get<std::string>(),
         expect(e, "via").get<std::string>()});
  }

  const auto& modules = expect(j, "module_instantiation");
  const auto& logger = expect(modules, "statistics_logger");
  plan.statistics_logger.activate = expect(logger, "activate").get<bool>();
  plan.statistics_logger.activation_phase =
      expect(logger, "activation_phase").get<std::string>();
  plan.statistics_logger.activation_trigger =
      agent_from_string(expect(logger, "activation_trigger").get<std::string>());
  plan.statistics_logger.associated_subtasks = string_list(
      expect(logger, "associated_subtasks"), "associated_subtasks");
  const auto& recorder = expect(modules, "high_confidence_recorder");
  plan.high_confidence_recorder.activate =
      expect(recorder, "activate").get<bool>();
  plan.high_confidence_recorder.activation_time =
      expect(recorder, "activation_time").get<std::string>();
  plan.high_confidence_recorder.deactivation_time =
      expect(recorder, "deactivation_time").get<std::string>();
  plan.high_confidence_recorder.data_sources =
      string_list(expect(recorder, "data_sources"), "data_sources");
  return plan;
}

namespace {

nlohmann::json message_to_json(const AgentMessage& msg) {
  return nlohmann::json{
      {"sender", to_string(msg.sender)},
      {"receiver", to_string(msg.receiver)},
      {"subtask", msg.subtask},
      {"q_target", msg.q_target},
      {"payload", msg.payload ? *msg.payload : nlohmann::json(nullptr)},
      {"sent_at", msg.sent_at},
  };
}

nlohmann::json parse_document(const std::string& bytes) {
  nlohmann::json j = nlohmann::json::parse(bytes, nullptr, false);
  if (j.is_discarded()) throw MalformedDocument("not valid JSON");
  return j;
}

}  // namespace

std::string encode(const AgentMessage& msg) {
  return message_to_json(msg).dump();
}

std::string encode(const TaskPlan& plan) { return plan_to_json(plan).dump(); }

AgentMessage decode_message(const std::string& bytes) {
  nlohmann::json j = parse_document(bytes);
  AgentMessage msg;
  msg.sender = agent_from_string(expect(j, "sender").get<std::string>());
  msg.receiver = agent_from_string(expect(j, "receiver").get<std::string>());
  msg.subtask = expect(j, "subtask").get<std::string>();
  msg.q_target = expect(j, "q_target").get<std::string>();
  const auto& payload = expect(j, "payload");
  if (!payload.is_null()) msg.payload = payload;
  msg.sent_at = expect(j, "sent_at").get<double>();
  return msg;
}

TaskPlan decode_plan(const std::string& bytes) {
  return plan_from_json(parse_document(bytes));
}

std::uint64_t MessageBus::send(AgentMessage msg) {
  if (plan_ != nullptr) {
    if (!msg.subtask.empty() && plan_->find_subtask(msg.subtask) == nullptr) {
      throw UnresolvedSubtask(msg.subtask);
    }
    if (!msg.q_target.empty() &&
        plan_->state_machine.states.count(msg.q_target) == 0) {
      throw ProtocolError("q_target '" + msg.q_target + "' not in Q");
    }
  }
  const std::uint64_t seq = ++sequence_;
  if (keep_log_) log_.emplace_back(seq, msg);
  queues_[msg.receiver].push_back(std::move(msg));
  return seq;
}

std::vector<AgentMessage> MessageBus::poll(AgentId receiver) {
  auto it = queues_.find(receiver);
  if (it == queues_.end()) return {};
  std::vector<AgentMessage> out(it->second.begin(), it->second.end());
  it->second.clear();
  return out;
}

}  // namespace chemlab::proto
