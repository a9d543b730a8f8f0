#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chemlab/protocol.hpp"

namespace chemlab::planner {

// Anchored phrase patterns with typed capture slots. A pattern matches when
// every anchor regex matches the instruction; slots then extract parameters.
struct GrammarProfile {
  struct Pattern {
    std::string scenario;  // "titration_ph" | "titration_color" | "weighing"
    std::vector<std::string> anchors;
    std::map<std::string, std::string> slots;   // slot name -> regex (1 group)
    std::vector<std::string> required_slots;
  };
  std::vector<Pattern> patterns;

  static GrammarProfile defaults();
  static GrammarProfile from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Bench contents; stands in for the visual observation of the scene.
struct Inventory {
  struct Item {
    std::string name;
    double quantity = 0.0;
    std::string unit;
    std::string location;
  };
  std::vector<Item> items;

  bool contains(const std::string& name) const;
};

// Scenario kind re-derived from a parsed instruction (not serialized; the
// plan JSON stays exactly the five-block template).
enum class ScenarioKind { TitrationPh, TitrationColor, Weighing };
ScenarioKind scenario_kind(const proto::ParsedInstruction& parsed);

proto::ParsedInstruction parse_instruction(const std::string& text,
                                           const GrammarProfile& grammar);

proto::EnvironmentCheck check_environment(
    const proto::ParsedInstruction& parsed, const Inventory& inventory);

fsm::StateMachine build_state_machine(const proto::ParsedInstruction& parsed);

proto::TaskPlan decompose(const proto::ParsedInstruction& parsed,
                          const fsm::StateMachine& machine);

// Full pipeline; throws Error if the emitted plan fails validation.
proto::TaskPlan compile(const std::string& instruction,
                        const GrammarProfile& grammar,
                        const Inventory& inventory);

}  // namespace chemlab::planner
