#include "chemlab/planner.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <sstream>

namespace chemlab::planner {

namespace {

std::string normalize(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) out.push_back(static_cast<char>(std::tolower(c)));
  const auto first = out.find_first_not_of(" \t");
  const auto last = out.find_last_not_of(" \t");
  if (first == std::string::npos) return "";
  return out.substr(first, last - first + 1);
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ", ";
    out += items[i];
  }
  return out;
}

std::optional<std::string> extract(const std::string& text,
                                   const std::string& pattern) {
  std::regex re(pattern, std::regex::ECMAScript | std::regex::icase);
  std::smatch match;
  if (std::regex_search(text, match, re) && match.size() > 1) {
    return match[1].str();
  }
  return std::nullopt;
}

}  // namespace

GrammarProfile GrammarProfile::defaults() {
  GrammarProfile g;
  {
    GrammarProfile::Pattern p;
    p.scenario = "titration_ph";
    p.anchors = {R"(titrat)", R"(pH\s+reaches)"};
    p.slots = {
        {"target_ph", R"(pH\s+reaches\s+([0-9]+(?:\.[0-9]+)?))"},
        {"titrant_conc", R"(use\s+(?:the\s+)?([0-9]+(?:\.[0-9]+)?)\s*M\b)"},
        {"titrant_name",
         R"(use\s+(?:the\s+)?[0-9.]+\s*M\s+([A-Za-z][A-Za-z ]*?)\s+(?:standard\s+)?solution)"},
        {"analyte_conc", R"(titrate\s+the\s+([0-9]+(?:\.[0-9]+)?)\s*M\b)"},
        {"analyte_name",
         R"(titrate\s+the\s+[0-9.]+\s*M\s+(?:concentrated\s+)?([A-Za-z][A-Za-z ]*?)(?:\s+with\b|\s+placed\b|\s+on\b|,|\.))"},
        {"initial_ph", R"(initial\s+pH\s+of\s+([0-9]+(?:\.[0-9]+)?))"},
    };
    p.required_slots = {"target_ph", "titrant_conc", "titrant_name",
                        "analyte_conc", "analyte_name"};
    g.patterns.push_back(std::move(p));
  }
  {
    GrammarProfile::Pattern p;
    p.scenario = "titration_color";
    p.anchors = {R"(titrat)", R"(color\s+turns)"};
    p.slots = {
        {"target_color", R"(color\s+turns\s+([a-z]+))"},
        {"titrant_conc", R"(use\s+(?:the\s+)?([0-9]+(?:\.[0-9]+)?)\s*M\b)"},
        {"titrant_name",
         R"(use\s+(?:the\s+)?[0-9.]+\s*M\s+([A-Za-z][A-Za-z ]*?)\s+(?:standard\s+)?solution)"},
        {"analyte_volume", R"(titrate\s+the\s+([0-9]+(?:\.[0-9]+)?)\s*mL\b)"},
        {"analyte_conc", R"(mL\s+of\s+([0-9]+(?:\.[0-9]+)?)\s*M\b)"},
        {"analyte_name",
         R"(mL\s+of\s+[0-9.]+\s*M\s+([A-Za-z][A-Za-z ]*?)\s+solution)"},
    };
    p.required_slots = {"target_color", "titrant_conc", "titrant_name",
                        "analyte_conc", "analyte_name", "analyte_volume"};
    g.patterns.push_back(std::move(p));
  }
  {
    GrammarProfile::Pattern p;
    p.scenario = "weighing";
    p.anchors = {R"(weigh)", R"(dissolve)"};
    p.slots = {
        {"target_mass", R"(weigh\s+([0-9]+(?:\.[0-9]+)?)\s*g\b)"},
        {"solid_name", R"(g\s+of\s+([A-Za-z][A-Za-z0-9]*)\s+solid)"},
        {"solvent_volume", R"(add\s+([0-9]+(?:\.[0-9]+)?)\s*mL\b)"},
        {"solvent_name", R"(add\s+[0-9.]+\s*mL\s+(?:of\s+)?([a-z ]*water))"},
    };
    p.required_slots = {"target_mass", "solid_name", "solvent_volume",
                        "solvent_name"};
    g.patterns.push_back(std::move(p));
  }
  return g;
}

GrammarProfile GrammarProfile::from_json(const nlohmann::json& j) {
  GrammarProfile g;
  if (!j.is_array()) throw SchemaViolation("grammar");
  for (const auto& item : j) {
    GrammarProfile::Pattern p;
    p.scenario = item.at("scenario").get<std::string>();
    for (const auto& a : item.at("anchors")) {
      p.anchors.push_back(a.get<std::string>());
    }
    for (const auto& [name, re] : item.at("slots").items()) {
      p.slots[name] = re.get<std::string>();
    }
    for (const auto& r : item.at("required_slots")) {
      p.required_slots.push_back(r.get<std::string>());
    }
    g.patterns.push_back(std::move(p));
  }
  return g;
}

nlohmann::json GrammarProfile::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : patterns) {
    out.push_back({{"scenario", p.scenario},
                   {"anchors", p.anchors},
                   {"slots", p.slots},
                   {"required_slots", p.required_slots}});
  }
  return out;
}

bool Inventory::contains(const std::string& name) const {
  const std::string wanted = normalize(name);
  for (const auto& item : items) {
    if (normalize(item.name) == wanted) return true;
  }
  return false;
}

ScenarioKind scenario_kind(const proto::ParsedInstruction& parsed) {
  if (parsed.target_parameters.count("pH") > 0) return ScenarioKind::TitrationPh;
  if (parsed.target_parameters.count("color") > 0) {
    return ScenarioKind::TitrationColor;
  }
  if (parsed.target_parameters.count("mass") > 0) return ScenarioKind::Weighing;
  throw UnsupportedScenario("no recognizable target condition");
}

namespace {

std::map<std::string, std::string> match_pattern(
    const std::string& text, const GrammarProfile::Pattern& pattern) {
  std::map<std::string, std::string> slots;
  for (const auto& [name, re] : pattern.slots) {
    auto value = extract(text, re);
    if (value) slots[name] = *value;
  }
  for (const auto& required : pattern.required_slots) {
    if (slots.count(required) == 0) throw MissingParameter(required);
  }
  return slots;
}

proto::ParsedInstruction build_titration_ph(
    const std::map<std::string, std::string>& slots) {
  proto::ParsedInstruction p;
  const std::string titrant = slots.at("titrant_name");
  const std::string analyte = slots.at("analyte_name");
  p.objects = {"beaker"};
  p.reagents = {titrant + " solution", analyte};
  p.instruments = {"rubber-headed pipette", "magnetic stirrer", "pH meter"};
  p.chemical_system = analyte + " titrated with " + titrant;
  p.initial_parameters["concentration"] = {std::stod(slots.at("analyte_conc")),
                                           "M", ""};
  if (slots.count("initial_ph") > 0) {
    p.initial_parameters["pH"] = {std::stod(slots.at("initial_ph")), "pH", ""};
  }
  p.target_parameters["pH"] = {std::stod(slots.at("target_ph")), "pH", ""};
  p.initial_parameters["titrant_concentration"] = {
      std::stod(slots.at("titrant_conc")), "M", ""};
  p.operation_intent = {"grasp the pipette", "draw the titrant",
                        "titrate to the target pH",
                        "record per-drop pH and volume",
                        "analyze the curve and report"};
  p.data_requirements = {{"pH", "pH", "per_drop"},
                         {"volume", "mL", "per_drop"},
                         {"temperature", "C", "start_end"},
                         {"time", "s", "start_end"}};
  p.output_format =
      "analytical report with titration curve, first derivative, second "
      "derivative, and transition zoom charts";
  p.operation_primitives = {"grasp", "draw", "position", "dispense"};
  return p;
}

proto::ParsedInstruction build_titration_color(
    const std::map<std::string, std::string>& slots) {
  proto::ParsedInstruction p;
  const std::string titrant = slots.at("titrant_name");
  const std::string analyte = slots.at("analyte_name");
  p.objects = {"beaker"};
  p.reagents = {titrant + " solution", analyte + " solution",
                "calcium indicator"};
  p.instruments = {"rubber-headed pipette", "color sensor"};
  p.chemical_system = analyte + " titrated with " + titrant;
  p.initial_parameters["concentration"] = {std::stod(slots.at("analyte_conc")),
                                           "M", ""};
  p.initial_parameters["volume"] = {std::stod(slots.at("analyte_volume")),
                                    "mL", ""};
  p.initial_parameters["titrant_concentration"] = {
      std::stod(slots.at("titrant_conc")), "M", ""};
  p.target_parameters["color"] = {0.0, "", slots.at("target_color")};
  p.operation_intent = {"grasp the pipette", "draw the titrant",
                        "titrate to the color endpoint",
                        "record per-drop volume",
                        "compute the analyte concentration and report"};
  p.data_requirements = {{"volume", "mL", "per_drop"},
                         {"color", "label", "continuous"},
                         {"time", "s", "start_end"}};
  p.output_format = "analytical report with endpoint volume and derived "
                    "analyte concentration";
  p.operation_primitives = {"grasp", "draw", "position", "dispense"};
  return p;
}

proto::ParsedInstruction build_weighing(
    const std::map<std::string, std::string>& slots) {
  proto::ParsedInstruction p;
  const std::string solid = slots.at("solid_name");
  const std::string solvent = slots.at("solvent_name");
  p.objects = {"beaker", "reagent bottle"};
  p.reagents = {solid, solvent};
  p.instruments = {"balance", "magnetic stirrer", "spatula"};
  p.chemical_system = solid + " dissolved in " + solvent;
  p.target_parameters["mass"] = {std::stod(slots.at("target_mass")), "g", ""};
  p.initial_parameters["solvent_volume"] = {
      std::stod(slots.at("solvent_volume")), "mL", ""};
  p.operation_intent = {"weigh the solid to the target mass",
                        "transfer to the beaker", "add the solvent",
                        "stir until fully dissolved", "report"};
  p.data_requirements = {{"mass", "g", "continuous"},
                         {"dissolution_time", "s", "once"},
                         {"time", "s", "start_end"}};
  p.output_format =
      "experimental report with weighing error and dissolution time";
  p.operation_primitives = {"grasp", "weigh", "dispense", "stir"};
  return p;
}

std::string kind_label(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::TitrationPh:
      return "an acid-base titration";
    case ScenarioKind::TitrationColor:
      return "a complexometric titration";
    case ScenarioKind::Weighing:
      return "a solid weighing and dissolution experiment";
  }
  return "an experiment";
}

}  // namespace

proto::ParsedInstruction parse_instruction(const std::string& text,
                                           const GrammarProfile& grammar) {
  std::vector<const GrammarProfile::Pattern*> matched;
  for (const auto& pattern : grammar.patterns) {
    bool anchors_ok = true;
    for (const auto& anchor : pattern.anchors) {
      std::regex re(anchor, std::regex::ECMAScript | std::regex::icase);
      if (!std::regex_search(text, re)) {
        anchors_ok = false;
        break;
      }
    }
    if (anchors_ok) matched.push_back(&pattern);
  }
  if (matched.empty()) throw UnrecognizedInstruction(text);
  if (matched.size() > 1) {
    throw UnrecognizedInstruction(text +
                                  " (ambiguous: matches multiple patterns)");
  }
  const auto& pattern = *matched.front();
  auto slots = match_pattern(text, pattern);
  if (pattern.scenario == "titration_ph") return build_titration_ph(slots);
  if (pattern.scenario == "titration_color") {
    return build_titration_color(slots);
  }
  if (pattern.scenario == "weighing") return build_weighing(slots);
  throw UnsupportedScenario(pattern.scenario);
}

proto::EnvironmentCheck check_environment(
    const proto::ParsedInstruction& parsed, const Inventory& inventory) {
  proto::EnvironmentCheck check;
  std::vector<std::string> required;
  required.insert(required.end(), parsed.objects.begin(), parsed.objects.end());
  required.insert(required.end(), parsed.reagents.begin(),
                  parsed.reagents.end());
  required.insert(required.end(), parsed.instruments.begin(),
                  parsed.instruments.end());
  for (const auto& name : required) {
    if (!inventory.contains(name)) check.missing_objects.push_back(name);
  }
  check.satisfied = check.missing_objects.empty();
  if (!check.satisfied) {
    std::ostringstream feedback;
    feedback << "The experiment you wish to complete is "
             << kind_label(scenario_kind(parsed))
             << ". The required instruments and reagents are "
             << join(parsed.instruments) << " " << join(parsed.reagents)
             << ". The current experimental scene lacks "
             << join(check.missing_objects) << ".";
    check.user_feedback = feedback.str();
  }
  return check;
}

fsm::StateMachine build_state_machine(const proto::ParsedInstruction& parsed) {
  const ScenarioKind kind = scenario_kind(parsed);
  fsm::StateMachine m;
  if (kind == ScenarioKind::TitrationPh || kind == ScenarioKind::TitrationColor) {
    m.states = {"q0",           "q1_grasped", "q2_drawn",
                "q3_ready",     "q4_titrating", "q5_waiting_stable",
                "q6_complete",  "q_accept"};
    m.symbols = {"sigma_grasp",  "sigma_draw",     "sigma_titrate",
                 "sigma_audio_detect", "sigma_stable", "sigma_record",
                 "sigma_endpoint", "sigma_verify"};
    m.initial = "q0";
    m.accepting = {"q_accept"};
    m.transitions["q0"]["sigma_grasp"] = "q1_grasped";
    m.transitions["q1_grasped"]["sigma_draw"] = "q2_drawn";
    m.transitions["q2_drawn"]["sigma_titrate"] = "q3_ready";
    m.transitions["q3_ready"]["sigma_audio_detect"] = "q4_titrating";
    m.transitions["q3_ready"]["sigma_endpoint"] = "q6_complete";
    m.transitions["q4_titrating"]["sigma_stable"] = "q5_waiting_stable";
    m.transitions["q4_titrating"]["sigma_endpoint"] = "q6_complete";
    m.transitions["q5_waiting_stable"]["sigma_titrate"] = "q4_titrating";
    m.transitions["q5_waiting_stable"]["sigma_endpoint"] = "q6_complete";
    m.transitions["q6_complete"]["sigma_verify"] = "q_accept";
  } else {
    m.states = {"q0", "q1_grasped", "q2_weighed", "q3_solvent_added",
                "q4_dissolving", "q5_complete", "q_accept"};
    m.symbols = {"sigma_grasp", "sigma_weigh", "sigma_dispense", "sigma_stir",
                 "sigma_dissolved", "sigma_verify", "sigma_record"};
    m.initial = "q0";
    m.accepting = {"q_accept"};
    m.transitions["q0"]["sigma_grasp"] = "q1_grasped";
    m.transitions["q1_grasped"]["sigma_weigh"] = "q2_weighed";
    m.transitions["q2_weighed"]["sigma_dispense"] = "q3_solvent_added";
    m.transitions["q3_solvent_added"]["sigma_stir"] = "q4_dissolving";
    m.transitions["q4_dissolving"]["sigma_dissolved"] = "q5_complete";
    m.transitions["q5_complete"]["sigma_verify"] = "q_accept";
  }
  return m;
}

proto::TaskPlan decompose(const proto::ParsedInstruction& parsed,
                          const fsm::StateMachine& machine) {
  const ScenarioKind kind = scenario_kind(parsed);
  proto::TaskPlan plan;
  plan.parsed_instruction = parsed;
  plan.environment_check.satisfied = true;
  plan.state_machine = machine;

  using proto::AgentId;
  auto subtask = [](std::string id, AgentId receiver, std::string description,
                    std::optional<std::string> symbol = std::nullopt,
                    std::optional<std::string> state = std::nullopt) {
    proto::Subtask t;
    t.id = std::move(id);
    t.receiver = receiver;
    t.description = std::move(description);
    t.input_symbol = std::move(symbol);
    t.resulting_state = std::move(state);
    return t;
  };

  if (kind == ScenarioKind::TitrationPh || kind == ScenarioKind::TitrationColor) {
    plan.subtasks = {
        subtask("t1", AgentId::VisionSupervisor,
                "continuously monitor the experimental process and determine "
                "the current state"),
        subtask("t2", AgentId::VisionSupervisor,
                "record the reading and cumulative titrant volume at each "
                "stable moment",
                "sigma_record"),
        subtask("t3", AgentId::VisionSupervisor,
                "drive the state machine evolution from agent reports"),
        subtask("t4", AgentId::VisionSupervisor,
                "activate the statistics-based quantity logger when the "
                "ready-for-titration state is reached"),
        subtask("t5", AgentId::ActionAgent,
                "grasp the pipette and draw the titrant", "sigma_draw",
                "q2_drawn"),
        subtask("t6", AgentId::AudioSupervisor,
                "monitor droplet acoustic events and accumulate audio volume "
                "estimates",
                "sigma_audio_detect", "q4_titrating"),
        subtask("t7", AgentId::Summarizer,
                "generate the structured report from the recorded data",
                "sigma_verify", "q_accept"),
    };
    plan.dependencies = {{"t2", {"t1"}}, {"t3", {"t1"}}, {"t4", {"t3"}},
                         {"t5", {"t1"}}, {"t6", {"t1"}},
                         {"t7", {"t2", "t5", "t6"}}};
    plan.expected_transitions = {
        {"q0", "sigma_grasp", "q1_grasped", "t5"},
        {"q1_grasped", "sigma_draw", "q2_drawn", "t5"},
        {"q2_drawn", "sigma_titrate", "q3_ready", "t3"},
        {"q3_ready", "sigma_audio_detect", "q4_titrating", "t6"},
        {"q4_titrating", "sigma_stable", "q5_waiting_stable", "t3"},
        {"q5_waiting_stable", "sigma_titrate", "q4_titrating", "t3"},
        {"q4_titrating", "sigma_endpoint", "q6_complete", "t3"},
        {"q5_waiting_stable", "sigma_endpoint", "q6_complete", "t3"},
        {"q3_ready", "sigma_endpoint", "q6_complete", "t3"},
        {"q6_complete", "sigma_verify", "q_accept", "t7"},
    };
    plan.statistics_logger = {true, "q3_ready", AgentId::VisionSupervisor,
                              {"t5"}};
  } else {
    plan.subtasks = {
        subtask("t1", AgentId::VisionSupervisor,
                "continuously monitor the experimental process and determine "
                "the current state"),
        subtask("t2", AgentId::VisionSupervisor,
                "record the balance reading while pouring", "sigma_record"),
        subtask("t3", AgentId::VisionSupervisor,
                "drive the state machine evolution from agent reports"),
        subtask("t4", AgentId::VisionSupervisor,
                "activate the statistics-based quantity logger after the "
                "reagent bottle is grasped"),
        subtask("t5", AgentId::ActionAgent,
                "grasp the reagent bottle, add the solvent after weighing and "
                "start the stirrer",
                "sigma_stir", "q4_dissolving"),
        subtask("t6", AgentId::AudioSupervisor,
                "monitor grain pour acoustic events and accumulate audio mass "
                "estimates"),
        subtask("t7", AgentId::Summarizer,
                "generate the structured report from the recorded data",
                "sigma_verify", "q_accept"),
    };
    plan.dependencies = {{"t2", {"t1"}}, {"t3", {"t1"}}, {"t4", {"t3"}},
                         {"t5", {"t1"}}, {"t6", {"t1"}},
                         {"t7", {"t2", "t5", "t6"}}};
    plan.expected_transitions = {
        {"q0", "sigma_grasp", "q1_grasped", "t5"},
        {"q1_grasped", "sigma_weigh", "q2_weighed", "t3"},
        {"q2_weighed", "sigma_dispense", "q3_solvent_added", "t5"},
        {"q3_solvent_added", "sigma_stir", "q4_dissolving", "t5"},
        {"q4_dissolving", "sigma_dissolved", "q5_complete", "t3"},
        {"q5_complete", "sigma_verify", "q_accept", "t7"},
    };
    plan.statistics_logger = {true, "q1_grasped", AgentId::VisionSupervisor,
                              {"t5"}};
  }
  plan.high_confidence_recorder = {
      true,
      "experiment_start",
      "experiment_end",
      {"statistical_estimates", "audio_estimates", "state_transitions",
       "anomaly_reports"}};
  return plan;
}

proto::TaskPlan compile(const std::string& instruction,
                        const GrammarProfile& grammar,
                        const Inventory& inventory) {
  proto::ParsedInstruction parsed = parse_instruction(instruction, grammar);
  proto::EnvironmentCheck check = check_environment(parsed, inventory);
  fsm::StateMachine machine = build_state_machine(parsed);
  proto::TaskPlan plan = decompose(parsed, machine);
  plan.environment_check = check;
  auto diagnostics = proto::validate_plan(plan);
  if (!diagnostics.empty()) {
    std::string detail = "emitted plan failed validation:";
    for (const auto& d : diagnostics) detail += " [" + d.code + "] " + d.detail;
    throw Error(detail);
  }
  return plan;
}

}  // namespace chemlab::planner
