#pragma once

#include <optional>
#include <string>
#include <vector>

#include "chemlab/analysis.hpp"
#include "chemlab/fsm.hpp"
#include "chemlab/fusion.hpp"
#include "chemlab/protocol.hpp"

namespace chemlab::report {

// The eleven report module keys, in emission order.
const std::vector<std::string>& module_keys();

struct Snapshot {
  double timestamp = 0.0;
  std::string state;
  std::string label;   // "initial", "logger_activated", "endpoint", ...
  double reading = 0.0;
  double cumulative = 0.0;
};

// Everything the summarizer needs beyond the datastore and the plan.
struct RunInfo {
  std::string scenario_name;
  std::string instruction;
  std::uint64_t seed = 0;
  double start_time_s = 0.0;
  double end_time_s = 0.0;
  bool accepted = false;
  bool aborted = false;
  double initial_reading = 0.0;
  double final_reading = 0.0;
  double temperature_c = 25.0;
  double audio_total = 0.0;
  double audio_confidence = 0.0;
  double stat_total = 0.0;
  double stat_confidence = 0.9;
  int droplet_events = 0;
  std::vector<Snapshot> snapshots;
  // Scenario-specific results; unset fields stay out of the report.
  std::optional<double> theoretical_equivalence_ml;
  std::optional<double> endpoint_volume_ml;     // complexometric flip volume
  std::optional<double> derived_concentration;  // back-computed molarity
  std::optional<double> reference_concentration;
  std::optional<double> target_mass_g;
  std::optional<double> final_mass_g;
  nlohmann::json scenario_echo;
};

// Builds the structured report; throws IncompleteRun when a mandatory data
// requirement from the parsed instruction has no backing data.
nlohmann::json generate_report(
    const fusion::Datastore& datastore, const proto::TaskPlan& plan,
    const std::vector<fsm::TransitionRecord>& history,
    const std::optional<analysis::AnalysisResult>& analysis,
    const RunInfo& info);

std::string to_markdown(const nlohmann::json& report);

}  // namespace chemlab::report
