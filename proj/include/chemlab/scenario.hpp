#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "chemlab/analysis.hpp"
#include "chemlab/controller.hpp"
#include "chemlab/fusion.hpp"
#include "chemlab/planner.hpp"
#include "chemlab/plant.hpp"
#include "chemlab/supervisors.hpp"

namespace chemlab::run {

// One self-contained scenario file: instruction, bench inventory, plant and
// module parameters, declared faults, seed. No environment variables.
struct Scenario {
  std::string name;
  std::string instruction;
  std::string notes;
  std::uint64_t seed = 1;
  int replicates = 1;
  double max_sim_s = 36000.0;

  planner::GrammarProfile grammar = planner::GrammarProfile::defaults();
  planner::Inventory inventory;

  plant::ChemistrySetup chemistry;
  plant::PlantConfig plant_config;
  control::ControllerConfig controller;
  agents::StabilityConfig stability;
  double endpoint_tolerance = 0.05;
  double endpoint_hold_s = 5.0;
  double smooth_window_s = 1.0;
  double audio_timeout_s = 10.0;
  double audio_baseline_confidence = 0.7;
  double sensor_channel_confidence = 0.95;
  fusion::FusionConfig fusion_config;
  analysis::AnalysisConfig analysis_config;
  double ph_series_every_s = 0.5;
  double record_every_s = 1.0;

  struct DeclaredFault {
    plant::FaultSpec spec;
    bool enabled = false;
  };
  std::vector<DeclaredFault> faults;

  std::map<std::string, double> action_durations = {
      {"sigma_grasp", 3.0},
      {"sigma_draw", 5.0},
      {"sigma_dispense", 4.0},
      {"sigma_stir", 1.0},
  };

  nlohmann::json raw;  // the loaded file, echoed into the report

  static Scenario load(const std::filesystem::path& path);
  static Scenario from_json(const nlohmann::json& j);
};

}  // namespace chemlab::run
