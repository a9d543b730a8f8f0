#pragma once

#include <filesystem>
#include <optional>

#include "chemlab/report.hpp"
#include "chemlab/scenario.hpp"

namespace chemlab::run {

// Exit codes shared with the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitEnvironment = 2;
inline constexpr int kExitEscalated = 3;

struct RunResult {
  int exit_code = kExitOk;
  std::string feedback;  // environment-check text on exit 2
  proto::TaskPlan plan;
  fusion::Datastore datastore;
  std::vector<fsm::TransitionRecord> history;
  std::optional<analysis::AnalysisResult> analysis;
  analysis::TitrationCurve curve;  // measured (cumulative volume, reading)
  nlohmann::json report;
  report::RunInfo info;
  // Ground truth and module totals for the test suites.
  double plant_dispensed_ml = 0.0;
  std::size_t plant_droplets = 0;
  double plant_total_closure_mm = 0.0;
  double balance_final_g = 0.0;
  double sim_seconds = 0.0;
  bool accepted = false;
  std::vector<std::filesystem::path> manifest;
};

struct RunOptions {
  std::optional<std::uint64_t> seed_override;
  std::filesystem::path out_dir;
  bool write_files = true;
  std::vector<std::string> enabled_faults;  // names from the scenario file
};

RunResult run_scenario(const Scenario& scenario, const RunOptions& options);

struct ReplicateResult {
  std::vector<RunResult> runs;
  analysis::StdDevSummary stddev;
  analysis::TitrationCurve theory;
  std::vector<double> recovered_pka_mean;
  int exit_code = kExitOk;
};

// Runs seeds base..base+n-1, then the replicate std-dev study on a common
// grid against the noiseless theoretical curve.
ReplicateResult run_replicates(const Scenario& scenario, int n,
                               std::uint64_t base_seed,
                               const RunOptions& options);

}  // namespace chemlab::run
