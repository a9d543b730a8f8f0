#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "chemlab/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"chemlab: seeded closed-loop laboratory simulation runner"};

  std::string scenario_path;
  std::string out_dir = "out";
  std::string format = "both";
  int replicates = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::vector<std::string> faults;

  app.add_option("--scenario", scenario_path, "Scenario config file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Seed override");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--replicates", replicates,
                 "Run N seeded replicates plus the std-dev study (N >= 2)");
  app.add_option("--format", format, "Report format: json|md|both")
      ->check(CLI::IsMember({"json", "md", "both"}));
  app.add_option("--fault", faults,
                 "Enable a named fault declared in the scenario file");

  CLI11_PARSE(app, argc, argv);
  seed_set = seed_opt->count() > 0;

  try {
    chemlab::run::Scenario scenario =
        chemlab::run::Scenario::load(scenario_path);
    chemlab::run::RunOptions options;
    options.out_dir = out_dir;
    options.write_files = true;
    options.enabled_faults = faults;
    if (seed_set) options.seed_override = seed;

    if (replicates == 1) {
      std::cerr << "usage error: --replicates needs N >= 2\n";
      return chemlab::run::kExitConfigError;
    }

    if (replicates >= 2) {
      const std::uint64_t base = seed_set ? seed : scenario.seed;
      auto result =
          chemlab::run::run_replicates(scenario, replicates, base, options);
      for (std::size_t i = 0; i < result.runs.size(); ++i) {
        const auto& run = result.runs[i];
        std::printf("replicate %zu: exit=%d%s\n", i, run.exit_code,
                    run.exit_code == 0 ? "" : " (failed)");
      }
      if (result.exit_code == 0) {
        std::printf("plateau sigma mean=%.4f max=%.4f; transition max=%.4f\n",
                    result.stddev.plateau_mean, result.stddev.plateau_max,
                    result.stddev.transition_max);
        for (std::size_t i = 0; i < result.recovered_pka_mean.size(); ++i) {
          std::printf("mean recovered pKa%zu = %.3f\n", i + 1,
                      result.recovered_pka_mean[i]);
        }
      }
      return result.exit_code;
    }

    auto result = chemlab::run::run_scenario(scenario, options);
    if (result.exit_code == chemlab::run::kExitEnvironment) {
      std::cout << result.feedback << "\n";
      return result.exit_code;
    }
    if (result.exit_code != chemlab::run::kExitOk) {
      std::cerr << "run failed: " << result.feedback << "\n";
      return result.exit_code;
    }

    // Trim the manifest per --format.
    if (format == "json") {
      std::filesystem::remove(options.out_dir / "report.md");
    } else if (format == "md") {
      std::filesystem::remove(options.out_dir / "report.json");
    }
    std::printf("completed: state=%s, records=%zu, total=%.4f\n",
                result.history.empty() ? "q0" : result.history.back().to.c_str(),
                result.datastore.records().size(),
                result.datastore.cumulative_quantity());
    for (const auto& path : result.manifest) {
      std::printf("  wrote %s\n", path.string().c_str());
    }
    return chemlab::run::kExitOk;
  } catch (const chemlab::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return chemlab::run::kExitConfigError;
  } catch (const chemlab::Error& e) {
    std::cerr << e.what() << "\n";
    return chemlab::run::kExitConfigError;
  }
}
