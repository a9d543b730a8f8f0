#include "chemlab/report.hpp"

#include <cmath>
#include <sstream>

namespace chemlab::report {

namespace {

using fusion::round_confidence;
using fusion::round_ml;

nlohmann::json quantity_json(const proto::Quantity& q) {
  if (!q.text.empty()) return {{"text", q.text}};
  return {{"value", q.value}, {"unit", q.unit}};
}

}  // namespace

const std::vector<std::string>& module_keys() {
  static const std::vector<std::string> keys = {
      "experiment_metadata",      "experimental_parameters",
      "operational_procedure",    "state_machine_evolution",
      "process_data",             "chemical_quantity_records",
      "key_event_logs",           "anomaly_records",
      "experimental_results",     "visual_documentation",
      "reproducibility_guide",
  };
  return keys;
}

nlohmann::json generate_report(
    const fusion::Datastore& datastore, const proto::TaskPlan& plan,
    const std::vector<fsm::TransitionRecord>& history,
    const std::optional<analysis::AnalysisResult>& analysis,
    const RunInfo& info) {
  if (!info.accepted && !info.aborted) {
    throw IncompleteRun("run neither completed nor explicitly aborted");
  }
  // Mandatory data requirements from the parsed instruction.
  for (const auto& req : plan.parsed_instruction.data_requirements) {
    if (req.frequency == "per_drop" &&
        (req.quantity == "volume" || req.quantity == "mass") &&
        datastore.records().empty()) {
      throw IncompleteRun(req.quantity + " " + req.frequency);
    }
    if (req.quantity == "pH" && req.frequency == "per_drop" &&
        datastore.ph_series().empty()) {
      throw IncompleteRun("pH per_drop");
    }
  }

  nlohmann::json report(nlohmann::json::value_t::object);

  report["experiment_metadata"] = {
      {"scenario", info.scenario_name},
      {"instruction", info.instruction},
      {"seed", info.seed},
      {"start_time_s", info.start_time_s},
      {"end_time_s", round_ml(info.end_time_s)},
      {"duration_s", round_ml(info.end_time_s - info.start_time_s)},
      {"operator", "automated bench"},
      {"reagent_batches", [&] {
         nlohmann::json batches = nlohmann::json::array();
         for (const auto& r : plan.parsed_instruction.reagents) {
           batches.push_back(r);
         }
         return batches;
       }()},
  };

  nlohmann::json initial(nlohmann::json::value_t::object);
  for (const auto& [name, q] : plan.parsed_instruction.initial_parameters) {
    initial[name] = quantity_json(q);
  }
  nlohmann::json target(nlohmann::json::value_t::object);
  for (const auto& [name, q] : plan.parsed_instruction.target_parameters) {
    target[name] = quantity_json(q);
  }
  report["experimental_parameters"] = {
      {"initial_conditions", std::move(initial)},
      {"target_conditions", std::move(target)},
      {"chemical_system", plan.parsed_instruction.chemical_system},
      {"measured_initial_reading", round_ml(info.initial_reading)},
  };

  nlohmann::json subtasks = nlohmann::json::array();
  for (const auto& t : plan.subtasks) {
    nlohmann::json entry = {{"id", t.id},
                            {"receiver", proto::to_string(t.receiver)},
                            {"description", t.description}};
    if (t.input_symbol) entry["input_symbol"] = *t.input_symbol;
    if (t.resulting_state) entry["resulting_state"] = *t.resulting_state;
    subtasks.push_back(std::move(entry));
  }
  report["operational_procedure"] = {
      {"subtasks", std::move(subtasks)},
      {"dependencies", plan.dependencies},
  };

  nlohmann::json transitions = nlohmann::json::array();
  for (const auto& r : history) {
    transitions.push_back({{"from", r.from},
                           {"symbol", r.symbol},
                           {"to", r.to},
                           {"timestamp", round_ml(r.timestamp)},
                           {"emitter", r.emitter}});
  }
  report["state_machine_evolution"] = {
      {"transitions", std::move(transitions)},
      {"transition_count", history.size()},
      {"final_state", history.empty() ? plan.state_machine.initial
                                      : history.back().to},
      {"accepted", info.accepted},
  };

  report["process_data"] = {
      {"ph_samples", datastore.ph_series().size()},
      {"initial_reading", round_ml(info.initial_reading)},
      {"final_reading", round_ml(info.final_reading)},
      {"temperature_c", round_ml(info.temperature_c)},
      {"chart_files",
       {"curve.csv", "d1.csv", "d2.csv", "zoom.csv"}},
  };

  double mean_conf = 0.0;
  std::size_t fused_count = 0;
  for (const auto& r : datastore.records()) {
    if (r.value) {
      mean_conf += r.confidence;
      ++fused_count;
    }
  }
  if (fused_count > 0) mean_conf /= static_cast<double>(fused_count);
  report["chemical_quantity_records"] = {
      {"audio_total", round_ml(info.audio_total)},
      {"audio_confidence", round_confidence(info.audio_confidence)},
      {"stat_total", round_ml(info.stat_total)},
      {"stat_confidence", round_confidence(info.stat_confidence)},
      {"fused_total", round_ml(datastore.cumulative_quantity())},
      {"fused_records", datastore.records().size()},
      {"mean_fused_confidence", round_confidence(mean_conf)},
  };

  report["key_event_logs"] = {
      {"droplet_events", info.droplet_events},
      {"state_transitions", history.size()},
      {"records_written", datastore.records().size()},
  };

  if (datastore.anomalies().empty()) {
    report["anomaly_records"] = "none";
  } else {
    nlohmann::json anomalies = nlohmann::json::array();
    for (const auto& a : datastore.anomalies()) {
      anomalies.push_back({{"timestamp", round_ml(a.timestamp)},
                           {"type", a.code},
                           {"detail", a.detail},
                           {"response", a.response},
                           {"resolution", a.resolution}});
    }
    report["anomaly_records"] = std::move(anomalies);
  }

  nlohmann::json results = {
      {"final_reading", round_ml(info.final_reading)},
      {"total_volume_ml", round_ml(datastore.cumulative_quantity())},
  };
  if (analysis) {
    nlohmann::json eq_points = nlohmann::json::array();
    for (const auto& e : analysis->equivalence_points) {
      nlohmann::json entry = {{"volume_ml", round_ml(e.volume_ml)},
                              {"ph", round_ml(e.ph)},
                              {"d1_peak", round_ml(e.d1_peak)}};
      if (info.theoretical_equivalence_ml) {
        const double reference = *info.theoretical_equivalence_ml;
        // Deviation vs the first stoichiometric point and its multiples.
        const double k = std::max(1.0, std::round(e.volume_ml / reference));
        entry["reference_volume_ml"] = round_ml(reference * k);
        entry["deviation_percent"] = round_ml(
            100.0 * std::abs(e.volume_ml - reference * k) / (reference * k));
      }
      eq_points.push_back(std::move(entry));
    }
    results["equivalence_points"] = std::move(eq_points);
    nlohmann::json pkas = nlohmann::json::array();
    for (const auto& p : analysis->pka) {
      nlohmann::json entry = {{"v_half_ml", round_ml(p.v_half_ml)},
                              {"ph_at_half", round_ml(p.ph_at_half)},
                              {"applicable", p.applicable}};
      if (p.applicable) {
        entry["pka"] = round_ml(p.pka);
      } else {
        entry["note"] = p.note;
      }
      pkas.push_back(std::move(entry));
    }
    results["pka"] = std::move(pkas);
  }
  if (info.endpoint_volume_ml) {
    results["endpoint_volume_ml"] = round_ml(*info.endpoint_volume_ml);
  }
  if (info.derived_concentration) {
    results["derived_concentration_mol_l"] =
        round_confidence(*info.derived_concentration);
    if (info.reference_concentration) {
      results["concentration_error_percent"] = round_ml(
          100.0 *
          std::abs(*info.derived_concentration - *info.reference_concentration) /
          *info.reference_concentration);
    }
  }
  if (info.target_mass_g && info.final_mass_g) {
    results["target_mass_g"] = round_ml(*info.target_mass_g);
    results["final_mass_g"] = round_ml(*info.final_mass_g);
    results["mass_error_g"] =
        round_ml(std::abs(*info.final_mass_g - *info.target_mass_g));
  }
  report["experimental_results"] = std::move(results);

  nlohmann::json snapshots = nlohmann::json::array();
  for (const auto& s : info.snapshots) {
    snapshots.push_back({{"timestamp", round_ml(s.timestamp)},
                         {"state", s.state},
                         {"label", s.label},
                         {"reading", round_ml(s.reading)},
                         {"cumulative", round_ml(s.cumulative)}});
  }
  report["visual_documentation"] = {{"snapshots", std::move(snapshots)}};

  nlohmann::json steps = nlohmann::json::array();
  for (const auto& intent : plan.parsed_instruction.operation_intent) {
    steps.push_back(intent);
  }
  report["reproducibility_guide"] = {
      {"seed", info.seed},
      {"scenario_config", info.scenario_echo},
      {"procedure", std::move(steps)},
      {"notes",
       "rerun with the same scenario file and seed to reproduce the datastore "
       "byte for byte"},
  };

  return report;
}

std::string to_markdown(const nlohmann::json& report) {
  std::ostringstream md;
  md << "# Experiment report\n\n";
  const auto& meta = report.at("experiment_metadata");
  md << "- Scenario: " << meta.at("scenario").get<std::string>() << "\n";
  md << "- Seed: " << meta.at("seed") << "\n";
  md << "- Duration: " << meta.at("duration_s") << " s (simulated)\n\n";
  md << "## Instruction\n\n" << meta.at("instruction").get<std::string>()
     << "\n\n";

  md << "## Parameters\n\n";
  md << "```json\n" << report.at("experimental_parameters").dump(2)
     << "\n```\n\n";

  md << "## Procedure\n\n";
  for (const auto& t : report.at("operational_procedure").at("subtasks")) {
    md << "- **" << t.at("id").get<std::string>() << "** ("
       << t.at("receiver").get<std::string>() << "): "
       << t.at("description").get<std::string>() << "\n";
  }
  md << "\n## State machine evolution\n\n";
  const auto& evolution = report.at("state_machine_evolution");
  md << "- Transitions: " << evolution.at("transition_count") << "\n";
  md << "- Final state: " << evolution.at("final_state").get<std::string>()
     << (evolution.at("accepted").get<bool>() ? " (accepting)" : "") << "\n\n";

  md << "## Quantity records\n\n";
  md << "```json\n" << report.at("chemical_quantity_records").dump(2)
     << "\n```\n\n";

  md << "## Anomalies\n\n";
  const auto& anomalies = report.at("anomaly_records");
  if (anomalies.is_string()) {
    md << "none\n\n";
  } else {
    for (const auto& a : anomalies) {
      md << "- t=" << a.at("timestamp") << " "
         << a.at("type").get<std::string>() << " ("
         << a.at("resolution").get<std::string>() << "): "
         << a.at("detail").get<std::string>() << "\n";
    }
    md << "\n";
  }

  md << "## Results\n\n";
  md << "```json\n" << report.at("experimental_results").dump(2) << "\n```\n\n";

  md << "## Reproducibility\n\n";
  md << report.at("reproducibility_guide").at("notes").get<std::string>()
     << "\n";
  return md.str();
}

}  // namespace chemlab::report
