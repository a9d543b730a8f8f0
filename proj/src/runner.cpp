#include "chemlab/runner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace chemlab::run {

namespace {

using agents::Decision;
using fusion::round_ml;

// Scripted stand-in for the action policy: commands take a fixed duration,
// then report completion back to the Vision Supervisor.
class ActionAgentSim {
 public:
  ActionAgentSim(const std::map<std::string, double>& durations,
                 proto::MessageBus& bus)
      : durations_(durations), bus_(&bus) {}

  struct Effects {
    double dispense_solvent_ml = 0.0;
    bool stir = false;
  };

  // Consumes queued commands and reports completions. Returns the physical
  // side effects to apply on the next plant tick.
  Effects step(double now, double solvent_volume_ml) {
    Effects effects;
    effects.stir = stirring_;
    for (const auto& msg : bus_->poll(proto::AgentId::ActionAgent)) {
      if (!msg.payload) continue;
      if (msg.payload->value("kind", "") != "command") continue;
      const std::string symbol = msg.payload->value("symbol", "");
      if (symbol.empty() || busy_) continue;
      busy_ = Pending{symbol, msg.subtask,
                      now + duration_of(symbol)};
    }
    if (busy_ && now >= busy_->ready_at) {
      if (busy_->symbol == "sigma_dispense") {
        effects.dispense_solvent_ml = solvent_volume_ml;
      } else if (busy_->symbol == "sigma_stir") {
        stirring_ = true;
        effects.stir = true;
      }
      proto::AgentMessage done;
      done.sender = proto::AgentId::ActionAgent;
      done.receiver = proto::AgentId::VisionSupervisor;
      done.subtask = busy_->subtask;
      done.q_target = "";
      done.payload =
          proto::make_completion(busy_->subtask, busy_->symbol, true, now);
      done.sent_at = now;
      bus_->send(std::move(done));
      busy_.reset();
    }
    return effects;
  }

 private:
  struct Pending {
    std::string symbol;
    std::string subtask;
    double ready_at;
  };

  double duration_of(const std::string& symbol) const {
    auto it = durations_.find(symbol);
    return it == durations_.end() ? 1.0 : it->second;
  }

  std::map<std::string, double> durations_;
  proto::MessageBus* bus_;
  std::optional<Pending> busy_;
  bool stirring_ = false;
};

std::set<fsm::StateId> operation_states_for(
    plant::ChemistrySetup::Kind kind) {
  if (kind == plant::ChemistrySetup::Kind::Weighing) {
    return {"q1_grasped"};
  }
  return {"q3_ready", "q4_titrating"};
}

void write_csv(const std::filesystem::path& path,
               const std::string& header,
               const std::vector<std::array<double, 2>>& rows) {
  std::ofstream out(path);
  out << header << "\n";
  char line[64];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%.4f,%.6g\n", r[0], r[1]);
    out << line;
  }
}

}  // namespace

RunResult run_scenario(const Scenario& scenario, const RunOptions& options) {
  RunResult result;
  const std::uint64_t seed =
      options.seed_override ? *options.seed_override : scenario.seed;
  const double dt = scenario.plant_config.dt;

  // --- Planner phase ---------------------------------------------------
  proto::ParsedInstruction parsed;
  try {
    parsed = planner::parse_instruction(scenario.instruction, scenario.grammar);
  } catch (const Error& e) {
    result.exit_code = kExitConfigError;
    result.feedback = e.what();
    return result;
  }
  proto::EnvironmentCheck env =
      planner::check_environment(parsed, scenario.inventory);
  if (!env.satisfied) {
    result.exit_code = kExitEnvironment;
    result.feedback = env.user_feedback.value_or("environment check failed");
    return result;
  }
  const fsm::StateMachine machine = planner::build_state_machine(parsed);
  proto::TaskPlan plan = planner::decompose(parsed, machine);
  plan.environment_check = env;
  {
    auto diagnostics = proto::validate_plan(plan);
    if (!diagnostics.empty()) {
      result.exit_code = kExitConfigError;
      result.feedback = "plan validation failed: " + diagnostics.front().detail;
      return result;
    }
  }
  result.plan = plan;

  const planner::ScenarioKind kind = planner::scenario_kind(parsed);
  const bool is_weighing = kind == planner::ScenarioKind::Weighing;
  const bool is_color = kind == planner::ScenarioKind::TitrationColor;
  const bool is_ph = kind == planner::ScenarioKind::TitrationPh;

  // --- Assembly ---------------------------------------------------------
  plant::Plant world(scenario.plant_config, scenario.chemistry, seed);
  for (const auto& fault : scenario.faults) {
    const bool enabled =
        fault.enabled ||
        std::find(options.enabled_faults.begin(), options.enabled_faults.end(),
                  fault.spec.name) != options.enabled_faults.end();
    if (enabled) world.inject_fault(fault.spec);
  }

  control::ControllerConfig controller_config = scenario.controller;
  controller_config.mode = is_weighing ? control::ControllerConfig::Mode::Pour
                                       : control::ControllerConfig::Mode::Dispense;
  if (is_ph) {
    controller_config.target = parsed.target_parameters.at("pH").value;
  } else if (is_weighing) {
    controller_config.target = parsed.target_parameters.at("mass").value;
    controller_config.epsilon = std::max(scenario.controller.epsilon, 0.05);
    controller_config.fine_threshold = 0.3;
  } else {
    controller_config.has_target = false;
  }
  control::PrecisionController controller(controller_config);

  agents::VisionConfig vision_config;
  vision_config.stability = scenario.stability;
  vision_config.endpoint.tolerance = scenario.endpoint_tolerance;
  vision_config.endpoint.hold_s = scenario.endpoint_hold_s;
  vision_config.smooth_window_s = scenario.smooth_window_s;
  if (is_ph) {
    vision_config.watch = agents::VisionConfig::Watch::Ph;
    vision_config.endpoint.target = controller_config.target;
  } else if (is_color) {
    vision_config.watch = agents::VisionConfig::Watch::Color;
    vision_config.endpoint.target_color =
        parsed.target_parameters.at("color").text;
    vision_config.endpoint.hold_s = std::min(scenario.endpoint_hold_s, 2.0);
  } else {
    vision_config.watch = agents::VisionConfig::Watch::Balance;
    vision_config.endpoint.target = controller_config.target;
    vision_config.endpoint.tolerance = 0.12;
    vision_config.endpoint.hold_s = 1.0;
  }
  agents::VisionSupervisor vision(machine, plan, vision_config);

  agents::AudioSupervisorConfig audio_config;
  audio_config.nominal_quantity = is_weighing
                                      ? scenario.plant_config.grain_g
                                      : scenario.plant_config.droplet.volume_ml;
  audio_config.timeout_s = scenario.audio_timeout_s;
  audio_config.baseline_confidence = scenario.audio_baseline_confidence;
  audio_config.dispensing_states =
      operation_states_for(scenario.chemistry.kind);
  agents::AudioSupervisor audio(audio_config);

  proto::MessageBus bus;
  bus.bind_plan(&result.plan);
  ActionAgentSim action_agent(scenario.action_durations, bus);

  fusion::Datastore datastore;
  const std::set<fsm::StateId> operation_states =
      operation_states_for(scenario.chemistry.kind);
  const std::string quantity_name = is_weighing ? "mass" : "volume";
  const std::string quantity_unit = is_weighing ? "g" : "mL";

  // Planner dispatch: one assignment message per subtask.
  for (const auto& t : plan.subtasks) {
    proto::AgentMessage msg;
    msg.sender = proto::AgentId::Planner;
    msg.receiver = t.receiver;
    msg.subtask = t.id;
    msg.q_target = t.resulting_state.value_or(machine.initial);
    msg.sent_at = 0.0;
    bus.send(std::move(msg));
  }

  // --- Tick loop ----------------------------------------------------------
  report::RunInfo info;
  info.scenario_name = scenario.name;
  info.instruction = scenario.instruction;
  info.seed = seed;
  info.scenario_echo = scenario.raw;

  bool controller_active = false;
  bool controller_stopped = false;
  bool resume_pending = false;
  bool anomaly_pending = false;
  bool escalated = false;
  bool completed = false;
  std::string escalation_detail;

  plant::ActuatorCommand next_command;
  double solvent_volume_ml = 0.0;
  if (auto it = parsed.initial_parameters.find("solvent_volume");
      it != parsed.initial_parameters.end()) {
    solvent_volume_ml = it->second.value;
  }

  double last_ph_sample = -1.0e9;
  double last_record_time = -1.0e9;
  double last_recorded_stat = 0.0;
  double last_recorded_balance = 0.0;
  double cumulative_audio = 0.0;
  double cumulative_stat = 0.0;
  double pending_audio_increment = 0.0;
  double pending_audio_confidence = scenario.audio_baseline_confidence;
  int pending_expected_events = 0;
  bool record_stable_request = false;
  std::string record_label;
  bool first_frame = true;
  bool endpoint_recorded = false;

  const auto snapshot = [&](const std::string& label, double reading,
                            double cumulative, double now) {
    info.snapshots.push_back(
        {now, vision.cursor().current(), label, reading, cumulative});
  };

  const std::size_t max_ticks =
      static_cast<std::size_t>(scenario.max_sim_s / dt);
  for (std::size_t tick = 0; tick < max_ticks && !completed && !escalated;
       ++tick) {
    // 1. Physics under the command assembled last tick.
    const bool dispensing_active =
        controller_active && !controller_stopped &&
        controller.phase() == control::Phase::Motion &&
        (next_command.closure_rate_mm_s > 0.0 ||
         next_command.pour_rate_g_s > 0.0);
    plant::SensorFrame frame = world.tick(dt, next_command);
    const double now = frame.timestamp;
    next_command = {};

    if (first_frame) {
      first_frame = false;
      info.start_time_s = now;
      info.initial_reading = is_weighing ? frame.balance_g : frame.ph;
      info.temperature_c = frame.temperature_c;
      snapshot("initial", info.initial_reading, 0.0, now);
    }

    // 2. Audio supervision (before Vision, same-tick symbol availability).
    auto audio_out = audio.step(frame.events, vision.cursor().current(),
                                dispensing_active, now);
    pending_expected_events += audio_out.expected_events;
    pending_audio_increment += audio_out.increment;
    if (audio_out.expected_events > 0) {
      pending_audio_confidence = audio_out.confidence;
    }
    if (audio_out.first_detection) {
      proto::AgentMessage detect;
      detect.sender = proto::AgentId::AudioSupervisor;
      detect.receiver = proto::AgentId::VisionSupervisor;
      detect.subtask = "t6";
      detect.q_target = "q4_titrating";
      detect.payload =
          proto::make_completion("t6", "sigma_audio_detect", true, now);
      detect.sent_at = now;
      bus.send(std::move(detect));
    }
    for (const auto& code : audio_out.anomaly_codes) {
      proto::AgentMessage anomaly;
      anomaly.sender = proto::AgentId::AudioSupervisor;
      anomaly.receiver = proto::AgentId::VisionSupervisor;
      anomaly.subtask = "t6";
      anomaly.q_target = vision.cursor().current();
      anomaly.payload = proto::make_anomaly(
          code, "acoustic monitoring flagged " + code, now);
      anomaly.sent_at = now;
      bus.send(std::move(anomaly));
    }

    // 3. Vision supervision.
    agents::VisionSupervisor::Input vin;
    vin.frame = frame;
    vin.inbox = bus.poll(proto::AgentId::VisionSupervisor);
    vin.controller_phase = controller.phase();
    vin.controller_active = controller_active && !controller_stopped;
    vin.controller_escalated = controller.escalated();
    vin.now = now;
    std::vector<Decision> decisions;
    try {
      decisions = vision.step(vin);
    } catch (const UndefinedTransition& e) {
      escalated = true;
      escalation_detail = e.what();
      break;
    }

    for (const auto& d : decisions) {
      switch (d.kind) {
        case Decision::Kind::ActivateLogger:
          controller_active = true;
          snapshot("logger_activated",
                   is_weighing ? frame.balance_g : frame.ph,
                   datastore.cumulative_quantity(), now);
          break;
        case Decision::Kind::ResumeLogger:
          resume_pending = true;
          break;
        case Decision::Kind::StopLogger:
          controller_stopped = true;
          break;
        case Decision::Kind::FlagAnomaly:
          anomaly_pending = true;
          break;
        case Decision::Kind::RecordStable:
          record_stable_request = true;
          record_label = d.code;
          break;
        case Decision::Kind::LogAnomaly: {
          fusion::AnomalyEntry entry;
          entry.timestamp = now;
          entry.code = d.code;
          entry.detail = d.detail.empty() ? d.code : d.detail;
          entry.response = "controller_reset";
          datastore.append_anomaly(std::move(entry));
          break;
        }
        case Decision::Kind::Escalate:
          escalated = true;
          escalation_detail = d.code + ": " + d.detail;
          break;
        case Decision::Kind::ActionCommand: {
          proto::AgentMessage cmd;
          cmd.sender = proto::AgentId::VisionSupervisor;
          cmd.receiver = proto::AgentId::ActionAgent;
          cmd.subtask = "t5";
          const fsm::StateId* target = machine.next_state(
              vision.cursor().current(), d.symbol);
          cmd.q_target = target ? *target : vision.cursor().current();
          cmd.payload = proto::make_command(
              d.symbol, {{"duration_hint_s",
                          scenario.action_durations.count(d.symbol)
                              ? scenario.action_durations.at(d.symbol)
                              : 1.0}});
          cmd.sent_at = now;
          bus.send(std::move(cmd));
          break;
        }
        case Decision::Kind::NotifyComplete:
          completed = true;
          snapshot("accepted", is_weighing ? frame.balance_g : frame.ph,
                   datastore.cumulative_quantity(), now);
          break;
        case Decision::Kind::FireSymbol:
          if (d.symbol == "sigma_endpoint") {
            snapshot("endpoint", is_weighing ? frame.balance_g : frame.ph,
                     datastore.cumulative_quantity(), now);
          }
          break;
      }
    }
    if (escalated) break;

    // 4. Action agent progress; physical effects land next tick.
    auto effects = action_agent.step(now, solvent_volume_ml);
    next_command.dispense_solvent_ml = effects.dispense_solvent_ml;
    next_command.stir = effects.stir && !world.dissolved();

    // 5. Controller step.
    if (controller_active) {
      control::ControllerInput cin;
      cin.measured = is_weighing ? frame.balance_g
                                 : (is_color ? 0.0 : frame.ph);
      cin.anomaly = anomaly_pending;
      cin.resume = resume_pending;
      cin.stable = agents::detect_stability(vision.window(),
                                            scenario.stability) ||
                   is_color;
      cin.stop = controller_stopped;
      cin.dt = dt;
      cin.timestamp = now;
      anomaly_pending = false;
      resume_pending = false;
      auto out = controller.step(cin);
      if (!controller_stopped) {
        next_command.closure_rate_mm_s = out.request.closure_rate_mm_s;
        next_command.retract_rate_mm_s = out.request.retract_rate_mm_s;
        next_command.pour_rate_g_s = out.request.pour_rate_g_s;
      }
      if (out.estimate) {
        proto::AgentMessage estimate;
        estimate.sender = proto::AgentId::StatLogger;
        estimate.receiver = proto::AgentId::Recorder;
        estimate.subtask = plan.statistics_logger.associated_subtasks.empty()
                               ? "t5"
                               : plan.statistics_logger.associated_subtasks[0];
        estimate.q_target = vision.cursor().current();
        estimate.payload = proto::make_estimate(
            "stat", out.estimate->q_stat, quantity_unit,
            out.estimate->confidence, now);
        estimate.sent_at = now;
        bus.send(std::move(estimate));
        cumulative_stat = out.estimate->q_stat;
      }
      if (out.escalated_now) {
        fusion::AnomalyEntry entry;
        entry.timestamp = now;
        entry.code = "controller_escalated";
        entry.detail = "error correction exhausted max retries";
        entry.response = "escalation_to_planner";
        entry.resolution = "escalated";
        datastore.append_anomaly(std::move(entry));
      }
    }

    // 6. Recorder: drain the estimate stream, fuse on record triggers.
    bus.poll(proto::AgentId::Recorder);  // estimates already tracked above
    cumulative_audio = audio.total();

    const bool periodic_due =
        controller_active && now - last_record_time >= scenario.record_every_s;
    const bool droplets_this_tick = !frame.events.empty();
    if (droplets_this_tick || record_stable_request || periodic_due) {
      std::vector<fusion::GatedObservation> gated;
      const bool anomaly_window =
          !datastore.anomalies().empty() &&
          datastore.anomalies().back().timestamp >
              std::max(last_record_time, now - 5.0) &&
          datastore.anomalies().back().resolution == "open";

      fusion::Observation audio_obs{fusion::Channel::Audio,
                                    pending_audio_increment,
                                    pending_audio_confidence, now};
      fusion::Observation stat_obs{fusion::Channel::Stat,
                                   cumulative_stat - last_recorded_stat,
                                   controller.confidence(), now};
      const bool op = operation_states.count(vision.cursor().current()) > 0;
      gated.push_back({audio_obs,
                       fusion::gate_confidence(audio_obs, op, anomaly_window,
                                               scenario.fusion_config)});
      gated.push_back({stat_obs,
                       fusion::gate_confidence(stat_obs, op, anomaly_window,
                                               scenario.fusion_config)});
      if (is_weighing) {
        fusion::Observation sensor_obs{fusion::Channel::Sensor,
                                       frame.balance_g - last_recorded_balance,
                                       scenario.sensor_channel_confidence,
                                       now};
        gated.push_back({sensor_obs,
                         fusion::gate_confidence(sensor_obs, op,
                                                 anomaly_window,
                                                 scenario.fusion_config)});
      }
      auto outcome = fusion::fuse(gated, scenario.fusion_config);

      fusion::FusedRecord record;
      record.timestamp = now;
      record.quantity = quantity_name;
      record.value = outcome.value;
      record.confidence = outcome.confidence;
      for (const auto& g : gated) {
        record.raw[fusion::to_string(g.observation.id)] = {
            g.observation.value, g.observation.confidence_raw,
            g.confidence_gated};
      }
      record.state = vision.cursor().current();
      record.subtask = op ? (plan.statistics_logger.associated_subtasks.empty()
                                 ? "t5"
                                 : plan.statistics_logger
                                       .associated_subtasks[0])
                          : "t1";
      if (outcome.below_threshold) {
        record.anomalies.push_back("data_quality_low_confidence");
        fusion::AnomalyEntry entry;
        entry.timestamp = now;
        entry.code = "data_quality";
        entry.detail = "all observation channels below the confidence threshold";
        entry.response = "record_nulled";
        entry.resolution = "recorded";
        datastore.append_anomaly(std::move(entry));
      }
      // Divergence on cumulative totals; audio quantizes to whole droplets,
      // so the tolerance floor is one droplet volume.
      if (outcome.value) {
        const double projected_total =
            datastore.cumulative_quantity() + *outcome.value;
        const double spread = std::abs(cumulative_audio - cumulative_stat);
        const double tolerance = std::max(
            scenario.fusion_config.divergence_tolerance_frac *
                std::abs(projected_total),
            scenario.fusion_config.droplet_volume_ml);
        if (spread > tolerance && !is_weighing) {
          record.anomalies.push_back("estimate_divergence");
        }
      }
      datastore.record(record);
      if (!endpoint_recorded &&
          (record_label == "color_flip" || record_label == "endpoint")) {
        endpoint_recorded = true;
        info.endpoint_volume_ml = datastore.cumulative_quantity();
      }

      // Curve point: cumulative fused quantity vs the raw reading.
      if (!is_weighing) {
        result.curve.points.push_back(
            {datastore.cumulative_quantity(), frame.ph});
      }

      last_record_time = now;
      last_recorded_stat = cumulative_stat;
      last_recorded_balance = frame.balance_g;
      pending_audio_increment = 0.0;
      pending_audio_confidence = scenario.audio_baseline_confidence;
      pending_expected_events = 0;
      record_stable_request = false;
      record_label.clear();

      // sigma_record stream message (q_target = current state).
      proto::AgentMessage rec;
      rec.sender = proto::AgentId::VisionSupervisor;
      rec.receiver = proto::AgentId::Recorder;
      rec.subtask = "t2";
      rec.q_target = vision.cursor().current();
      rec.payload = proto::make_estimate("fused",
                                         record.value ? *record.value : 0.0,
                                         quantity_unit, record.confidence,
                                         now);
      rec.sent_at = now;
      bus.send(std::move(rec));
    }

    // 7. Raw single-source series at its own cadence.
    if (now - last_ph_sample >= scenario.ph_series_every_s) {
      if (!is_color) {
        datastore.append_ph(now, is_weighing ? frame.balance_g : frame.ph,
                            frame.temperature_c);
      }
      last_ph_sample = now;
    }

    info.final_reading = is_weighing ? frame.balance_g : frame.ph;
    info.end_time_s = now;
  }

  // --- Wrap-up --------------------------------------------------------
  result.history = vision.cursor().history();
  result.accepted = completed && vision.cursor().is_accepting();
  result.plant_dispensed_ml = world.dispensed_volume_ml();
  result.plant_droplets = world.droplet_count();
  result.plant_total_closure_mm = world.total_closure_mm();
  result.balance_final_g = world.balance_mass();
  result.sim_seconds = world.clock();

  info.accepted = result.accepted;
  info.aborted = !result.accepted;
  info.audio_total = audio.total();
  info.audio_confidence = audio.mean_clarity();
  info.stat_total = controller.accumulated();
  info.stat_confidence = controller.confidence();
  info.droplet_events = audio.total_expected_events();
  if (vision.endpoint_fired()) {
    if (!info.endpoint_volume_ml) {
      info.endpoint_volume_ml = datastore.cumulative_quantity();
    }
  }

  if (scenario.chemistry.kind == plant::ChemistrySetup::Kind::AcidBase) {
    // Stoichiometric reference for the first equivalence.
    info.theoretical_equivalence_ml =
        scenario.chemistry.analyte.concentration *
        scenario.chemistry.analyte.volume_l * 1000.0 /
        scenario.chemistry.titrant_mol_l;
  } else if (scenario.chemistry.kind ==
             plant::ChemistrySetup::Kind::Complexometric) {
    if (info.endpoint_volume_ml) {
      info.derived_concentration = scenario.chemistry.edta_mol_l *
                                   *info.endpoint_volume_ml /
                                   scenario.chemistry.ca_volume_ml;
      info.reference_concentration = scenario.chemistry.ca_mol_l;
    }
  } else {
    info.target_mass_g = controller_config.target;
    info.final_mass_g = world.balance_mass();
  }

  if (result.accepted) {
    datastore.resolve_anomaly("audio_event_timeout", "recovered");
    datastore.resolve_anomaly("sensor_timeout", "recovered");
    datastore.resolve_anomaly("unexpected_acoustic_event", "recovered");
  }

  // Curve metadata for the analysis pipeline.
  if (is_ph) {
    result.curve.meta.analyte = scenario.chemistry.analyte.name;
    result.curve.meta.titrant = "strong base";
    result.curve.meta.analyte_kind =
        scenario.chemistry.analyte.kind == chem::AcidKind::Strong ? "strong"
                                                                  : "weak";
    result.curve.meta.titrant_mol_l = scenario.chemistry.titrant_mol_l;
    result.curve.meta.initial_volume_ml =
        scenario.chemistry.analyte.volume_l * 1000.0;
    if (result.accepted && result.curve.points.size() >= 4) {
      result.analysis =
          analysis::analyze_titration(result.curve, scenario.analysis_config);
    }
  }

  result.info = info;
  if (result.accepted) {
    result.report = report::generate_report(datastore, plan, result.history,
                                            result.analysis, info);
  }
  result.exit_code = result.accepted ? kExitOk : kExitEscalated;
  if (!result.accepted && escalation_detail.empty()) {
    escalation_detail = "run did not reach the accepting state in time";
  }
  if (!result.accepted) result.feedback = escalation_detail;

  // --- Artifacts --------------------------------------------------------
  if (options.write_files) {
    namespace fs = std::filesystem;
    fs::create_directories(options.out_dir);
    const auto emit = [&](const fs::path& name) {
      result.manifest.push_back(options.out_dir / name);
      return std::ofstream(options.out_dir / name);
    };
    {
      auto os = emit("plan.json");
      os << proto::plan_to_json(plan).dump(2) << "\n";
    }
    {
      auto os = emit("datastore.jsonl");
      datastore.write_jsonl(os);
    }
    {
      auto os = emit("transitions.json");
      nlohmann::json t = nlohmann::json::array();
      for (const auto& r : result.history) {
        t.push_back({{"from", r.from},
                     {"symbol", r.symbol},
                     {"to", r.to},
                     {"timestamp", round_ml(r.timestamp)},
                     {"emitter", r.emitter}});
      }
      os << t.dump(2) << "\n";
    }
    if (result.accepted) {
      {
        auto os = emit("report.json");
        os << result.report.dump(2) << "\n";
      }
      {
        auto os = emit("report.md");
        os << report::to_markdown(result.report);
      }
      if (result.analysis) {
        const auto& a = *result.analysis;
        std::vector<std::array<double, 2>> curve_rows, d1_rows, d2_rows,
            zoom_rows;
        for (std::size_t i = 0; i < a.resampled.points.size(); ++i) {
          const double v = a.resampled.points[i].volume_ml;
          curve_rows.push_back({v, a.smoothed[i]});
          d1_rows.push_back({v, a.d1[i]});
          d2_rows.push_back({v, a.d2[i]});
        }
        const double zoom_center = a.equivalence_points.empty()
                                       ? 0.0
                                       : a.equivalence_points.front().volume_ml;
        for (const auto& row : curve_rows) {
          if (std::abs(row[0] - zoom_center) <=
              scenario.analysis_config.zoom_half_width_ml) {
            zoom_rows.push_back(row);
          }
        }
        write_csv(options.out_dir / "curve.csv", "V_mL,pH", curve_rows);
        write_csv(options.out_dir / "d1.csv", "V_mL,dpH_dV", d1_rows);
        write_csv(options.out_dir / "d2.csv", "V_mL,d2pH_dV2", d2_rows);
        write_csv(options.out_dir / "zoom.csv", "V_mL,pH", zoom_rows);
        result.manifest.push_back(options.out_dir / "curve.csv");
        result.manifest.push_back(options.out_dir / "d1.csv");
        result.manifest.push_back(options.out_dir / "d2.csv");
        result.manifest.push_back(options.out_dir / "zoom.csv");
      }
    }
  }

  result.datastore = std::move(datastore);
  return result;
}

ReplicateResult run_replicates(const Scenario& scenario, int n,
                               std::uint64_t base_seed,
                               const RunOptions& options) {
  if (n < 2) throw ConfigError("replicates need n >= 2");
  ReplicateResult result;
  std::vector<analysis::TitrationCurve> curves;
  for (int i = 0; i < n; ++i) {
    RunOptions per_run = options;
    per_run.seed_override = base_seed + static_cast<std::uint64_t>(i);
    if (options.write_files) {
      per_run.out_dir = options.out_dir / ("replicate_" + std::to_string(i));
    }
    RunResult run = run_scenario(scenario, per_run);
    if (run.exit_code != kExitOk) {
      result.exit_code = run.exit_code;
    } else {
      analysis::TitrationCurve curve = run.curve;
      curve.meta.replicate = i;
      curves.push_back(std::move(curve));
    }
    result.runs.push_back(std::move(run));
  }
  if (curves.size() < 2) {
    if (result.exit_code == kExitOk) result.exit_code = kExitEscalated;
    return result;
  }

  // Theory: the noiseless equilibrium curve over the common volume range.
  double v_max = curves.front().points.back().volume_ml;
  for (const auto& c : curves) {
    v_max = std::min(v_max, c.points.back().volume_ml);
  }
  std::vector<double> grid;
  for (double v = 0.0; v <= v_max + 1e-9;
       v += scenario.analysis_config.resample_step_ml) {
    grid.push_back(v);
  }
  auto theory_points = chem::titration_curve(
      scenario.chemistry.analyte, scenario.chemistry.titrant_mol_l, grid);
  for (const auto& [v, ph] : theory_points) {
    result.theory.points.push_back({v, ph});
  }
  result.theory.meta.analyte = scenario.chemistry.analyte.name;

  std::vector<double> v_eqs;
  const double v_eq1 = scenario.chemistry.analyte.concentration *
                       scenario.chemistry.analyte.volume_l * 1000.0 /
                       scenario.chemistry.titrant_mol_l;
  const std::size_t protons =
      scenario.chemistry.analyte.kind == chem::AcidKind::Weak
          ? std::max<std::size_t>(scenario.chemistry.analyte.pka.size(), 1)
          : 1;
  for (std::size_t k = 1; k <= protons; ++k) {
    v_eqs.push_back(v_eq1 * static_cast<double>(k));
  }
  result.stddev = analysis::stddev_vs_theory(
      curves, result.theory, scenario.analysis_config.zoom_half_width_ml,
      v_eqs);

  // Mean recovered pKa across replicates, index-aligned.
  std::vector<double> sums;
  std::vector<int> counts;
  for (const auto& run : result.runs) {
    if (!run.analysis) continue;
    const auto& pka = run.analysis->pka;
    for (std::size_t i = 0; i < pka.size(); ++i) {
      if (!pka[i].applicable) continue;
      if (sums.size() <= i) {
        sums.resize(i + 1, 0.0);
        counts.resize(i + 1, 0);
      }
      sums[i] += pka[i].pka;
      counts[i] += 1;
    }
  }
  for (std::size_t i = 0; i < sums.size(); ++i) {
    if (counts[i] > 0) {
      result.recovered_pka_mean.push_back(sums[i] /
                                          static_cast<double>(counts[i]));
    }
  }

  if (options.write_files) {
    namespace fs = std::filesystem;
    fs::create_directories(options.out_dir);
    std::ofstream os(options.out_dir / "stddev.csv");
    os << "V_mL,sigma,mean_deviation\n";
    char line[96];
    for (std::size_t i = 0; i < result.stddev.grid_ml.size(); ++i) {
      std::snprintf(line, sizeof(line), "%.4f,%.6g,%.6g\n",
                    result.stddev.grid_ml[i], result.stddev.sigma[i],
                    result.stddev.mean_deviation[i]);
      os << line;
    }
    nlohmann::json summary = {
        {"replicates", n},
        {"base_seed", base_seed},
        {"plateau_mean_sigma", result.stddev.plateau_mean},
        {"plateau_max_sigma", result.stddev.plateau_max},
        {"transition_max_sigma", result.stddev.transition_max},
        {"recovered_pka_mean", result.recovered_pka_mean},
    };
    std::ofstream sj(options.out_dir / "summary.json");
    sj << summary.dump(2) << "\n";
  }
  return result;
}

}  // namespace chemlab::run
