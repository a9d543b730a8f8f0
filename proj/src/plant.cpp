#include "chemlab/plant.hpp"

#include <algorithm>
#include <cmath>

namespace chemlab::plant {

FaultKind fault_kind_from_string(const std::string& name) {
  if (name == "droplet_failure") return FaultKind::DropletFailure;
  if (name == "sensor_timeout") return FaultKind::SensorTimeout;
  if (name == "stuck_gripper") return FaultKind::StuckGripper;
  throw ConfigError("unknown fault kind '" + name + "'");
}

std::string to_string(FaultKind kind) {
  switch (kind) {
    case FaultKind::DropletFailure:
      return "droplet_failure";
    case FaultKind::SensorTimeout:
      return "sensor_timeout";
    case FaultKind::StuckGripper:
      return "stuck_gripper";
  }
  return "?";
}

Plant::Plant(const PlantConfig& config, const ChemistrySetup& chemistry,
             std::uint64_t seed)
    : config_(config), chemistry_(chemistry), rng_(seed) {
  if (chemistry_.kind == ChemistrySetup::Kind::AcidBase) {
    solution_ = chem::SolutionState::from_acid(chemistry_.analyte);
    equilibrium_ph_ = chem::ph_of(solution_);
  } else if (chemistry_.kind == ChemistrySetup::Kind::Complexometric) {
    equilibrium_ph_ = 7.0;
  }
  sensed_ph_ = equilibrium_ph_;
  reported_ph_ = equilibrium_ph_;
}

bool Plant::fault_active(FaultKind kind) const {
  for (const auto& f : faults_) {
    if (f.kind == kind && clock_ >= f.start_s && clock_ < f.end_s) return true;
  }
  return false;
}

void Plant::inject_fault(const FaultSpec& fault) {
  if (fault.end_s <= fault.start_s) {
    throw ConfigError("fault window must be well ordered");
  }
  if (fault.start_s < clock_) {
    throw ConfigError("fault window must start in the future");
  }
  for (const auto& existing : faults_) {
    if (existing.kind == fault.kind && fault.start_s < existing.end_s &&
        existing.start_s < fault.end_s) {
      throw OverlappingFault(to_string(fault.kind));
    }
  }
  faults_.push_back(fault);
}

void Plant::emit_droplet(SensorFrame& frame) {
  const auto& d = config_.droplet;
  const double jitter =
      std::clamp(rng_.gaussian(0.0, d.jitter_frac), -d.jitter_clamp,
                 d.jitter_clamp);
  const double volume_ml = d.volume_ml * (1.0 + jitter);
  dispensed_volume_ml_ += volume_ml;
  ++droplets_emitted_;

  if (chemistry_.kind == ChemistrySetup::Kind::AcidBase) {
    solution_.base_moles += chemistry_.titrant_mol_l * volume_ml / 1000.0;
    solution_.volume_l += volume_ml / 1000.0;
  } else if (chemistry_.kind == ChemistrySetup::Kind::Complexometric) {
    edta_added_mol_ += chemistry_.edta_mol_l * volume_ml / 1000.0;
  }

  AcousticEvent event;
  event.timestamp = clock_;
  event.amplitude = std::min(1.0, 0.5 * volume_ml / d.volume_ml);
  event.clarity = rng_.uniform(config_.clarity_min, config_.clarity_max);
  event.true_quantity = volume_ml;
  frame.events.push_back(event);
}

SensorFrame Plant::tick(double dt, const ActuatorCommand& command) {
  if (dt <= 0.0) throw Error("tick dt must be positive");
  clock_ += dt;

  SensorFrame frame;
  frame.timestamp = clock_;

  // Gripper closing; stuck_gripper swallows commands entirely.
  const bool stuck = fault_active(FaultKind::StuckGripper);
  if (!stuck && command.closure_rate_mm_s > 0.0) {
    closure_mm_ += command.closure_rate_mm_s * dt;
  }
  const auto due = static_cast<std::size_t>(
      std::floor(closure_mm_ / config_.droplet.displacement_mm + 1e-9));
  const bool drop_fault = fault_active(FaultKind::DropletFailure);
  bool chemistry_changed = false;
  while (droplets_due_ < due) {
    ++droplets_due_;
    if (drop_fault) continue;  // closure advances, droplet never falls
    emit_droplet(frame);
    chemistry_changed = true;
  }

  // Solid pour with grain quantization (Poisson arrivals of whole grains).
  if (command.pour_rate_g_s > 0.0 && !stuck) {
    if (config_.grain_g > 0.0) {
      const int grains =
          rng_.poisson(command.pour_rate_g_s * dt / config_.grain_g);
      for (int i = 0; i < grains; ++i) {
        balance_g_ += config_.grain_g;
        AcousticEvent event;
        event.timestamp = clock_;
        event.amplitude = 0.5;
        event.clarity = rng_.uniform(config_.clarity_min, config_.clarity_max);
        event.true_quantity = config_.grain_g;
        frame.events.push_back(event);
      }
    } else {
      balance_g_ += command.pour_rate_g_s * dt;
    }
  }

  if (command.dispense_solvent_ml > 0.0) solvent_added_ = true;
  stirring_ = command.stir;
  if (chemistry_.kind == ChemistrySetup::Kind::Weighing && solvent_added_ &&
      stirring_) {
    dissolve_progress_s_ += dt;
  }

  if (chemistry_.kind == ChemistrySetup::Kind::AcidBase) {
    if (chemistry_changed) equilibrium_ph_ = chem::ph_of(solution_);
    // First-order relaxation of the probe toward the instant chemistry.
    sensed_ph_ +=
        (equilibrium_ph_ - sensed_ph_) * (1.0 - std::exp(-dt / config_.tau_s));
    if (fault_active(FaultKind::SensorTimeout)) {
      frame.ph_status = "timeout";  // reading stays frozen
    } else {
      reported_ph_ = config_.ph_noise_sigma > 0.0
                         ? sensed_ph_ + rng_.gaussian(0.0, config_.ph_noise_sigma)
                         : sensed_ph_;
    }
  } else if (chemistry_.kind == ChemistrySetup::Kind::Complexometric) {
    const double ca_total_mol =
        chemistry_.ca_mol_l * chemistry_.ca_volume_ml / 1000.0;
    frame.color =
        chem::indicator_color(ca_total_mol, edta_added_mol_, chemistry_.indicator);
  }

  frame.ph = reported_ph_;
  if (fault_active(FaultKind::SensorTimeout)) frame.ph_status = "timeout";
  frame.temperature_c = solution_.temperature_c;
  frame.balance_g = balance_g_;
  frame.dissolved = dissolved();
  return frame;
}

std::pair<double, std::string> Plant::read_ph() const {
  return {reported_ph_,
          fault_active(FaultKind::SensorTimeout) ? "timeout" : "ok"};
}

}  // namespace chemlab::plant
