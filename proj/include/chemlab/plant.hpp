#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chemlab/equilibrium.hpp"
#include "chemlab/rng.hpp"

namespace chemlab::plant {

struct DropletConfig {
  double volume_ml = 0.046875;          // nominal per-drop volume
  double displacement_mm = 0.000415625; // gripper closure per drop
  double jitter_frac = 0.03;            // gaussian sigma, fraction of nominal
  double jitter_clamp = 0.10;           // hard clamp, fraction of nominal
};

struct PlantConfig {
  double dt = 0.1;              // default tick, s
  double tau_s = 0.5;           // probe + mixing first-order lag
  double ph_noise_sigma = 0.02; // gaussian noise on reported pH
  DropletConfig droplet;
  double grain_g = 0.02;        // solid pour grain mass (0 => continuous)
  double clarity_min = 0.6;
  double clarity_max = 0.98;
  double dissolve_s = 20.0;     // stirring time until full dissolution
};

enum class FaultKind { DropletFailure, SensorTimeout, StuckGripper };

FaultKind fault_kind_from_string(const std::string& name);
std::string to_string(FaultKind kind);

struct FaultSpec {
  FaultKind kind = FaultKind::DropletFailure;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string name;  // handle used by the CLI --fault flag
};

// One acoustic event per physically emitted droplet or grain.
struct AcousticEvent {
  double timestamp = 0.0;
  double amplitude = 0.0;      // (0, 1]
  double clarity = 0.0;        // [0, 1]
  double true_quantity = 0.0;  // hidden ground truth (mL or g), test-only
};

struct SensorFrame {
  double timestamp = 0.0;
  double ph = 0.0;
  std::string ph_status = "ok";  // "ok" | "timeout"
  double temperature_c = 25.0;
  double balance_g = 0.0;
  std::string color;             // complexometric scenarios only
  bool dissolved = false;        // weighing scenarios only
  std::vector<AcousticEvent> events;
};

struct ActuatorCommand {
  double closure_rate_mm_s = 0.0;   // gripper closing (dispenses droplets)
  double retract_rate_mm_s = 0.0;   // reset retraction; no dispensing effect
  double pour_rate_g_s = 0.0;       // solid pour
  bool stir = false;
  double dispense_solvent_ml = 0.0; // one-shot solvent addition this tick
};

// What the vessel contains and how droplets change it.
struct ChemistrySetup {
  enum class Kind { AcidBase, Complexometric, Weighing } kind = Kind::AcidBase;
  // AcidBase
  chem::AcidSpec analyte;
  double titrant_mol_l = 0.1;
  // Complexometric
  double ca_mol_l = 0.01;
  double ca_volume_ml = 5.0;
  double edta_mol_l = 0.02;
  chem::IndicatorSpec indicator;
};

class Plant {
 public:
  Plant(const PlantConfig& config, const ChemistrySetup& chemistry,
        std::uint64_t seed);

  // Advances the world by dt under the given command and returns the sensor
  // frame observed at the new clock. Faults manifest as missing events or
  // frozen readings, never as exceptions.
  SensorFrame tick(double dt, const ActuatorCommand& command);

  // Last reported reading and its status.
  std::pair<double, std::string> read_ph() const;

  void inject_fault(const FaultSpec& fault);  // throws OverlappingFault

  double clock() const { return clock_; }
  double equilibrium_ph() const { return equilibrium_ph_; }
  double sensed_ph() const { return sensed_ph_; }
  double dispensed_volume_ml() const { return dispensed_volume_ml_; }
  double total_closure_mm() const { return closure_mm_; }
  std::size_t droplet_count() const { return droplets_emitted_; }
  double balance_mass() const { return balance_g_; }
  bool dissolved() const { return dissolve_progress_s_ >= config_.dissolve_s; }
  const chem::SolutionState& solution() const { return solution_; }
  const PlantConfig& config() const { return config_; }
  const std::vector<FaultSpec>& faults() const { return faults_; }

 private:
  bool fault_active(FaultKind kind) const;
  void emit_droplet(SensorFrame& frame);

  PlantConfig config_;
  ChemistrySetup chemistry_;
  Rng rng_;

  chem::SolutionState solution_;
  double edta_added_mol_ = 0.0;
  double clock_ = 0.0;
  double closure_mm_ = 0.0;          // cumulative closing displacement
  std::size_t droplets_due_ = 0;     // crossings seen so far (incl. skipped)
  std::size_t droplets_emitted_ = 0;
  double dispensed_volume_ml_ = 0.0;
  double equilibrium_ph_ = 7.0;
  double sensed_ph_ = 7.0;
  double reported_ph_ = 7.0;
  double balance_g_ = 0.0;
  bool solvent_added_ = false;
  bool stirring_ = false;
  double dissolve_progress_s_ = 0.0;
  std::vector<FaultSpec> faults_;
};

}  // namespace chemlab::plant
