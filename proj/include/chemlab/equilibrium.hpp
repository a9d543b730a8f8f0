#pragma once

#include <string>
#include <utility>
#include <vector>

#include "chemlab/errors.hpp"

namespace chemlab::chem {

enum class AcidKind { Strong, Weak };

// An acid species as loaded from the scenario config. pKa list holds 1-2
// stepwise dissociation constants, ascending; strong acids ignore it.
struct AcidSpec {
  std::string name;
  AcidKind kind = AcidKind::Strong;
  std::vector<double> pka;      // ascending
  double concentration = 0.0;   // mol/L
  double volume_l = 0.0;        // initial volume, L
};

// Ground truth of the vessel: total analytical moles of each acid, moles of
// strong base, and total volume. Temperature is carried for reporting only.
struct SolutionState {
  struct AcidContent {
    AcidSpec spec;
    double moles = 0.0;  // total analytical moles (all protonation states)
  };
  std::vector<AcidContent> acids;
  double base_moles = 0.0;
  double volume_l = 0.0;
  double kw = 1.0e-14;
  double temperature_c = 25.0;

  static SolutionState from_acid(const AcidSpec& acid);
};

// pH from the full charge balance, solved by bracketed bisection on
// [H+] in [1e-14, 10]. The residual normalized by the total ionic
// concentration ends below 1e-10.
double ph_of(const SolutionState& state);

// Charge-balance residual at a trial [H+]; exposed for the property tests.
double charge_balance_residual(const SolutionState& state, double h);

// Noiseless curve: pH after mixing each listed titrant volume (mL, ascending)
// into the analyte, assuming instantaneous perfect mixing.
std::vector<std::pair<double, double>> titration_curve(
    const AcidSpec& analyte, double titrant_mol_l,
    const std::vector<double>& volumes_ml);

// Complexometric indicator in the strong-binding stoichiometric limit.
struct IndicatorSpec {
  std::string bound_color = "magenta";
  std::string free_color = "sapphire";
  double endpoint_fraction = 0.001;  // free-Ca fraction threshold f_c
};

std::string indicator_color(double ca_total_mol, double edta_added_mol,
                            const IndicatorSpec& spec);

}  // namespace chemlab::chem
