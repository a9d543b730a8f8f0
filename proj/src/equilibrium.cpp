#include "chemlab/equilibrium.hpp"

#include <algorithm>
#include <cmath>

namespace chemlab::chem {

namespace {

constexpr double kHMin = 1.0e-14;
constexpr double kHMax = 10.0;
constexpr int kMaxIterations = 200;
constexpr double kResidualTol = 1.0e-10;

// Anion charge concentration contributed by one acid at a trial [H+].
double anion_charge(const SolutionState::AcidContent& acid, double h,
                    double volume_l) {
  const double c = acid.moles / volume_l;
  if (acid.spec.kind == AcidKind::Strong) {
    return c;  // fully dissociated, one anion charge per formula unit
  }
  if (acid.spec.pka.size() == 1) {
    const double ka = std::pow(10.0, -acid.spec.pka[0]);
    return c * ka / (h + ka);
  }
  const double ka1 = std::pow(10.0, -acid.spec.pka[0]);
  const double ka2 = std::pow(10.0, -acid.spec.pka[1]);
  const double denom = h * h + ka1 * h + ka1 * ka2;
  return c * (ka1 * h + 2.0 * ka1 * ka2) / denom;
}

double total_ionic(const SolutionState& s, double h) {
  double total = h + s.kw / h + s.base_moles / s.volume_l;
  for (const auto& acid : s.acids) {
    total += anion_charge(acid, h, s.volume_l);
  }
  return total;
}

}  // namespace

SolutionState SolutionState::from_acid(const AcidSpec& acid) {
  SolutionState s;
  s.acids.push_back({acid, acid.concentration * acid.volume_l});
  s.volume_l = acid.volume_l;
  return s;
}

double charge_balance_residual(const SolutionState& s, double h) {
  double residual = h + s.base_moles / s.volume_l - s.kw / h;
  for (const auto& acid : s.acids) {
    residual -= anion_charge(acid, h, s.volume_l);
  }
  return residual;
}

double ph_of(const SolutionState& s) {
  if (s.volume_l <= 0.0) throw NoBracket("volume must be positive");
  double lo = kHMin;
  double hi = kHMax;
  double f_lo = charge_balance_residual(s, lo);
  double f_hi = charge_balance_residual(s, hi);
  if (f_lo > 0.0 || f_hi < 0.0) {
    throw NoBracket("residual has the same sign at both bracket ends");
  }
  double mid = 0.5 * (lo + hi);
  for (int i = 0; i < kMaxIterations; ++i) {
    mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;  // interval exhausted in double
    const double f_mid = charge_balance_residual(s, mid);
    if (std::abs(f_mid) / total_ionic(s, mid) < kResidualTol) break;
    if (f_mid < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return -std::log10(mid);
}

std::vector<std::pair<double, double>> titration_curve(
    const AcidSpec& analyte, double titrant_mol_l,
    const std::vector<double>& volumes_ml) {
  for (std::size_t i = 1; i < volumes_ml.size(); ++i) {
    if (volumes_ml[i] < volumes_ml[i - 1]) {
      throw Error("titration volumes must be ascending");
    }
  }
  std::vector<std::pair<double, double>> curve;
  curve.reserve(volumes_ml.size());
  SolutionState base = SolutionState::from_acid(analyte);
  for (double v_ml : volumes_ml) {
    SolutionState s = base;
    s.base_moles = titrant_mol_l * v_ml / 1000.0;
    s.volume_l = base.volume_l + v_ml / 1000.0;
    curve.emplace_back(v_ml, ph_of(s));
  }
  return curve;
}

std::string indicator_color(double ca_total_mol, double edta_added_mol,
                            const IndicatorSpec& spec) {
  if (ca_total_mol <= 0.0) return spec.free_color;
  const double free_ca = std::max(ca_total_mol - edta_added_mol, 0.0);
  const double free_fraction = free_ca / ca_total_mol;
  return free_fraction > spec.endpoint_fraction ? spec.bound_color
                                                : spec.free_color;
}

}  // namespace chemlab::chem
