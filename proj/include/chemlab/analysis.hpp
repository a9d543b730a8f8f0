#pragma once

#include <optional>
#include <string>
#include <vector>

#include "chemlab/errors.hpp"

namespace chemlab::analysis {

struct CurvePoint {
  double volume_ml = 0.0;
  double ph = 0.0;
};

struct CurveMeta {
  std::string analyte;
  std::string titrant;
  int replicate = 0;
  // Needed by the ionization-corrected pKa estimator; zero when unknown.
  std::string analyte_kind;       // "strong" | "weak" | ""
  double titrant_mol_l = 0.0;
  double initial_volume_ml = 0.0;
  double kw = 1.0e-14;
};

struct TitrationCurve {
  std::vector<CurvePoint> points;  // volume strictly ascending after resample
  CurveMeta meta;
};

struct AnalysisConfig {
  double resample_step_ml = 0.05;
  int sg_window = 11;  // odd sample count
  int sg_order = 3;
  double peak_prominence_factor = 5.0;  // times median |d1|
  double min_separation_ml = 2.0;
  double zoom_half_width_ml = 2.0;
};

// Linear interpolation onto a uniform volume grid. Duplicate abscissae in the
// input collapse to the last-seen value (settled readings win).
TitrationCurve resample_uniform(const TitrationCurve& curve, double step_ml);

// Local least-squares polynomial smoothing; edge windows shrink one-sided.
std::vector<double> savitzky_golay(const std::vector<double>& y, int window,
                                   int order);

// Central differences of the requested order (1 or 2) with one-sided
// second-order formulas at the edges. x must be uniform.
std::vector<double> derivative(const std::vector<double>& x,
                               const std::vector<double>& y, int order);

struct EquivalencePoint {
  double volume_ml = 0.0;
  double ph = 0.0;
  double d1_peak = 0.0;  // peak height, for reporting
};

std::vector<EquivalencePoint> find_equivalence_points(
    const std::vector<double>& x, const std::vector<double>& smoothed,
    const std::vector<double>& d1, const std::vector<double>& d2,
    const AnalysisConfig& config);

struct PkaEstimate {
  double pka = 0.0;
  double v_half_ml = 0.0;
  double ph_at_half = 0.0;
  bool applicable = true;  // false for complete dissociation (strong acids)
  std::string note;
};

// pka_k from the pH at the midpoint between consecutive equivalence points
// (V_eq0 = 0), corrected for the ionized fraction via the charge balance.
std::vector<PkaEstimate> compute_pka(
    const TitrationCurve& uniform_curve,
    const std::vector<EquivalencePoint>& equivalence_points);

struct AnalysisResult {
  TitrationCurve resampled;
  std::vector<double> smoothed;
  std::vector<double> d1;
  std::vector<double> d2;
  std::vector<EquivalencePoint> equivalence_points;
  std::vector<PkaEstimate> pka;
};

// Full pipeline: resample -> SG smooth -> d1/d2 -> peaks -> pKa.
AnalysisResult analyze_titration(const TitrationCurve& raw,
                                 const AnalysisConfig& config);

struct StdDevSummary {
  std::vector<double> grid_ml;
  std::vector<double> sigma;        // cross-replicate std of (measured-theory)
  std::vector<double> mean_deviation;
  double plateau_mean = 0.0;
  double plateau_max = 0.0;
  double transition_max = 0.0;
};

// Per-volume standard deviation of (measured - theory) across replicates on a
// common uniform grid; the plateau excludes |V - V_eq| <= exclusion_half_width
// around every listed equivalence volume.
StdDevSummary stddev_vs_theory(const std::vector<TitrationCurve>& replicates,
                               const TitrationCurve& theory,
                               double exclusion_half_width_ml,
                               const std::vector<double>& equivalence_volumes);

double interpolate(const TitrationCurve& curve, double volume_ml);

}  // namespace chemlab::analysis
