#include "chemlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace chemlab::analysis {

namespace {

// Solves the (n x n) normal-equation system in place; n <= 6 here.
std::vector<double> solve_dense(std::vector<std::vector<double>> a,
                                std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    const double diag = a[col][col];
    for (std::size_t r = col + 1; r < n; ++r) {
      const double factor = a[r][col] / diag;
      for (std::size_t c = col; c < n; ++c) a[r][c] -= factor * a[col][c];
      b[r] -= factor * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t ri = n; ri-- > 0;) {
    double acc = b[ri];
    for (std::size_t c = ri + 1; c < n; ++c) acc -= a[ri][c] * x[c];
    x[ri] = acc / a[ri][ri];
  }
  return x;
}

// Least-squares polynomial value at offset 0 for samples y[lo..hi] with
// integer offsets relative to `center`.
double local_poly_value(const std::vector<double>& y, std::size_t lo,
                        std::size_t hi, std::size_t center, int degree) {
  const int m = static_cast<int>(hi - lo + 1);
  const int deg = std::min(degree, m - 1);
  const int terms = deg + 1;
  std::vector<std::vector<double>> gram(terms, std::vector<double>(terms, 0));
  std::vector<double> rhs(terms, 0.0);
  for (std::size_t idx = lo; idx <= hi; ++idx) {
    const double x = static_cast<double>(idx) - static_cast<double>(center);
    double px = 1.0;
    std::vector<double> powers(2 * terms - 1);
    for (int p = 0; p < 2 * terms - 1; ++p) {
      powers[p] = px;
      px *= x;
    }
    for (int a = 0; a < terms; ++a) {
      rhs[a] += powers[a] * y[idx];
      for (int b = 0; b < terms; ++b) gram[a][b] += powers[a + b];
    }
  }
  return solve_dense(std::move(gram), std::move(rhs))[0];
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

double interpolate(const TitrationCurve& curve, double volume_ml) {
  const auto& pts = curve.points;
  if (pts.empty()) throw TooFewPoints("empty curve");
  if (volume_ml <= pts.front().volume_ml) return pts.front().ph;
  if (volume_ml >= pts.back().volume_ml) return pts.back().ph;
  auto upper = std::lower_bound(
      pts.begin(), pts.end(), volume_ml,
      [](const CurvePoint& p, double v) { return p.volume_ml < v; });
  auto lower = upper - 1;
  const double span = upper->volume_ml - lower->volume_ml;
  if (span <= 0.0) return upper->ph;
  const double w = (volume_ml - lower->volume_ml) / span;
  return lower->ph + w * (upper->ph - lower->ph);
}

TitrationCurve resample_uniform(const TitrationCurve& curve, double step_ml) {
  if (step_ml <= 0.0) throw Error("resample step must be positive");
  // Collapse duplicate volumes keeping the last (settled) reading.
  std::map<double, double> dedup;
  for (const auto& p : curve.points) dedup[p.volume_ml] = p.ph;
  if (dedup.size() < 4) {
    throw TooFewPoints("resample needs at least 4 distinct volumes, got " +
                       std::to_string(dedup.size()));
  }
  TitrationCurve clean;
  clean.meta = curve.meta;
  for (const auto& [v, ph] : dedup) clean.points.push_back({v, ph});

  TitrationCurve out;
  out.meta = curve.meta;
  const double v0 = clean.points.front().volume_ml;
  const double v1 = clean.points.back().volume_ml;
  const auto n = static_cast<std::size_t>(std::floor((v1 - v0) / step_ml)) + 1;
  out.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = v0 + static_cast<double>(i) * step_ml;
    out.points.push_back({v, interpolate(clean, v)});
  }
  return out;
}

std::vector<double> savitzky_golay(const std::vector<double>& y, int window,
                                   int order) {
  if (window < 3 || window % 2 == 0) {
    throw BadWindow("window must be odd and >= 3, got " +
                    std::to_string(window));
  }
  if (order < 0 || order >= window) {
    throw BadWindow("order must satisfy 0 <= order < window");
  }
  const std::size_t n = y.size();
  if (n == 0) return {};
  const std::size_t half = static_cast<std::size_t>(window / 2);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(i + half, n - 1);
    out[i] = local_poly_value(y, lo, hi, i, order);
  }
  return out;
}

std::vector<double> derivative(const std::vector<double>& x,
                               const std::vector<double>& y, int order) {
  if (order != 1 && order != 2) throw Error("derivative order must be 1 or 2");
  const std::size_t n = x.size();
  if (n != y.size() || n < 4) {
    throw TooFewPoints("derivative needs >= 4 matching samples");
  }
  const double h = x[1] - x[0];
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs((x[i] - x[i - 1]) - h) > 1e-9 * std::max(1.0, std::abs(h))) {
      throw NonUniformGrid("step at index " + std::to_string(i));
    }
  }
  std::vector<double> out(n);
  if (order == 1) {
    out[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h);
    out[n - 1] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      out[i] = (y[i + 1] - y[i - 1]) / (2.0 * h);
    }
  } else {
    const double h2 = h * h;
    out[0] = (2.0 * y[0] - 5.0 * y[1] + 4.0 * y[2] - y[3]) / h2;
    out[n - 1] =
        (2.0 * y[n - 1] - 5.0 * y[n - 2] + 4.0 * y[n - 3] - y[n - 4]) / h2;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      out[i] = (y[i + 1] - 2.0 * y[i] + y[i - 1]) / h2;
    }
  }
  return out;
}

std::vector<EquivalencePoint> find_equivalence_points(
    const std::vector<double>& x, const std::vector<double>& smoothed,
    const std::vector<double>& d1, const std::vector<double>& d2,
    const AnalysisConfig& config) {
  const std::size_t n = x.size();
  if (n < 5) return {};
  const double step = x[1] - x[0];

  std::vector<double> abs_d1(n);
  for (std::size_t i = 0; i < n; ++i) abs_d1[i] = std::abs(d1[i]);
  const double threshold = config.peak_prominence_factor * median(abs_d1);

  struct Candidate {
    std::size_t index;
    double height;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (d1[i] <= threshold) continue;
    if (d1[i] >= d1[i - 1] && d1[i] > d1[i + 1]) {
      candidates.push_back({i, d1[i]});
    }
  }

  // Merge candidates closer than min_separation, keeping the taller peak.
  std::vector<Candidate> merged;
  for (const auto& c : candidates) {
    if (!merged.empty() &&
        (x[c.index] - x[merged.back().index]) < config.min_separation_ml) {
      if (c.height > merged.back().height) merged.back() = c;
    } else {
      merged.push_back(c);
    }
  }

  std::vector<EquivalencePoint> out;
  for (const auto& c : merged) {
    double v_eq = x[c.index];
    // Refine with the nearest d2 sign change, linearly interpolated, but stay
    // within one grid step of the d1 peak.
    for (std::size_t j = c.index >= 1 ? c.index - 1 : 0;
         j + 1 < n && j <= c.index + 1; ++j) {
      if ((d2[j] > 0.0 && d2[j + 1] <= 0.0) ||
          (d2[j] < 0.0 && d2[j + 1] >= 0.0)) {
        const double frac = d2[j] / (d2[j] - d2[j + 1]);
        const double zero = x[j] + frac * step;
        if (std::abs(zero - x[c.index]) <= step + 1e-12) {
          v_eq = zero;
          break;
        }
      }
    }
    // pH at the refined volume from the smoothed series.
    const auto k = static_cast<std::size_t>(
        std::clamp((v_eq - x[0]) / step, 0.0, static_cast<double>(n - 2)));
    const double w = (v_eq - x[k]) / step;
    const double ph = smoothed[k] + w * (smoothed[k + 1] - smoothed[k]);
    out.push_back({v_eq, ph, c.height});
  }
  return out;
}

std::vector<PkaEstimate> compute_pka(
    const TitrationCurve& curve,
    const std::vector<EquivalencePoint>& equivalence_points) {
  if (equivalence_points.empty()) return {};
  std::vector<PkaEstimate> out;
  double previous_eq = 0.0;
  for (const auto& eq : equivalence_points) {
    const double v_half = 0.5 * (previous_eq + eq.volume_ml);
    if (curve.points.empty() || v_half < curve.points.front().volume_ml ||
        v_half > curve.points.back().volume_ml) {
      throw HalfPointOutOfRange(std::to_string(v_half) + " mL");
    }
    const double ph = interpolate(curve, v_half);
    PkaEstimate estimate;
    estimate.v_half_ml = v_half;
    estimate.ph_at_half = ph;

    const auto& meta = curve.meta;
    if (meta.analyte_kind == "strong") {
      estimate.applicable = false;
      estimate.pka = ph;
      estimate.note = "complete dissociation; half-equivalence pH is not a pKa";
    } else if (meta.titrant_mol_l > 0.0 && meta.initial_volume_ml > 0.0) {
      // Stage concentrations from the charge balance at V_half: the conjugate
      // base of stage k is the base delivered past the previous equivalence
      // plus the free [H+]; the remaining acid is the distance to the next
      // equivalence minus it.
      const double v_tot = meta.initial_volume_ml + v_half;
      const double h = std::pow(10.0, -ph);
      const double oh = meta.kw / h;
      const double stage_total =
          meta.titrant_mol_l * (eq.volume_ml - previous_eq) / v_tot;
      const double base_form =
          meta.titrant_mol_l * (v_half - previous_eq) / v_tot + h - oh;
      const double acid_form = stage_total - base_form;
      if (acid_form <= 0.02 * stage_total || base_form <= 0.0) {
        estimate.applicable = false;
        estimate.pka = ph;
        estimate.note =
            "complete dissociation; half-equivalence pH is not a pKa";
      } else {
        estimate.pka = ph + std::log10(acid_form / base_form);
      }
    } else {
      // No metadata: fall back to the uncorrected half-equivalence pH.
      estimate.pka = ph;
      estimate.note = "uncorrected (titrant concentration unknown)";
    }
    out.push_back(estimate);
    previous_eq = eq.volume_ml;
  }
  return out;
}

AnalysisResult analyze_titration(const TitrationCurve& raw,
                                 const AnalysisConfig& config) {
  AnalysisResult result;
  result.resampled = resample_uniform(raw, config.resample_step_ml);
  std::vector<double> x, y;
  x.reserve(result.resampled.points.size());
  for (const auto& p : result.resampled.points) {
    x.push_back(p.volume_ml);
    y.push_back(p.ph);
  }
  result.smoothed = savitzky_golay(y, config.sg_window, config.sg_order);
  result.d1 = derivative(x, result.smoothed, 1);
  result.d2 = derivative(x, result.smoothed, 2);
  result.equivalence_points =
      find_equivalence_points(x, result.smoothed, result.d1, result.d2, config);
  TitrationCurve smoothed_curve;
  smoothed_curve.meta = raw.meta;
  for (std::size_t i = 0; i < x.size(); ++i) {
    smoothed_curve.points.push_back({x[i], result.smoothed[i]});
  }
  result.pka = compute_pka(smoothed_curve, result.equivalence_points);
  return result;
}

StdDevSummary stddev_vs_theory(const std::vector<TitrationCurve>& replicates,
                               const TitrationCurve& theory,
                               double exclusion_half_width_ml,
                               const std::vector<double>& equivalence_volumes) {
  if (replicates.size() < 2) {
    throw GridMismatch("need at least 2 replicates");
  }
  double v_max = theory.points.back().volume_ml;
  double v_min = theory.points.front().volume_ml;
  for (const auto& rep : replicates) {
    if (rep.points.size() < 2) throw GridMismatch("replicate too short");
    v_max = std::min(v_max, rep.points.back().volume_ml);
    v_min = std::max(v_min, rep.points.front().volume_ml);
  }
  if (v_max <= v_min) throw GridMismatch("replicate volume ranges disjoint");

  const double step = theory.points.size() > 1
                          ? theory.points[1].volume_ml -
                                theory.points[0].volume_ml
                          : 0.05;
  StdDevSummary summary;
  for (double v = v_min; v <= v_max + 1e-12; v += step) {
    std::vector<double> deviations;
    deviations.reserve(replicates.size());
    const double ref = interpolate(theory, v);
    for (const auto& rep : replicates) {
      deviations.push_back(interpolate(rep, v) - ref);
    }
    double mean = 0.0;
    for (double d : deviations) mean += d;
    mean /= static_cast<double>(deviations.size());
    double var = 0.0;
    for (double d : deviations) var += (d - mean) * (d - mean);
    var /= static_cast<double>(deviations.size() - 1);
    summary.grid_ml.push_back(v);
    summary.sigma.push_back(std::sqrt(var));
    summary.mean_deviation.push_back(mean);
  }

  double plateau_sum = 0.0;
  std::size_t plateau_count = 0;
  for (std::size_t i = 0; i < summary.grid_ml.size(); ++i) {
    const double v = summary.grid_ml[i];
    bool in_transition = false;
    for (double v_eq : equivalence_volumes) {
      if (std::abs(v - v_eq) <= exclusion_half_width_ml) {
        in_transition = true;
        break;
      }
    }
    if (in_transition) {
      summary.transition_max = std::max(summary.transition_max,
                                        summary.sigma[i]);
    } else {
      plateau_sum += summary.sigma[i];
      ++plateau_count;
      summary.plateau_max = std::max(summary.plateau_max, summary.sigma[i]);
    }
  }
  if (plateau_count > 0) {
    summary.plateau_mean = plateau_sum / static_cast<double>(plateau_count);
  }
  return summary;
}

}  // namespace chemlab::analysis
