#pragma once

#include <deque>
#include <optional>
#include <string>

#include "chemlab/errors.hpp"

namespace chemlab::control {

enum class Phase { Motion, Waiting, Reset };

std::string to_string(Phase phase);

struct ControllerConfig {
  enum class Mode { Dispense, Pour } mode = Mode::Dispense;

  double k = 0.046875 / 0.000415625;  // quantity per mm of closure
  double rate_mm_s = 0.002;           // coarse closing rate
  double fine_rate_mm_s = 0.0004;     // within fine_threshold of the target
  double pour_rate_g_s = 0.15;        // coarse pour (Pour mode)
  double fine_pour_rate_g_s = 0.02;

  bool has_target = true;
  double target = 0.0;                // pH or g
  double epsilon = 0.03;              // |measured - target| <= eps -> wait
  double fine_threshold = 1.0;        // switch to the fine rate
  double rate_of_change_limit = 0.5;  // units/s -> wait
  double rate_window_s = 0.5;         // horizon for the rate estimate

  double retract_rate_mm_s = 0.002;
  double retract_duration_s = 1.0;
  int max_retries = 3;
  int clean_steps_to_forgive = 50;
};

struct ControllerInput {
  double measured = 0.0;  // current reading (pH or balance g)
  bool anomaly = false;   // supervisor-flagged execution anomaly
  bool resume = false;    // supervisor resume command present
  bool stable = false;    // supervisor stability verdict
  bool stop = false;      // supervisor pause/stop (endpoint reached)
  double dt = 0.1;
  double timestamp = 0.0;
};

struct ActuatorRequest {
  double closure_rate_mm_s = 0.0;
  double retract_rate_mm_s = 0.0;
  double pour_rate_g_s = 0.0;
};

struct EstimateRecord {
  double q_stat = 0.0;      // cumulative Q_hat
  double confidence = 0.0;  // gamma_s
  double timestamp = 0.0;
};

struct StepOutput {
  ActuatorRequest request;
  std::optional<EstimateRecord> estimate;
  bool escalated_now = false;  // max_retries exhausted on this step
};

// Exact displacement-to-quantity map, delta_q = k * delta_d.
double map_displacement(double delta_d_mm, double k);

// The statistics-based quantity logger. Owns phase transitions, the exact
// Q_hat bookkeeping, and the reset/retry escalation policy. Retraction during
// Reset never decrements Q_hat (dispensed liquid cannot return).
class PrecisionController {
 public:
  explicit PrecisionController(const ControllerConfig& config);

  StepOutput step(const ControllerInput& input);

  Phase phase() const { return phase_; }
  double accumulated() const { return q_stat_; }
  double confidence() const;
  double displacement_total() const { return displacement_mm_; }
  bool escalated() const { return escalated_; }
  int retries() const { return retries_; }
  double last_change_rate() const { return last_change_rate_; }
  std::optional<std::string> reset_reason() const { return reset_reason_; }

 private:
  void enter_reset(const std::string& reason, StepOutput& out);
  double estimate_rate(double measured, double timestamp);

  ControllerConfig config_;
  Phase phase_ = Phase::Motion;
  double q_stat_ = 0.0;
  double displacement_mm_ = 0.0;
  double last_change_rate_ = 0.0;
  std::optional<std::string> reset_reason_;
  double reset_elapsed_s_ = 0.0;
  int retries_ = 0;
  int clean_steps_ = 0;
  bool escalated_ = false;
  std::deque<std::pair<double, double>> readings_;  // (t, measured)
};

}  // namespace chemlab::control
