#include "chemlab/controller.hpp"

#include <cmath>
#include <limits>

namespace chemlab::control {

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::Motion:
      return "motion";
    case Phase::Waiting:
      return "waiting";
    case Phase::Reset:
      return "reset";
  }
  return "?";
}

double map_displacement(double delta_d_mm, double k) {
  if (delta_d_mm < 0.0) throw NegativeDisplacement();
  return k * delta_d_mm;
}

PrecisionController::PrecisionController(const ControllerConfig& config)
    : config_(config) {}

double PrecisionController::confidence() const {
  // gamma_s policy: 0.9 while executing or holding, 0.0 during error recovery.
  return phase_ == Phase::Reset ? 0.0 : 0.9;
}

double PrecisionController::estimate_rate(double measured, double timestamp) {
  readings_.emplace_back(timestamp, measured);
  while (readings_.size() > 2 &&
         timestamp - readings_.front().first > config_.rate_window_s) {
    readings_.pop_front();
  }
  const auto& [t0, m0] = readings_.front();
  const double span = timestamp - t0;
  if (span <= 0.0) return 0.0;
  return (measured - m0) / span;
}

void PrecisionController::enter_reset(const std::string& reason,
                                      StepOutput& out) {
  phase_ = Phase::Reset;
  reset_reason_ = reason;
  reset_elapsed_s_ = 0.0;
  clean_steps_ = 0;
  ++retries_;
  if (retries_ > config_.max_retries && !escalated_) {
    escalated_ = true;
    out.escalated_now = true;
  }
}

StepOutput PrecisionController::step(const ControllerInput& input) {
  if (input.dt <= 0.0) throw Error("controller dt must be positive");
  StepOutput out;
  last_change_rate_ = estimate_rate(input.measured, input.timestamp);

  switch (phase_) {
    case Phase::Motion: {
      if (input.anomaly) {
        enter_reset("anomaly", out);
        break;
      }
      if (input.stop) {
        phase_ = Phase::Waiting;
        break;
      }
      const double distance =
          config_.has_target ? std::abs(input.measured - config_.target)
                             : std::numeric_limits<double>::infinity();
      if (config_.has_target && distance <= config_.epsilon) {
        phase_ = Phase::Waiting;
        break;
      }
      if (std::abs(last_change_rate_) > config_.rate_of_change_limit) {
        phase_ = Phase::Waiting;
        break;
      }
      const bool fine = config_.has_target && distance <= config_.fine_threshold;
      double delta_d = 0.0;
      if (config_.mode == ControllerConfig::Mode::Dispense) {
        const double rate = fine ? config_.fine_rate_mm_s : config_.rate_mm_s;
        out.request.closure_rate_mm_s = rate;
        delta_d = rate * input.dt;
      } else {
        const double rate =
            fine ? config_.fine_pour_rate_g_s : config_.pour_rate_g_s;
        out.request.pour_rate_g_s = rate;
        delta_d = rate * input.dt / config_.k;
      }
      displacement_mm_ += delta_d;
      q_stat_ += map_displacement(delta_d, config_.k);
      if (++clean_steps_ >= config_.clean_steps_to_forgive) retries_ = 0;
      break;
    }
    case Phase::Waiting: {
      if (input.anomaly) {
        enter_reset("anomaly", out);
        break;
      }
      if (input.resume && input.stable && !input.stop) {
        phase_ = Phase::Motion;
      }
      // Zero command while holding position.
      break;
    }
    case Phase::Reset: {
      if (escalated_) break;  // hold position, supervisor decides
      reset_elapsed_s_ += input.dt;
      if (reset_elapsed_s_ >= config_.retract_duration_s) {
        phase_ = Phase::Motion;
        reset_reason_.reset();
      } else {
        out.request.retract_rate_mm_s = config_.retract_rate_mm_s;
      }
      break;
    }
  }

  out.estimate = EstimateRecord{q_stat_, confidence(), input.timestamp};
  return out;
}

}  // namespace chemlab::control
