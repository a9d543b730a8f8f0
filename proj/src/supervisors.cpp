#include "chemlab/supervisors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace chemlab::agents {

void ReadingWindow::push(double timestamp, double value) {
  if (!samples_.empty() && timestamp < samples_.back().first) {
    throw Error("reading window timestamps must ascend");
  }
  samples_.emplace_back(timestamp, value);
  while (!samples_.empty() &&
         timestamp - samples_.front().first > retention_s_) {
    samples_.pop_front();
  }
}

double ReadingWindow::span() const {
  if (samples_.size() < 2) return 0.0;
  return samples_.back().first - samples_.front().first;
}

std::pair<double, double> ReadingWindow::range_over(double horizon_s) const {
  if (samples_.empty()) return {0.0, 0.0};
  const double cutoff = samples_.back().first - horizon_s;
  double lo = samples_.back().second;
  double hi = samples_.back().second;
  double oldest = samples_.back().first;
  for (auto it = samples_.rbegin(); it != samples_.rend(); ++it) {
    if (it->first < cutoff - 1e-9) break;
    lo = std::min(lo, it->second);
    hi = std::max(hi, it->second);
    oldest = it->first;
  }
  return {hi - lo, samples_.back().first - oldest};
}

bool ReadingWindow::holds_within(double horizon_s, double lo, double hi) const {
  if (samples_.empty()) return false;
  const double cutoff = samples_.back().first - horizon_s;
  double oldest = samples_.back().first;
  for (auto it = samples_.rbegin(); it != samples_.rend(); ++it) {
    if (it->first < cutoff - 1e-9) break;
    if (it->second < lo || it->second > hi) return false;
    oldest = it->first;
  }
  return samples_.back().first - oldest >= horizon_s - 1e-9;
}

bool detect_stability(const ReadingWindow& window,
                      const StabilityConfig& config) {
  if (window.empty()) return false;
  const auto [range, span] = window.range_over(config.window_s);
  return span >= config.window_s - 1e-9 && range <= config.max_delta;
}

bool detect_endpoint(const ReadingWindow& window,
                     const EndpointConfig& config) {
  if (window.empty()) return false;
  return window.holds_within(config.hold_s, config.target - config.tolerance,
                             config.target + config.tolerance);
}

EventClass classify_event(const plant::AcousticEvent&, const fsm::StateId& q_t,
                          bool dispensing_active,
                          const std::set<fsm::StateId>& dispensing_states) {
  if (dispensing_active && dispensing_states.count(q_t) > 0) {
    return EventClass::Expected;
  }
  return EventClass::Anomalous;
}

std::pair<double, double> estimate_audio_quantity(
    const std::vector<plant::AcousticEvent>& expected_events,
    double nominal_quantity, double baseline_confidence) {
  if (expected_events.empty()) return {0.0, baseline_confidence};
  double clarity = 0.0;
  for (const auto& e : expected_events) clarity += e.clarity;
  clarity /= static_cast<double>(expected_events.size());
  return {static_cast<double>(expected_events.size()) * nominal_quantity,
          std::clamp(clarity, 0.0, 1.0)};
}

std::optional<std::string> check_timeout(double last_event_time, double now,
                                         double limit_s,
                                         bool dispensing_active) {
  if (dispensing_active && now - last_event_time > limit_s) {
    return std::string("sigma_event_timeout");
  }
  return std::nullopt;
}

AudioSupervisor::Output AudioSupervisor::step(
    const std::vector<plant::AcousticEvent>& events, const fsm::StateId& q_t,
    bool dispensing_active, double now) {
  Output out;
  std::vector<plant::AcousticEvent> expected;
  for (const auto& event : events) {
    if (classify_event(event, q_t, dispensing_active,
                       config_.dispensing_states) == EventClass::Expected) {
      expected.push_back(event);
      last_event_time_ = event.timestamp;
    } else {
      ++out.anomalous_events;
      out.anomaly_codes.push_back("unexpected_acoustic_event");
    }
  }
  out.expected_events = static_cast<int>(expected.size());
  if (!expected.empty()) {
    auto [increment, confidence] = estimate_audio_quantity(
        expected, config_.nominal_quantity, config_.baseline_confidence);
    out.increment = increment;
    out.confidence = confidence;
    q_audio_total_ += increment;
    expected_count_ += out.expected_events;
    for (const auto& e : expected) clarity_sum_ += e.clarity;
    if (!detection_sent_) {
      out.first_detection = true;
      detection_sent_ = true;
    }
  } else {
    out.confidence = config_.baseline_confidence;
  }

  if (dispensing_active && !dispensing_seen_) {
    dispensing_seen_ = true;
    last_event_time_ = now;  // start the gap clock at first activation
  }
  if (auto symbol = check_timeout(last_event_time_, now, config_.timeout_s,
                                  dispensing_active)) {
    out.timeout_symbol = symbol;
    out.anomaly_codes.push_back("audio_event_timeout");
    last_event_time_ = now;  // restart the clock; retries re-arm it
  }
  return out;
}

double AudioSupervisor::mean_clarity() const {
  if (expected_count_ == 0) return 0.0;
  return clarity_sum_ / static_cast<double>(expected_count_);
}

VisionSupervisor::VisionSupervisor(const fsm::StateMachine& machine,
                                   const proto::TaskPlan& plan,
                                   const VisionConfig& config)
    : plan_(plan), config_(config), cursor_(machine) {}

double VisionSupervisor::smoothed_reading() const {
  if (raw_readings_.empty()) return 0.0;
  return std::accumulate(raw_readings_.begin(), raw_readings_.end(), 0.0) /
         static_cast<double>(raw_readings_.size());
}

void VisionSupervisor::watch_reading(const Input& input) {
  double reading = 0.0;
  bool valid = true;
  switch (config_.watch) {
    case VisionConfig::Watch::Ph:
      reading = input.frame.ph;
      valid = input.frame.ph_status == "ok";
      break;
    case VisionConfig::Watch::Balance:
      reading = input.frame.balance_g;
      break;
    case VisionConfig::Watch::Color:
      return;  // color endpoints do not use the numeric window
  }
  if (!valid) return;  // frozen sensor: do not feed stale data
  raw_readings_.push_back(reading);
  while (raw_readings_.size() > smooth_count_) raw_readings_.pop_front();
  window_.push(input.now, smoothed_reading());
}

void VisionSupervisor::handle_message(const proto::AgentMessage& msg,
                                      const Input& input,
                                      std::vector<Decision>& out) {
  if (!msg.payload) return;
  const auto& payload = *msg.payload;
  const std::string kind = payload.value("kind", "");
  if (kind == "completion") {
    const std::string symbol = payload.value("symbol", "");
    if (!payload.value("success", false)) {
      out.push_back({Decision::Kind::LogAnomaly, symbol, "subtask_failure",
                     "subtask reported failure"});
      out.push_back({Decision::Kind::FlagAnomaly, "", "subtask_failure", ""});
      return;
    }
    if (cursor_.machine().symbols.count(symbol) == 0) {
      out.push_back({Decision::Kind::Escalate, symbol, "unknown_symbol",
                     "completion carried a symbol outside Sigma"});
      return;
    }
    try {
      cursor_.step(symbol, input.now, proto::to_string(msg.sender));
      out.push_back({Decision::Kind::FireSymbol, symbol, "", ""});
    } catch (const UndefinedTransition& e) {
      out.push_back(
          {Decision::Kind::Escalate, symbol, "undefined_transition", e.what()});
    }
  } else if (kind == "anomaly") {
    const std::string code = payload.value("code", "anomaly");
    anomaly_active_ = true;
    anomaly_code_ = code;
    out.push_back({Decision::Kind::LogAnomaly, "", code,
                   payload.value("detail", "")});
    out.push_back({Decision::Kind::FlagAnomaly, "", code, ""});
  }
}

std::vector<Decision> VisionSupervisor::step(const Input& input) {
  std::vector<Decision> out;
  watch_reading(input);

  // Sensor timeout is an anomaly the probe reports by freezing.
  if (input.frame.ph_status == "timeout" &&
      config_.watch == VisionConfig::Watch::Ph) {
    if (!anomaly_active_ || anomaly_code_ != "sensor_timeout") {
      anomaly_active_ = true;
      anomaly_code_ = "sensor_timeout";
      out.push_back({Decision::Kind::LogAnomaly, "", "sensor_timeout",
                     "pH reading frozen beyond its window"});
    }
    out.push_back({Decision::Kind::FlagAnomaly, "", "sensor_timeout", ""});
  } else if (anomaly_active_ && anomaly_code_ == "sensor_timeout") {
    anomaly_active_ = false;
  }

  for (const auto& msg : input.inbox) handle_message(msg, input, out);

  if (input.controller_escalated) {
    out.push_back({Decision::Kind::Escalate, "", "controller_escalated",
                   "error correction exhausted max retries"});
    return out;
  }

  const fsm::StateId q = cursor_.current();
  const bool titration = config_.watch == VisionConfig::Watch::Ph ||
                         config_.watch == VisionConfig::Watch::Color;

  auto fire = [&](const std::string& symbol) {
    cursor_.step(symbol, input.now, "VisionSupervisor");
    out.push_back({Decision::Kind::FireSymbol, symbol, "", ""});
  };

  if (titration) {
    if (q == "q0" && !grasp_commanded_) {
      grasp_commanded_ = true;
      out.push_back({Decision::Kind::ActionCommand, "sigma_grasp", "", ""});
    } else if (q == "q1_grasped" && !draw_commanded_) {
      draw_commanded_ = true;
      out.push_back({Decision::Kind::ActionCommand, "sigma_draw", "", ""});
    } else if (q == "q2_drawn") {
      fire("sigma_titrate");  // bench ready, begin the titration phase
    }

    if (cursor_.current() == plan_.statistics_logger.activation_phase &&
        plan_.statistics_logger.activate && !logger_activated_) {
      logger_activated_ = true;
      out.push_back({Decision::Kind::ActivateLogger, "", "", ""});
    }

    const fsm::StateId now_q = cursor_.current();
    bool endpoint = false;
    if (config_.watch == VisionConfig::Watch::Ph) {
      endpoint = detect_endpoint(window_, config_.endpoint);
    } else {
      // Color endpoint: the flip latches; require it held for hold_s.
      if (input.frame.color == config_.endpoint.target_color) {
        if (color_hold_start_ < 0.0) {
          color_hold_start_ = input.now;
          out.push_back({Decision::Kind::StopLogger, "", "", ""});
          out.push_back({Decision::Kind::RecordStable, "", "color_flip", ""});
        }
        endpoint = input.now - color_hold_start_ >= config_.endpoint.hold_s;
      } else {
        color_hold_start_ = -1.0;
      }
    }

    if (!endpoint_fired_ &&
        (now_q == "q3_ready" || now_q == "q4_titrating" ||
         now_q == "q5_waiting_stable")) {
      if (endpoint) {
        fire("sigma_endpoint");
        endpoint_fired_ = true;
        endpoint_time_ = input.now;
        verify_pending_ = true;
        verify_at_ = input.now + config_.stability.window_s;
        out.push_back({Decision::Kind::StopLogger, "", "", ""});
        out.push_back({Decision::Kind::RecordStable, "", "endpoint", ""});
      }
    }

    const fsm::StateId q2 = cursor_.current();
    if (!endpoint_fired_ && q2 == "q4_titrating" && input.controller_active &&
        input.controller_phase == control::Phase::Waiting &&
        config_.watch == VisionConfig::Watch::Ph &&
        detect_stability(window_, config_.stability)) {
      fire("sigma_stable");
      out.push_back({Decision::Kind::RecordStable, "", "stable", ""});
    } else if (!endpoint_fired_ && q2 == "q5_waiting_stable" &&
               config_.watch == VisionConfig::Watch::Ph) {
      const double distance =
          std::abs(smoothed_reading() - config_.endpoint.target);
      if (distance > config_.endpoint.tolerance &&
          detect_stability(window_, config_.stability)) {
        fire("sigma_titrate");
        out.push_back({Decision::Kind::ResumeLogger, "", "", ""});
      }
    }

    if (verify_pending_ && cursor_.current() == "q6_complete" &&
        input.now >= verify_at_) {
      bool still_good = true;
      if (config_.watch == VisionConfig::Watch::Ph) {
        still_good = detect_endpoint(window_, config_.endpoint);
      } else {
        still_good = input.frame.color == config_.endpoint.target_color;
      }
      if (still_good) {
        verify_pending_ = false;
        fire("sigma_verify");
        out.push_back({Decision::Kind::NotifyComplete, "", "", ""});
      } else {
        // Verification failed; drop back to watching for a fresh endpoint.
        verify_at_ = input.now + config_.stability.window_s;
      }
    }
  } else {
    // Weighing flow.
    if (q == "q0" && !grasp_commanded_) {
      grasp_commanded_ = true;
      out.push_back({Decision::Kind::ActionCommand, "sigma_grasp", "", ""});
    }
    if (cursor_.current() == plan_.statistics_logger.activation_phase &&
        plan_.statistics_logger.activate && !logger_activated_) {
      logger_activated_ = true;
      out.push_back({Decision::Kind::ActivateLogger, "", "", ""});
    }
    const fsm::StateId now_q = cursor_.current();
    if (now_q == "q1_grasped" && input.controller_active &&
        input.controller_phase == control::Phase::Waiting &&
        std::abs(input.frame.balance_g - config_.endpoint.target) <=
            config_.endpoint.tolerance &&
        detect_stability(window_, config_.stability)) {
      fire("sigma_weigh");
      out.push_back({Decision::Kind::StopLogger, "", "", ""});
      out.push_back({Decision::Kind::RecordStable, "", "weighed", ""});
    }
    if (cursor_.current() == "q2_weighed" && !solvent_commanded_) {
      solvent_commanded_ = true;
      out.push_back({Decision::Kind::ActionCommand, "sigma_dispense", "", ""});
    }
    if (cursor_.current() == "q3_solvent_added" && !stir_commanded_) {
      stir_commanded_ = true;
      out.push_back({Decision::Kind::ActionCommand, "sigma_stir", "", ""});
    }
    if (cursor_.current() == "q4_dissolving" && input.frame.dissolved) {
      fire("sigma_dissolved");
      verify_pending_ = true;
      verify_at_ = input.now + config_.stability.window_s;
    }
    if (verify_pending_ && cursor_.current() == "q5_complete" &&
        input.now >= verify_at_ && input.frame.dissolved) {
      verify_pending_ = false;
      fire("sigma_verify");
      out.push_back({Decision::Kind::NotifyComplete, "", "", ""});
    }
  }

  return out;
}

}  // namespace chemlab::agents
