#pragma once

#include <deque>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "chemlab/controller.hpp"
#include "chemlab/fsm.hpp"
#include "chemlab/plant.hpp"
#include "chemlab/protocol.hpp"

namespace chemlab::agents {

// Trailing window of (t, reading) pairs used for stability and endpoint
// decisions. Oldest entries beyond the retention horizon are dropped.
class ReadingWindow {
 public:
  explicit ReadingWindow(double retention_s = 30.0)
      : retention_s_(retention_s) {}

  void push(double timestamp, double value);
  bool empty() const { return samples_.empty(); }
  double latest() const { return samples_.back().second; }
  double span() const;
  // max - min and span over the trailing `horizon_s` seconds.
  std::pair<double, double> range_over(double horizon_s) const;
  // true iff every sample in the trailing horizon lies in [lo, hi] and the
  // horizon is fully covered.
  bool holds_within(double horizon_s, double lo, double hi) const;
  const std::deque<std::pair<double, double>>& samples() const {
    return samples_;
  }

 private:
  double retention_s_;
  std::deque<std::pair<double, double>> samples_;
};

struct StabilityConfig {
  double window_s = 1.0;
  double max_delta = 0.02;
};

struct EndpointConfig {
  double target = 0.0;
  double tolerance = 0.05;
  double hold_s = 5.0;
  std::string target_color;  // set for color-endpoint scenarios
};

bool detect_stability(const ReadingWindow& window,
                      const StabilityConfig& config);
bool detect_endpoint(const ReadingWindow& window, const EndpointConfig& config);

enum class EventClass { Expected, Anomalous };

// Pure classification: an event is expected only while dispensing is
// commanded and the machine is in a state whose subtasks anticipate it.
EventClass classify_event(const plant::AcousticEvent& event,
                          const fsm::StateId& q_t, bool dispensing_active,
                          const std::set<fsm::StateId>& dispensing_states);

// count x nominal quantity; confidence = mean clarity clamped to [0,1].
std::pair<double, double> estimate_audio_quantity(
    const std::vector<plant::AcousticEvent>& expected_events,
    double nominal_quantity, double baseline_confidence);

std::optional<std::string> check_timeout(double last_event_time, double now,
                                         double limit_s,
                                         bool dispensing_active);

struct AudioSupervisorConfig {
  double nominal_quantity = 0.046875;  // mL per droplet (or g per grain)
  double timeout_s = 10.0;
  double baseline_confidence = 0.7;
  std::set<fsm::StateId> dispensing_states;
};

class AudioSupervisor {
 public:
  explicit AudioSupervisor(const AudioSupervisorConfig& config)
      : config_(config) {}

  struct Output {
    int expected_events = 0;
    int anomalous_events = 0;
    double increment = 0.0;          // this tick's expected quantity
    double confidence = 0.0;         // gamma_a for the increment
    bool first_detection = false;    // fire sigma_audio_detect once
    std::optional<std::string> timeout_symbol;
    std::vector<std::string> anomaly_codes;
  };

  Output step(const std::vector<plant::AcousticEvent>& events,
              const fsm::StateId& q_t, bool dispensing_active, double now);

  double total() const { return q_audio_total_; }
  int total_expected_events() const { return expected_count_; }
  double mean_clarity() const;

 private:
  AudioSupervisorConfig config_;
  double q_audio_total_ = 0.0;
  int expected_count_ = 0;
  double clarity_sum_ = 0.0;
  double last_event_time_ = 0.0;
  bool dispensing_seen_ = false;
  bool detection_sent_ = false;
  bool timeout_latched_ = false;
};

// A Vision Supervisor decision; the runner routes these onto the bus, the
// cursor, the controller, and the datastore.
struct Decision {
  enum class Kind {
    FireSymbol,       // step the cursor
    ActivateLogger,   // start the statistics-based quantity logger
    ResumeLogger,
    StopLogger,       // endpoint reached, stop dispensing
    FlagAnomaly,      // route a controller anomaly flag this tick
    RecordStable,     // sigma_record event: push a stable data point
    LogAnomaly,       // append to the anomaly log in D
    Escalate,         // unresolvable, notify the Planner (abort path)
    ActionCommand,    // dispatch a primitive to the Action Agent
    NotifyComplete,   // accepting state reached, trigger the Summarizer
  };
  Kind kind;
  std::string symbol;   // FireSymbol / ActionCommand
  std::string code;     // anomaly code
  std::string detail;
};

struct VisionConfig {
  StabilityConfig stability;
  EndpointConfig endpoint;
  double smooth_window_s = 1.0;  // trailing mean over raw readings
  // Weighing scenarios watch the balance instead of the pH probe.
  enum class Watch { Ph, Balance, Color } watch = Watch::Ph;
};

// Rule-based core observer and scheduler: tracks q_t, schedules the action
// agent and the quantity logger, detects the endpoint, and routes anomalies.
class VisionSupervisor {
 public:
  VisionSupervisor(const fsm::StateMachine& machine,
                   const proto::TaskPlan& plan, const VisionConfig& config);

  struct Input {
    plant::SensorFrame frame;
    std::vector<proto::AgentMessage> inbox;
    control::Phase controller_phase = control::Phase::Motion;
    bool controller_active = false;
    bool controller_escalated = false;
    double now = 0.0;
  };

  std::vector<Decision> step(const Input& input);

  const fsm::MachineCursor& cursor() const { return cursor_; }
  fsm::MachineCursor& cursor() { return cursor_; }
  double smoothed_reading() const;
  const ReadingWindow& window() const { return window_; }
  bool endpoint_fired() const { return endpoint_fired_; }
  double endpoint_time() const { return endpoint_time_; }

 private:
  void handle_message(const proto::AgentMessage& msg, const Input& input,
                      std::vector<Decision>& out);
  void watch_reading(const Input& input);

  proto::TaskPlan plan_;
  VisionConfig config_;
  fsm::MachineCursor cursor_;
  ReadingWindow window_;
  std::deque<double> raw_readings_;  // for the trailing-mean smoother
  std::size_t smooth_count_ = 10;
  bool grasp_commanded_ = false;
  bool draw_commanded_ = false;
  bool solvent_commanded_ = false;
  bool stir_commanded_ = false;
  bool logger_activated_ = false;
  bool endpoint_fired_ = false;
  double endpoint_time_ = 0.0;
  double color_hold_start_ = -1.0;
  bool verify_pending_ = false;
  double verify_at_ = 0.0;
  bool anomaly_active_ = false;
  std::string anomaly_code_;
};

}  // namespace chemlab::agents
