#pragma once

#include <array>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "chemlab/errors.hpp"
#include "chemlab/fsm.hpp"
#include "json.hpp"

namespace chemlab::fusion {

// Observation channels of the high-confidence recorder.
enum class Channel { Audio, Stat, Visual, Sensor };

std::string to_string(Channel channel);
Channel channel_from_string(const std::string& name);

struct Observation {
  Channel id = Channel::Audio;
  double value = 0.0;           // quantity increment over the record window
  double confidence_raw = 0.0;  // in [0, 1]
  double timestamp = 0.0;
};

struct FusionConfig {
  double threshold = 0.6;            // theta
  double anomaly_attenuation = 0.1;  // applied on execution anomalies
  double divergence_tolerance_frac = 0.10;
  double droplet_volume_ml = 0.046875;  // divergence tolerance floor
};

// Algorithm step 1, state-event consistency check:
//   gamma = 0            when the state says no operation but value != 0
//   gamma = raw * 0.1    when an execution anomaly overlaps the window
//   gamma = raw          otherwise
double gate_confidence(const Observation& observation,
                       bool state_indicates_operation,
                       bool anomaly_in_window, const FusionConfig& config);

double gate_confidence(const Observation& observation, const fsm::StateId& q_t,
                       const std::set<fsm::StateId>& operation_states,
                       bool anomaly_in_window, const FusionConfig& config);

struct GatedObservation {
  Observation observation;
  double confidence_gated = 0.0;
};

struct FusionOutcome {
  std::optional<double> value;  // null when no channel passes the gate
  double confidence = 0.0;
  std::map<Channel, double> weights;
  bool below_threshold = false;  // data-quality anomaly
};

// Algorithm step 2: eliminate channels under theta, normalize the rest into
// weights, fuse by the weighted sum, and average the surviving confidences.
FusionOutcome fuse(const std::vector<GatedObservation>& channels,
                   const FusionConfig& config);

struct FusedRecord {
  double timestamp = 0.0;
  std::string quantity;              // e.g. "volume"
  std::optional<double> value;       // increment over the window
  double confidence = 0.0;
  double cumulative = 0.0;           // running fused total, for reporting
  struct Raw {
    double value = 0.0;
    double confidence_raw = 0.0;
    double confidence_gated = 0.0;
  };
  std::map<std::string, Raw> raw;
  fsm::StateId state;
  std::string subtask;
  std::vector<std::string> anomalies;
};

struct AnomalyEntry {
  double timestamp = 0.0;
  std::string code;
  std::string detail;
  std::string response;
  std::string resolution = "open";
};

// Append-only store D: fused records plus raw single-source series and the
// anomaly log. Timestamps never regress within a stream.
class Datastore {
 public:
  void record(FusedRecord record);  // throws TimestampRegression
  void append_ph(double timestamp, double ph, double temperature_c);
  void append_anomaly(AnomalyEntry entry);
  void resolve_anomaly(const std::string& code, const std::string& resolution);

  const std::vector<FusedRecord>& records() const { return records_; }
  const std::vector<std::array<double, 3>>& ph_series() const {
    return ph_series_;
  }
  const std::vector<AnomalyEntry>& anomalies() const { return anomalies_; }
  double cumulative_quantity() const { return cumulative_; }

  // JSON-lines, one record per line, canonical key order and float format.
  void write_jsonl(std::ostream& os) const;

 private:
  std::vector<FusedRecord> records_;
  std::vector<std::array<double, 3>> ph_series_;
  std::vector<AnomalyEntry> anomalies_;
  double cumulative_ = 0.0;
};

struct CleanPoint {
  double timestamp = 0.0;
  double value = 0.0;
  bool flagged = false;  // replaced by the window median, low confidence
};

// Trailing-window MAD despiking for single-source series (pH, temperature).
std::vector<CleanPoint> smooth_single_source(
    const std::vector<std::pair<double, double>>& series, int window = 21,
    double mad_multiplier = 5.0);

// Canonical float formatting shared with the report writer: mL quantities at
// 4 decimals, confidences at 6 significant digits.
double round_ml(double value);
double round_confidence(double value);

}  // namespace chemlab::fusion
