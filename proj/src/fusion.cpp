#include "chemlab/fusion.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>

namespace chemlab::fusion {

std::string to_string(Channel channel) {
  switch (channel) {
    case Channel::Audio:
      return "audio";
    case Channel::Stat:
      return "stat";
    case Channel::Visual:
      return "visual";
    case Channel::Sensor:
      return "sensor";
  }
  return "?";
}

Channel channel_from_string(const std::string& name) {
  if (name == "audio") return Channel::Audio;
  if (name == "stat") return Channel::Stat;
  if (name == "visual") return Channel::Visual;
  if (name == "sensor") return Channel::Sensor;
  throw Error("unknown observation channel '" + name + "'");
}

double gate_confidence(const Observation& observation,
                       bool state_indicates_operation, bool anomaly_in_window,
                       const FusionConfig& config) {
  if (!state_indicates_operation && observation.value != 0.0) return 0.0;
  if (anomaly_in_window) {
    return observation.confidence_raw * config.anomaly_attenuation;
  }
  return observation.confidence_raw;
}

double gate_confidence(const Observation& observation, const fsm::StateId& q_t,
                       const std::set<fsm::StateId>& operation_states,
                       bool anomaly_in_window, const FusionConfig& config) {
  return gate_confidence(observation, operation_states.count(q_t) > 0,
                         anomaly_in_window, config);
}

FusionOutcome fuse(const std::vector<GatedObservation>& channels,
                   const FusionConfig& config) {
  FusionOutcome outcome;
  double confidence_sum = 0.0;
  for (const auto& c : channels) {
    if (c.confidence_gated >= config.threshold) {
      confidence_sum += c.confidence_gated;
    }
  }
  if (confidence_sum <= 0.0) {
    outcome.value = std::nullopt;
    outcome.confidence = 0.0;
    outcome.below_threshold = true;
    return outcome;
  }
  double fused = 0.0;
  double conf_total = 0.0;
  std::size_t included = 0;
  for (const auto& c : channels) {
    if (c.confidence_gated < config.threshold) continue;
    const double w = c.confidence_gated / confidence_sum;
    outcome.weights[c.observation.id] = w;
    fused += w * c.observation.value;
    conf_total += c.confidence_gated;
    ++included;
  }
  outcome.value = fused;
  outcome.confidence = conf_total / static_cast<double>(included);
  return outcome;
}

void Datastore::record(FusedRecord record) {
  if (!records_.empty() && record.timestamp < records_.back().timestamp) {
    throw TimestampRegression(record.timestamp, records_.back().timestamp);
  }
  if (record.value.has_value() == (record.confidence == 0.0)) {
    throw Error("fused record invariant: value is null iff confidence is 0");
  }
  if (record.value) {
    cumulative_ += *record.value;
    record.cumulative = cumulative_;
  } else {
    record.cumulative = cumulative_;
  }
  records_.push_back(std::move(record));
}

void Datastore::append_ph(double timestamp, double ph, double temperature_c) {
  if (!ph_series_.empty() && timestamp < ph_series_.back()[0]) {
    throw TimestampRegression(timestamp, ph_series_.back()[0]);
  }
  ph_series_.push_back({timestamp, ph, temperature_c});
}

void Datastore::append_anomaly(AnomalyEntry entry) {
  anomalies_.push_back(std::move(entry));
}

void Datastore::resolve_anomaly(const std::string& code,
                                const std::string& resolution) {
  for (auto it = anomalies_.rbegin(); it != anomalies_.rend(); ++it) {
    if (it->code == code && it->resolution == "open") {
      it->resolution = resolution;
      return;
    }
  }
}

double round_ml(double value) { return std::round(value * 1e4) / 1e4; }

double round_confidence(double value) {
  if (value == 0.0) return 0.0;
  const double magnitude = std::floor(std::log10(std::abs(value)));
  const double scale = std::pow(10.0, 5.0 - magnitude);
  return std::round(value * scale) / scale;
}

void Datastore::write_jsonl(std::ostream& os) const {
  for (const auto& r : records_) {
    nlohmann::json raw(nlohmann::json::value_t::object);
    for (const auto& [name, values] : r.raw) {
      raw[name] = {
          {"value", round_ml(values.value)},
          {"confidence_raw", round_confidence(values.confidence_raw)},
          {"confidence_gated", round_confidence(values.confidence_gated)},
      };
    }
    nlohmann::json line = {
        {"timestamp", r.timestamp},
        {"quantity", r.quantity},
        {"value", r.value ? nlohmann::json(round_ml(*r.value))
                          : nlohmann::json(nullptr)},
        {"confidence", round_confidence(r.confidence)},
        {"cumulative", round_ml(r.cumulative)},
        {"raw", std::move(raw)},
        {"state", r.state},
        {"subtask", r.subtask},
        {"anomalies", r.anomalies},
    };
    os << line.dump() << "\n";
  }
  for (const auto& p : ph_series_) {
    nlohmann::json line = {
        {"timestamp", p[0]},
        {"quantity", "pH"},
        {"value", round_ml(p[1])},
        {"temperature_c", round_ml(p[2])},
    };
    os << line.dump() << "\n";
  }
  for (const auto& a : anomalies_) {
    nlohmann::json line = {
        {"timestamp", a.timestamp}, {"quantity", "anomaly"},
        {"code", a.code},           {"detail", a.detail},
        {"response", a.response},   {"resolution", a.resolution},
    };
    os << line.dump() << "\n";
  }
}

std::vector<CleanPoint> smooth_single_source(
    const std::vector<std::pair<double, double>>& series, int window,
    double mad_multiplier) {
  std::vector<CleanPoint> out;
  out.reserve(series.size());
  auto median_of = [](std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2]
                      : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  };
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (i > 0 && series[i].first < series[i - 1].first) {
      throw NonUniformGrid("timestamps must ascend");
    }
    CleanPoint point{series[i].first, series[i].second, false};
    const std::size_t lo =
        i >= static_cast<std::size_t>(window) ? i - window : 0;
    if (i - lo >= 3) {  // need a few trailing samples before judging
      std::vector<double> values;
      values.reserve(i - lo);
      for (std::size_t j = lo; j < i; ++j) values.push_back(series[j].second);
      const double med = median_of(values);
      std::vector<double> deviations;
      deviations.reserve(values.size());
      for (double v : values) deviations.push_back(std::abs(v - med));
      const double mad = median_of(deviations);
      if (std::abs(series[i].second - med) > mad_multiplier * mad) {
        point.value = med;
        point.flagged = true;
      }
    }
    out.push_back(point);
  }
  return out;
}

}  // namespace chemlab::fusion
