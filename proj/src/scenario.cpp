#include "chemlab/scenario.hpp"

#include <fstream>

namespace chemlab::run {

namespace {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

chem::AcidSpec acid_from_json(const nlohmann::json& j) {
  chem::AcidSpec acid;
  acid.name = j.value("name", "");
  const std::string kind = j.value("kind", "strong");
  if (kind == "strong") {
    acid.kind = chem::AcidKind::Strong;
  } else if (kind == "weak") {
    acid.kind = chem::AcidKind::Weak;
  } else {
    throw ConfigError("acid kind must be strong|weak, got '" + kind + "'");
  }
  if (j.contains("pka")) {
    for (const auto& v : j.at("pka")) acid.pka.push_back(v.get<double>());
  }
  for (std::size_t i = 1; i < acid.pka.size(); ++i) {
    if (acid.pka[i] < acid.pka[i - 1]) {
      throw ConfigError("pKa list must ascend");
    }
  }
  acid.concentration = j.value("concentration", 0.0);
  acid.volume_l = j.value("volume_ml", 0.0) / 1000.0;
  if (acid.concentration < 0.0 || acid.volume_l < 0.0) {
    throw ConfigError("acid concentration and volume must be >= 0");
  }
  if (acid.kind == chem::AcidKind::Weak &&
      (acid.pka.empty() || acid.pka.size() > 2)) {
    throw ConfigError("weak acids need 1 or 2 pKa values");
  }
  return acid;
}

}  // namespace

Scenario Scenario::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    throw ConfigError("scenario file is not valid JSON: " + path.string());
  }
  return from_json(j);
}

Scenario Scenario::from_json(const nlohmann::json& j) {
  Scenario s;
  s.raw = j;
  s.name = j.value("name", "scenario");
  if (!j.contains("instruction")) throw ConfigError("missing instruction");
  s.instruction = j.at("instruction").get<std::string>();
  s.notes = j.value("notes", "");
  s.seed = j.value("seed", std::uint64_t{1});
  s.replicates = j.value("replicates", 1);
  if (s.replicates < 1) throw ConfigError("replicates must be >= 1");
  maybe(j, "max_sim_s", s.max_sim_s);

  if (j.contains("grammar")) {
    s.grammar = planner::GrammarProfile::from_json(j.at("grammar"));
  }
  if (j.contains("inventory")) {
    for (const auto& item : j.at("inventory")) {
      planner::Inventory::Item entry;
      entry.name = item.at("name").get<std::string>();
      entry.quantity = item.value("quantity", 1.0);
      entry.unit = item.value("unit", "");
      entry.location = item.value("location", "");
      s.inventory.items.push_back(std::move(entry));
    }
  }

  if (!j.contains("chemistry")) throw ConfigError("missing chemistry block");
  const auto& chem_j = j.at("chemistry");
  const std::string kind = chem_j.value("kind", "acid_base");
  if (kind == "acid_base") {
    s.chemistry.kind = plant::ChemistrySetup::Kind::AcidBase;
    s.chemistry.analyte = acid_from_json(chem_j.at("analyte"));
    s.chemistry.titrant_mol_l =
        chem_j.at("titrant").value("concentration", 0.1);
  } else if (kind == "complexometric") {
    s.chemistry.kind = plant::ChemistrySetup::Kind::Complexometric;
    s.chemistry.ca_mol_l = chem_j.at("calcium").value("concentration", 0.01);
    s.chemistry.ca_volume_ml = chem_j.at("calcium").value("volume_ml", 5.0);
    s.chemistry.edta_mol_l = chem_j.value("edta_concentration", 0.02);
    if (chem_j.contains("indicator")) {
      const auto& ind = chem_j.at("indicator");
      s.chemistry.indicator.bound_color = ind.value("bound_color", "magenta");
      s.chemistry.indicator.free_color = ind.value("free_color", "sapphire");
      s.chemistry.indicator.endpoint_fraction =
          ind.value("endpoint_fraction", 0.001);
    }
  } else if (kind == "weighing") {
    s.chemistry.kind = plant::ChemistrySetup::Kind::Weighing;
  } else {
    throw ConfigError("chemistry kind must be acid_base|complexometric|weighing");
  }

  if (j.contains("plant")) {
    const auto& p = j.at("plant");
    maybe(p, "dt", s.plant_config.dt);
    maybe(p, "tau_s", s.plant_config.tau_s);
    maybe(p, "ph_noise_sigma", s.plant_config.ph_noise_sigma);
    maybe(p, "grain_g", s.plant_config.grain_g);
    maybe(p, "clarity_min", s.plant_config.clarity_min);
    maybe(p, "clarity_max", s.plant_config.clarity_max);
    maybe(p, "dissolve_s", s.plant_config.dissolve_s);
    if (p.contains("droplet")) {
      const auto& d = p.at("droplet");
      maybe(d, "volume_ml", s.plant_config.droplet.volume_ml);
      maybe(d, "displacement_mm", s.plant_config.droplet.displacement_mm);
      maybe(d, "jitter_frac", s.plant_config.droplet.jitter_frac);
      maybe(d, "jitter_clamp", s.plant_config.droplet.jitter_clamp);
    }
    if (s.plant_config.dt <= 0.0) throw ConfigError("plant.dt must be > 0");
  }

  if (j.contains("controller")) {
    const auto& c = j.at("controller");
    maybe(c, "rate_mm_s", s.controller.rate_mm_s);
    maybe(c, "fine_rate_mm_s", s.controller.fine_rate_mm_s);
    maybe(c, "pour_rate_g_s", s.controller.pour_rate_g_s);
    maybe(c, "fine_pour_rate_g_s", s.controller.fine_pour_rate_g_s);
    maybe(c, "epsilon", s.controller.epsilon);
    maybe(c, "fine_threshold", s.controller.fine_threshold);
    maybe(c, "rate_of_change_limit", s.controller.rate_of_change_limit);
    maybe(c, "rate_window_s", s.controller.rate_window_s);
    maybe(c, "retract_rate_mm_s", s.controller.retract_rate_mm_s);
    maybe(c, "retract_duration_s", s.controller.retract_duration_s);
    maybe(c, "max_retries", s.controller.max_retries);
    maybe(c, "clean_steps_to_forgive", s.controller.clean_steps_to_forgive);
    if (s.controller.epsilon <= 0.0) {
      throw ConfigError("controller.epsilon must be > 0");
    }
    if (s.controller.fine_rate_mm_s > s.controller.rate_mm_s) {
      throw ConfigError("controller.fine_rate must not exceed the coarse rate");
    }
  }
  // k follows the droplet calibration unless the file pins it explicitly.
  s.controller.k =
      s.plant_config.droplet.volume_ml / s.plant_config.droplet.displacement_mm;
  if (j.contains("controller") && j.at("controller").contains("k")) {
    s.controller.k = j.at("controller").at("k").get<double>();
  }

  if (j.contains("supervisor")) {
    const auto& v = j.at("supervisor");
    if (v.contains("stability")) {
      maybe(v.at("stability"), "window_s", s.stability.window_s);
      maybe(v.at("stability"), "max_delta", s.stability.max_delta);
    }
    if (v.contains("endpoint")) {
      maybe(v.at("endpoint"), "tolerance", s.endpoint_tolerance);
      maybe(v.at("endpoint"), "hold_s", s.endpoint_hold_s);
    }
    maybe(v, "smooth_window_s", s.smooth_window_s);
    maybe(v, "audio_timeout_s", s.audio_timeout_s);
    maybe(v, "audio_baseline_confidence", s.audio_baseline_confidence);
    maybe(v, "sensor_channel_confidence", s.sensor_channel_confidence);
    if (s.endpoint_hold_s <= 0.0) {
      throw ConfigError("endpoint hold_s must be > 0");
    }
  }

  if (j.contains("fusion")) {
    const auto& f = j.at("fusion");
    maybe(f, "threshold", s.fusion_config.threshold);
    maybe(f, "anomaly_attenuation", s.fusion_config.anomaly_attenuation);
    maybe(f, "divergence_tolerance_frac",
          s.fusion_config.divergence_tolerance_frac);
    if (s.fusion_config.threshold <= 0.0 || s.fusion_config.threshold >= 1.0) {
      throw ConfigError("fusion.threshold must be in (0, 1)");
    }
  }
  s.fusion_config.droplet_volume_ml = s.plant_config.droplet.volume_ml;

  if (j.contains("analysis")) {
    const auto& a = j.at("analysis");
    maybe(a, "resample_step_ml", s.analysis_config.resample_step_ml);
    maybe(a, "sg_window", s.analysis_config.sg_window);
    maybe(a, "sg_order", s.analysis_config.sg_order);
    maybe(a, "peak_prominence_factor",
          s.analysis_config.peak_prominence_factor);
    maybe(a, "min_separation_ml", s.analysis_config.min_separation_ml);
    maybe(a, "zoom_half_width_ml", s.analysis_config.zoom_half_width_ml);
  }
  if (j.contains("recording")) {
    maybe(j.at("recording"), "ph_series_every_s", s.ph_series_every_s);
    maybe(j.at("recording"), "record_every_s", s.record_every_s);
  }

  if (j.contains("faults")) {
    for (const auto& f : j.at("faults")) {
      DeclaredFault fault;
      fault.spec.name = f.at("name").get<std::string>();
      fault.spec.kind =
          plant::fault_kind_from_string(f.at("kind").get<std::string>());
      fault.spec.start_s = f.at("start_s").get<double>();
      fault.spec.end_s = f.at("end_s").get<double>();
      fault.enabled = f.value("enabled", false);
      s.faults.push_back(std::move(fault));
    }
  }

  if (j.contains("action_durations")) {
    for (const auto& [symbol, duration] : j.at("action_durations").items()) {
      s.action_durations[symbol] = duration.get<double>();
    }
  }
  return s;
}

}  // namespace chemlab::run
