#include "timebin/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "timebin/errors.hpp"

namespace timebin {

namespace {

using Json = nlohmann::ordered_json;

void require_keys(const Json& obj, const std::string& where,
                  const std::set<std::string>& known) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError(where + ": unknown key \"" + it.key() + "\"");
}

double number(const Json& obj, const std::string& where, const std::string& key,
              double fallback) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (v.is_null()) return std::numeric_limits<double>::infinity();
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return v.get<double>();
}

std::string text(const Json& obj, const std::string& where, const std::string& key,
                 const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_string()) throw ConfigError(where + "." + key + ": expected a string");
  return obj.at(key).get<std::string>();
}

Json device_to_json(const DeviceParams& d) {
  Json j;
  j["t_s_ps"] = d.t_s_ps;
  j["f_m_ghz"] = d.f_m_ghz;
  j["v_pi_lf_v"] = d.v_pi_lf_v;
  j["v_pi_rf_v"] = d.v_pi_rf_v;
  j["drive_vpp_v"] = d.drive_vpp_v;
  j["drive_phase_rad"] = d.drive_phase_rad;
  j["bias_phase_rad"] = d.bias_phase_rad;
  j["p_pi_mw"] = d.p_pi_mw;
  j["eo_bandwidth_3db_ghz"] = d.eo_bandwidth_3db_ghz;
  j["apply_eo_derating"] = d.apply_eo_derating;
  if (std::isinf(d.mzm_extinction_db))
    j["mzm_extinction_db"] = nullptr;
  else
    j["mzm_extinction_db"] = d.mzm_extinction_db;
  j["insertion_loss_db"] = d.insertion_loss_db;
  j["mmi_splitting"] = d.mmi_splitting;
  j["pulse_fwhm_ps"] = d.pulse_fwhm_ps;
  j["switch_sampling"] =
      d.switch_sampling == SwitchSampling::instantaneous ? "instantaneous" : "pulse_averaged";
  return j;
}

DeviceParams device_from_json(const Json& j) {
  static const std::set<std::string> known = {
      "t_s_ps",          "f_m_ghz",        "v_pi_lf_v",         "v_pi_rf_v",
      "drive_vpp_v",     "drive_phase_rad", "bias_phase_rad",   "p_pi_mw",
      "eo_bandwidth_3db_ghz", "apply_eo_derating", "mzm_extinction_db",
      "insertion_loss_db",    "mmi_splitting",     "pulse_fwhm_ps",
      "switch_sampling"};
  require_keys(j, "device", known);
  DeviceParams d;
  d.t_s_ps = number(j, "device", "t_s_ps", d.t_s_ps);
  d.f_m_ghz = number(j, "device", "f_m_ghz", d.f_m_ghz);
  d.v_pi_lf_v = number(j, "device", "v_pi_lf_v", d.v_pi_lf_v);
  d.v_pi_rf_v = number(j, "device", "v_pi_rf_v", d.v_pi_rf_v);
  d.drive_vpp_v = number(j, "device", "drive_vpp_v", d.drive_vpp_v);
  d.drive_phase_rad = number(j, "device", "drive_phase_rad", d.drive_phase_rad);
  d.bias_phase_rad = number(j, "device", "bias_phase_rad", d.bias_phase_rad);
  d.p_pi_mw = number(j, "device", "p_pi_mw", d.p_pi_mw);
  d.eo_bandwidth_3db_ghz = number(j, "device", "eo_bandwidth_3db_ghz", d.eo_bandwidth_3db_ghz);
  if (j.contains("apply_eo_derating")) {
    if (!j.at("apply_eo_derating").is_boolean())
      throw ConfigError("device.apply_eo_derating: expected a boolean");
    d.apply_eo_derating = j.at("apply_eo_derating").get<bool>();
  }
  d.mzm_extinction_db = number(j, "device", "mzm_extinction_db", d.mzm_extinction_db);
  d.insertion_loss_db = number(j, "device", "insertion_loss_db", d.insertion_loss_db);
  d.mmi_splitting = number(j, "device", "mmi_splitting", d.mmi_splitting);
  d.pulse_fwhm_ps = number(j, "device", "pulse_fwhm_ps", d.pulse_fwhm_ps);
  std::string sampling = text(j, "device", "switch_sampling", "instantaneous");
  if (sampling == "instantaneous")
    d.switch_sampling = SwitchSampling::instantaneous;
  else if (sampling == "pulse_averaged")
    d.switch_sampling = SwitchSampling::pulse_averaged;
  else
    throw ConfigError("device.switch_sampling: expected instantaneous|pulse_averaged");
  return d;
}

Json source_to_json(const SourceParams& s) {
  Json j;
  j["rep_rate_mhz"] = s.rep_rate_mhz;
  j["pair_mean"] = s.pair_mean;
  j["multipair_model"] = s.multipair_model == MultipairModel::poisson ? "poisson" : "thermal";
  j["noise_singles_rate_hz"] = s.noise_singles_rate_hz;
  j["pump_phase_jitter_rms_rad"] = s.pump_phase_jitter_rms_rad;
  return j;
}

SourceParams source_from_json(const Json& j) {
  static const std::set<std::string> known = {"rep_rate_mhz", "pair_mean", "multipair_model",
                                              "noise_singles_rate_hz",
                                              "pump_phase_jitter_rms_rad"};
  require_keys(j, "source", known);
  SourceParams s;
  s.rep_rate_mhz = number(j, "source", "rep_rate_mhz", s.rep_rate_mhz);
  s.pair_mean = number(j, "source", "pair_mean", s.pair_mean);
  std::string model = text(j, "source", "multipair_model", "poisson");
  if (model == "poisson")
    s.multipair_model = MultipairModel::poisson;
  else if (model == "thermal")
    s.multipair_model = MultipairModel::thermal;
  else
    throw ConfigError("source.multipair_model: expected poisson|thermal");
  s.noise_singles_rate_hz = number(j, "source", "noise_singles_rate_hz", s.noise_singles_rate_hz);
  s.pump_phase_jitter_rms_rad =
      number(j, "source", "pump_phase_jitter_rms_rad", s.pump_phase_jitter_rms_rad);
  return s;
}

Json detector_to_json(const DetectorParams& d) {
  Json j;
  j["efficiency"] = d.efficiency;
  j["jitter_fwhm_ps"] = d.jitter_fwhm_ps;
  j["dead_time_ns"] = d.dead_time_ns;
  j["dark_rate_hz"] = d.dark_rate_hz;
  j["channel_loss_db"] = d.channel_loss_db;
  j["monitor_port"] = d.monitor_port;
  return j;
}

DetectorParams detector_from_json(const Json& j, const std::string& where) {
  static const std::set<std::string> known = {"efficiency",   "jitter_fwhm_ps",
                                              "dead_time_ns", "dark_rate_hz",
                                              "channel_loss_db", "monitor_port"};
  require_keys(j, where, known);
  DetectorParams d;
  d.efficiency = number(j, where, "efficiency", d.efficiency);
  d.jitter_fwhm_ps = number(j, where, "jitter_fwhm_ps", d.jitter_fwhm_ps);
  d.dead_time_ns = number(j, where, "dead_time_ns", d.dead_time_ns);
  d.dark_rate_hz = number(j, where, "dark_rate_hz", d.dark_rate_hz);
  d.channel_loss_db = number(j, where, "channel_loss_db", d.channel_loss_db);
  d.monitor_port = static_cast<int>(number(j, where, "monitor_port", d.monitor_port));
  return d;
}

Json correlator_to_json(const CoincidenceConfig& c) {
  Json j;
  j["window_ps"] = c.window_ps;
  j["bin_ps"] = c.bin_ps;
  j["range_ps"] = c.range_ps;
  j["pump_period_ps"] = c.pump_period_ps;
  j["accidental_offset_periods"] = c.accidental_offset_periods;
  j["jti_bin_ps"] = c.jti_bin_ps;
  return j;
}

CoincidenceConfig correlator_from_json(const Json& j) {
  static const std::set<std::string> known = {"window_ps",      "bin_ps",
                                              "range_ps",       "pump_period_ps",
                                              "accidental_offset_periods", "jti_bin_ps"};
  require_keys(j, "correlator", known);
  CoincidenceConfig c;
  c.window_ps = number(j, "correlator", "window_ps", c.window_ps);
  c.bin_ps = number(j, "correlator", "bin_ps", c.bin_ps);
  c.range_ps = number(j, "correlator", "range_ps", c.range_ps);
  c.pump_period_ps = number(j, "correlator", "pump_period_ps", c.pump_period_ps);
  c.accidental_offset_periods =
      static_cast<int>(number(j, "correlator", "accidental_offset_periods",
                              c.accidental_offset_periods));
  c.jti_bin_ps = number(j, "correlator", "jti_bin_ps", c.jti_bin_ps);
  return c;
}

}  // namespace

void ExperimentConfig::validate() const {
  device.validate();
  source.validate();
  detector_signal.validate();
  detector_idler.validate();
  correlator.validate();
  if (!std::isfinite(phi_s_rad) || !std::isfinite(phi_i_rad) || !std::isfinite(phi_p_rad))
    throw ConfigError("phases must be finite");
  double expected_period = source.period_ps();
  if (std::abs(correlator.pump_period_ps - expected_period) > 1e-6 * expected_period)
    throw ConfigError("correlator.pump_period_ps inconsistent with source.rep_rate_mhz");
}

PhaseSettings ExperimentConfig::phases() const {
  PhaseSettings ph;
  ph.phi_s = phi_s_rad;
  ph.phi_i = phi_i_rad;
  ph.phi_p = phi_p_rad;
  return ph;
}

DetectorParams ExperimentConfig::effective_detector(const DetectorParams& det) const {
  DetectorParams d = det;
  d.channel_loss_db += device.insertion_loss_db;
  return d;
}

std::string ExperimentConfig::to_json(int indent) const {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["mode"] = mode == DeviceMode::active ? "active" : "passive";
  j["topology"] = topology == Topology::shared ? "shared" : "two_device";
  j["seed"] = seed;
  j["phi_s_rad"] = phi_s_rad;
  j["phi_i_rad"] = phi_i_rad;
  j["phi_p_rad"] = phi_p_rad;
  j["device"] = device_to_json(device);
  j["source"] = source_to_json(source);
  j["detector_signal"] = detector_to_json(detector_signal);
  j["detector_idler"] = detector_to_json(detector_idler);
  j["correlator"] = correlator_to_json(correlator);
  return j.dump(indent);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& content) {
  Json j;
  try {
    j = Json::parse(content);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config JSON parse failure: ") + e.what());
  }
  static const std::set<std::string> known = {
      "schema_version", "mode",      "topology",        "seed",
      "phi_s_rad",      "phi_i_rad", "phi_p_rad",       "device",
      "source",         "detector_signal", "detector_idler", "correlator"};
  require_keys(j, "config", known);

  if (!j.contains("schema_version") || !j.at("schema_version").is_number_integer())
    throw ConfigError("config.schema_version: required integer");
  if (j.at("schema_version").get<int>() != kSchemaVersion)
    throw ConfigError("config.schema_version: unsupported version");

  ExperimentConfig c;
  std::string mode = text(j, "config", "mode", "active");
  if (mode == "active")
    c.mode = DeviceMode::active;
  else if (mode == "passive")
    c.mode = DeviceMode::passive;
  else
    throw ConfigError("config.mode: expected active|passive");
  std::string topo = text(j, "config", "topology", "shared");
  if (topo == "shared")
    c.topology = Topology::shared;
  else if (topo == "two_device")
    c.topology = Topology::two_device;
  else
    throw ConfigError("config.topology: expected shared|two_device");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
      throw ConfigError("config.seed: expected an integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  c.phi_s_rad = number(j, "config", "phi_s_rad", c.phi_s_rad);
  c.phi_i_rad = number(j, "config", "phi_i_rad", c.phi_i_rad);
  c.phi_p_rad = number(j, "config", "phi_p_rad", c.phi_p_rad);
  if (j.contains("device")) c.device = device_from_json(j.at("device"));
  if (j.contains("source")) c.source = source_from_json(j.at("source"));
  if (j.contains("detector_signal"))
    c.detector_signal = detector_from_json(j.at("detector_signal"), "detector_signal");
  if (j.contains("detector_idler"))
    c.detector_idler = detector_from_json(j.at("detector_idler"), "detector_idler");
  if (j.contains("correlator")) c.correlator = correlator_from_json(j.at("correlator"));
  if (!j.contains("correlator") || !j.at("correlator").contains("pump_period_ps"))
    c.correlator.pump_period_ps = c.source.period_ps();

  try {
    c.validate();
  } catch (const std::domain_error& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write config file: " + path);
  out << to_json() << "\n";
  if (!out) throw IoError("failed writing config file: " + path);
}

std::string ExperimentConfig::digest() const {
  std::string canonical = to_json(-1);
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.detector_idler.monitor_port = 0;
  // Signal+idler channel budget: 18.6 dB total including the 6.1 dB device
  // insertion loss that effective_detector() folds in.
  c.detector_signal.channel_loss_db = 12.5;
  c.detector_idler.channel_loss_db = 12.5;
  return c;
}

}  // namespace timebin
