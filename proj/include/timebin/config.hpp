#pragma once

#include <cstdint>
#include <string>

#include "timebin/correlator.hpp"
#include "timebin/eventgen.hpp"

namespace timebin {

/// Full experiment description, the unit of reproducibility: every command
/// is a pure function of (config, seed). Serialized as versioned JSON with
/// unknown keys rejected; all units are explicit in the field names.
struct ExperimentConfig {
  static constexpr int kSchemaVersion = 1;

  DeviceMode mode = DeviceMode::active;
  Topology topology = Topology::shared;
  std::uint64_t seed = 1;

  DeviceParams device;
  SourceParams source;
  DetectorParams detector_signal;
  DetectorParams detector_idler;
  CoincidenceConfig correlator;

  // Operating phases; in shared topology phi_s_rad drives both photons.
  double phi_s_rad = 0.0;
  double phi_i_rad = 0.0;
  double phi_p_rad = 0.0;

  void validate() const;

  PhaseSettings phases() const;

  /// Detector with the device insertion loss folded into its channel budget
  /// (the generator models the chip itself as lossless).
  DetectorParams effective_detector(const DetectorParams& det) const;

  std::string to_json(int indent = 2) const;
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;

  /// FNV-1a hash of the canonical serialization, hex-encoded.
  std::string digest() const;
};

ExperimentConfig default_config();

}  // namespace timebin
