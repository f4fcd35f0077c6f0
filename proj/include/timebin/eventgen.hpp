#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "timebin/device.hpp"

namespace timebin {

enum class MultipairModel { poisson, thermal };

struct SourceParams {
  double rep_rate_mhz = 500.0;
  double pair_mean = 0.01;  // mean pairs per pulse; << 1 for the two-term state
  MultipairModel multipair_model = MultipairModel::poisson;
  double noise_singles_rate_hz = 0.0;  // uncorrelated background per channel
  double pump_phase_jitter_rms_rad = 0.0;

  void validate() const;
  double period_ps() const { return 1e6 / rep_rate_mhz; }
};

struct DetectorParams {
  double efficiency = 0.85;
  double jitter_fwhm_ps = 50.0;
  double dead_time_ns = 0.0;
  double dark_rate_hz = 0.0;
  double channel_loss_db = 0.0;  // fiber/chip budget from source to detector
  int monitor_port = 0;          // which device output this detector watches

  void validate() const;
  /// Photon survival probability, 10^(-loss/10) * efficiency.
  double survival() const;
};

struct TagEvent {
  std::uint8_t channel;
  std::int64_t time_ps;
};

struct StreamHeader {
  std::uint64_t n_pulses = 0;
  double rep_rate_mhz = 0.0;
  double duration_ps = 0.0;
  std::uint64_t seed = 0;
  std::string params_digest;
};

/// Channel-stamped detection events, time-sorted (ties by channel), the wire
/// format between generator and correlator.
struct TimeTagStream {
  StreamHeader header;
  std::vector<TagEvent> events;

  std::vector<std::int64_t> channel_times(std::uint8_t channel) const;
};

/// One emitted photon pair before detection. pulse/ordinal identify the
/// pair's reserved random-number slots so detection is reproducible no
/// matter how generation was partitioned.
struct PairEvent {
  std::uint64_t pulse;
  std::uint32_t ordinal;
  std::uint8_t port_s, port_i;
  double t_s_ps, t_i_ps;  // absolute emission times
};

struct PairBatch {
  std::vector<PairEvent> pairs;
  std::uint64_t n_pulses = 0;
  SourceParams source;
};

/// Rebuilds the output distribution for a pump-phase offset; required when
/// pump_phase_jitter_rms_rad > 0. Must be safe to call concurrently.
using DistributionRebuild = std::function<PropagationResult(double phi_p_offset)>;

/// Draws pair emissions pulse by pulse: the pair count per pulse from the
/// multipair model, then each pair's joint (t_s, t_i, port pair) outcome
/// from the lobe distribution, so interference correlations survive.
/// A distribution total slightly below one (sub-unitary switch averaging) is
/// treated as loss; above one is rejected. Fixed seed gives a bit-identical
/// batch for any worker count. Pulse k is emitted at (k + 1/2) periods.
PairBatch sample_pairs(std::uint64_t n_pulses, const SourceParams& source,
                       const PropagationResult& distribution, std::uint64_t seed,
                       int workers = 1, const DistributionRebuild& rebuild = nullptr);

/// Applies channel survival, detector jitter, dead time, and uniform dark +
/// background singles; returns the time-sorted tag stream (signal = channel
/// 0, idler = channel 1).
TimeTagStream detect(const PairBatch& batch, const DetectorParams& det_s,
                     const DetectorParams& det_i, std::uint64_t seed);

struct CarEstimate {
  double true_rate_hz = 0.0;
  double accidental_rate_hz = 0.0;
  double car = 0.0;
  bool infinite = false;
  double visibility_ceiling = 1.0;  // CAR/(CAR+2)
};

/// Analytic CAR = true-coincidence rate / accidental rate for the given
/// operating distribution (pass the fringe-maximum distribution for the CAR
/// that enters the visibility ceiling). Accidentals combine same-pulse
/// multipair products with window-proportional uniform-background terms.
CarEstimate expected_car(const SourceParams& source, const DetectorParams& det_s,
                         const DetectorParams& det_i, const PropagationResult& distribution,
                         double window_ps);

/// Uniform background rate per channel (on top of dark counts) that brings
/// expected_car to the target. Throws when the multipair floor already
/// forbids the target.
double tune_noise_for_car(double target_car, const SourceParams& source,
                          const DetectorParams& det_s, const DetectorParams& det_i,
                          const PropagationResult& distribution_at_max, double window_ps);

}  // namespace timebin
