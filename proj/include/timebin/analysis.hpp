#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "timebin/config.hpp"

namespace timebin {

enum class SweepPath { analytic, montecarlo };

struct BellPoint {
  double actuator_phase_rad;  // phase applied to the TPS actuator
  double fringe_arg_rad;      // model fringe argument (phi_s + phi_i - phi_p)
  double coincidences;
  double accidentals;
  double integration_s;
};

struct BellCurve {
  std::vector<BellPoint> points;
  DeviceMode mode = DeviceMode::active;
};

struct FringeFit {
  double offset = 0.0;      // A in N = A [1 + V cos(phi - phi0)]
  double visibility = 0.0;  // bounded to [0,1]
  double phase_rad = 0.0;
  double offset_err = 0.0;
  double visibility_err = 0.0;
  double phase_err = 0.0;
  double chi2_dof = 0.0;
  int n_points = 0;
  std::array<double, 9> covariance{};  // of (a, b, c) in a + b cos + c sin
};

/// Sweeps the interferometer phase over one full fringe period and records
/// coincidence and accidental counts per point, either from the analytic
/// expectation (noise-free) or from a full Monte Carlo run through the
/// generator and correlator. All coincidence events enter the count (no
/// temporal post-selection) unless central_window_ps restricts the window.
/// Points are evaluated concurrently; output is ordered and deterministic.
BellCurve run_bell_sweep(const ExperimentConfig& config, int n_phases,
                         std::uint64_t pulses_per_point, SweepPath path,
                         std::optional<double> central_window_ps = std::nullopt);

/// Weighted harmonic regression of N(phi) = A[1 + V cos(phi - phi0)] against
/// the fringe argument, with Poisson weights; optional iterations reweight
/// from the model prediction. subtract_accidentals removes the per-point
/// accidental estimate before fitting (variances add accordingly).
FringeFit fit_fringe(const BellCurve& curve, bool subtract_accidentals,
                     int reweight_iterations = 0);

struct ViolationReport {
  double sigmas;   // (V - 1/sqrt(2)) / sigma_V
  double s_value;  // 2 sqrt(2) V
  double s_err;
};

ViolationReport violation_sigmas(const FringeFit& fit);

}  // namespace timebin
