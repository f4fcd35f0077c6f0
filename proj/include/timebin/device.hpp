#pragma once

#include <array>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "timebin/core.hpp"

namespace timebin {

enum class DeviceMode { passive, active };
enum class Topology { shared, two_device };

/// How the switch transfer is evaluated across the optical pulse: at the
/// pulse center (exactly unitary, used for ideal-device analytics) or as the
/// intensity-weighted average over the pulse envelope (captures the residual
/// extinction penalty of a sinusoidal drive; slightly lossy).
enum class SwitchSampling { instantaneous, pulse_averaged };

/// Receiver chip parameters: balanced MZM switch followed by an unbalanced
/// MZI with path delay t_s_ps. Defaults follow the characterized device
/// (100 ps delay, 5 GHz synchronous drive, V_pi 3.37 V at low frequency and
/// 4.35 V at the drive frequency, TPS P_pi 27.3 mW).
struct DeviceParams {
  double t_s_ps = 100.0;
  double f_m_ghz = 5.0;
  double v_pi_lf_v = 3.37;
  double v_pi_rf_v = 4.35;
  double drive_vpp_v = 4.35;
  double drive_phase_rad = -kPi / 2.0;  // aligns early->long, late->short
  double bias_phase_rad = kPi / 2.0;    // quadrature
  double p_pi_mw = 27.3;
  double eo_bandwidth_3db_ghz = 21.4;
  bool apply_eo_derating = false;  // derate the RF phase swing by the
                                   // single-pole EO response at f_m
  double mzm_extinction_db = std::numeric_limits<double>::infinity();
  double insertion_loss_db = 6.1;
  double mmi_splitting = 0.5;
  double pulse_fwhm_ps = 9.0;
  SwitchSampling switch_sampling = SwitchSampling::instantaneous;

  void validate() const;

  /// Drive frequency matching 1/(2 t_s) within 1e-9 relative.
  bool synchronous() const;

  double pulse_sigma_ps() const;
};

/// One Gaussian component of the joint temporal amplitude.
struct Lobe {
  double t_signal_center_ps;
  double t_idler_center_ps;
  Complex amplitude;
  double width_sigma_ps;  // per-axis amplitude-envelope sigma (intensity sigma)
};

struct PortPair {
  int signal_port = 0;
  int idler_port = 0;
  bool operator==(const PortPair&) const = default;
};

/// Sparse exact joint temporal amplitude at one output port combination.
/// Components with centers closer than 1e-6 ps are coherently merged by the
/// producer, never duplicated.
struct LobeSet {
  std::vector<Lobe> lobes;
  PortPair port;

  /// Sum of |amplitude|^2 including coherent overlap corrections for any
  /// components closer than 8 sigma (none at the default 100 ps spacing).
  double total_probability() const;
};

/// Thermal phase shifter: phase linear in electrical power, pi at p_pi.
double tps_phase(double power_mw, double p_pi_mw);

/// Differential switch phase at time t:
/// bias + (pi vpp / 2 v_pi) sin(2 pi f_m t + drive_phase), with the swing
/// optionally derated by the single-pole EO response at f_m.
double mzm_drive_phase(double t_ps, const DeviceParams& params);

/// Switch transfer matrix (input/output ports 0 and 1) at differential phase
/// phi_e: phi_e = 0 is full bar, pi is full cross. Finite extinction is a
/// static splitter imbalance; the matrix stays unitary and the off-state
/// power leaks into the complementary port, |bar(pi)|^2 = 10^(-ext_db/10).
Mat2 mzm_transfer(double phi_e,
                  double extinction_db = std::numeric_limits<double>::infinity());

struct PropagationResult {
  std::array<LobeSet, 4> ports;  // index signal_port*2 + idler_port
  std::vector<std::string> warnings;

  const LobeSet& port(int signal_port, int idler_port) const {
    return ports[signal_port * 2 + idler_port];
  }
  double total_probability() const;
};

/// Evolves the two-photon state through the receiver and returns the exact
/// output lobe decomposition for all four port pairs.
///
/// Both photons traverse the same chip. In shared topology the one long-arm
/// phase phases.phi_s applies to both photons (phi_i is ignored), so it
/// enters the interfering term twice; two_device applies phi_s and phi_i
/// independently. Passive mode holds the switch at its bias; active mode
/// samples the drive at each bin arrival (E at 0, L at t_s). A
/// non-synchronous active drive is reported as a warning and produces the
/// physical residual side lobes rather than an error.
PropagationResult propagate(const TimeBinState& state, const DeviceParams& params,
                            DeviceMode mode, const PhaseSettings& phases,
                            Topology topology = Topology::shared);

/// Lobe decomposition of the undevolved input state (two diagonal lobes),
/// e.g. for joint-intensity plots and Schmidt-number checks.
LobeSet input_state_lobes(const TimeBinState& state, double bin_separation_ps,
                          double sigma_ps);

}  // namespace timebin
