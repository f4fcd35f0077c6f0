#include "timebin/device.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace timebin {

namespace {

constexpr double kFwhmToSigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)
constexpr double kPathCull = 1e-14;
constexpr double kMergeTolPs = 1e-6;

}  // namespace

void DeviceParams::validate() const {
  if (!(t_s_ps > 0.0)) throw std::domain_error("DeviceParams: t_s_ps must be > 0");
  if (!(v_pi_lf_v > 0.0) || !(v_pi_rf_v > 0.0))
    throw std::domain_error("DeviceParams: v_pi must be > 0");
  if (!(p_pi_mw > 0.0)) throw std::domain_error("DeviceParams: p_pi_mw must be > 0");
  if (!(f_m_ghz > 0.0)) throw std::domain_error("DeviceParams: f_m_ghz must be > 0");
  if (!(mmi_splitting > 0.0 && mmi_splitting < 1.0))
    throw std::domain_error("DeviceParams: mmi_splitting must be in (0,1)");
  if (!(pulse_fwhm_ps > 0.0))
    throw std::domain_error("DeviceParams: pulse_fwhm_ps must be > 0");
  if (!(mzm_extinction_db > 0.0))
    throw std::domain_error("DeviceParams: mzm_extinction_db must be > 0 or infinite");
  if (drive_vpp_v < 0.0) throw std::domain_error("DeviceParams: drive_vpp_v must be >= 0");
  if (eo_bandwidth_3db_ghz < 0.0)
    throw std::domain_error("DeviceParams: eo_bandwidth_3db_ghz must be >= 0");
}

bool DeviceParams::synchronous() const {
  double f_sync = 1000.0 / (2.0 * t_s_ps);  // GHz
  return std::abs(f_m_ghz - f_sync) <= 1e-9 * f_sync;
}

double DeviceParams::pulse_sigma_ps() const { return pulse_fwhm_ps / kFwhmToSigma; }

double tps_phase(double power_mw, double p_pi_mw) {
  if (power_mw < 0.0) throw std::domain_error("tps_phase: negative power");
  if (!(p_pi_mw > 0.0)) throw std::domain_error("tps_phase: p_pi must be > 0");
  return kPi * power_mw / p_pi_mw;
}

double mzm_drive_phase(double t_ps, const DeviceParams& params) {
  double swing = kPi * params.drive_vpp_v / (2.0 * params.v_pi_rf_v);
  if (params.apply_eo_derating && params.eo_bandwidth_3db_ghz > 0.0) {
    double x = params.f_m_ghz / params.eo_bandwidth_3db_ghz;
    swing /= std::sqrt(1.0 + x * x);
  }
  // GHz * ps = 1e-3 cycles
  double arg = 2.0 * kPi * params.f_m_ghz * t_ps * 1e-3 + params.drive_phase_rad;
  return params.bias_phase_rad + swing * std::sin(arg);
}

Mat2 mzm_transfer(double phi_e, double extinction_db) {
  if (!(extinction_db > 0.0))
    throw std::domain_error("mzm_transfer: extinction_db must be > 0 or infinite");
  // Identical couplers with mixing angle beta; at beta = pi/4 this is the
  // ideal [[cos, i sin],[i sin, cos]](phi_e/2) form, and off-state leakage
  // is |bar(pi)|^2 = cos^2(2 beta) = 10^(-ext/10).
  double beta = std::isinf(extinction_db)
                    ? kPi / 4.0
                    : 0.5 * std::acos(std::pow(10.0, -extinction_db / 20.0));
  double cb2 = std::cos(beta) * std::cos(beta);
  double sb2 = 1.0 - cb2;
  Complex eph = std::polar(1.0, phi_e / 2.0);
  Mat2 m;
  m(0, 0) = cb2 * eph + sb2 * std::conj(eph);
  m(1, 1) = cb2 * std::conj(eph) + sb2 * eph;
  m(0, 1) = m(1, 0) = Complex(0.0, std::sin(2.0 * beta) * std::sin(phi_e / 2.0));
  return m;
}

double LobeSet::total_probability() const {
  double total = 0.0;
  for (const Lobe& l : lobes) total += std::norm(l.amplitude);
  // Coherent overlap corrections for nearby components.
  for (std::size_t j = 0; j < lobes.size(); ++j) {
    for (std::size_t k = j + 1; k < lobes.size(); ++k) {
      const Lobe &a = lobes[j], &b = lobes[k];
      double ds = a.t_signal_center_ps - b.t_signal_center_ps;
      double di = a.t_idler_center_ps - b.t_idler_center_ps;
      double s2 = a.width_sigma_ps * a.width_sigma_ps + b.width_sigma_ps * b.width_sigma_ps;
      double d2 = ds * ds + di * di;
      if (d2 > 64.0 * s2) continue;
      // <u_a|u_b> per axis for equal-width Gaussian envelopes
      double ovl = std::exp(-d2 / (8.0 * a.width_sigma_ps * b.width_sigma_ps));
      total += 2.0 * std::real(a.amplitude * std::conj(b.amplitude)) * ovl;
    }
  }
  return total;
}

double PropagationResult::total_probability() const {
  double t = 0.0;
  for (const auto& ls : ports) t += ls.total_probability();
  return t;
}

namespace {

// Switch matrix seen by the wavepacket arriving at t_center.
Mat2 switch_matrix(double t_center, const DeviceParams& p, DeviceMode mode) {
  if (mode == DeviceMode::passive || p.drive_vpp_v == 0.0)
    return mzm_transfer(p.bias_phase_rad, p.mzm_extinction_db);
  if (p.switch_sampling == SwitchSampling::instantaneous)
    return mzm_transfer(mzm_drive_phase(t_center, p), p.mzm_extinction_db);
  // Intensity-weighted average across the pulse envelope. The averaged
  // matrix is sub-unitary; the deficit is temporal-mode distortion and shows
  // up as loss at the lobe level.
  const int n = 201;
  const double half_span = 6.0;
  double sigma = p.pulse_sigma_ps();
  double du = 2.0 * half_span / (n - 1);
  Mat2 acc = Mat2::Zero();
  double wsum = 0.0;
  for (int k = 0; k < n; ++k) {
    double u = -half_span + k * du;
    double w = std::exp(-0.5 * u * u);
    acc += w * mzm_transfer(mzm_drive_phase(t_center + u * sigma, p), p.mzm_extinction_db);
    wsum += w;
  }
  return acc / wsum;
}

struct ArmAmp {
  Complex long_arm;
  Complex short_arm;
};

void accumulate_lobe(std::vector<Lobe>& set, double ts, double ti, Complex amp, double sigma) {
  for (Lobe& l : set) {
    if (std::abs(l.t_signal_center_ps - ts) < kMergeTolPs &&
        std::abs(l.t_idler_center_ps - ti) < kMergeTolPs) {
      l.amplitude += amp;
      return;
    }
  }
  set.push_back({ts, ti, amp, sigma});
}

}  // namespace

PropagationResult propagate(const TimeBinState& state, const DeviceParams& params,
                            DeviceMode mode, const PhaseSettings& phases, Topology topology) {
  params.validate();
  phases.validate();
  if (std::abs(state.norm_sq() - 1.0) > 1e-12)
    throw std::domain_error("propagate: state not normalized");

  PropagationResult result;
  for (int ps = 0; ps < 2; ++ps)
    for (int pi = 0; pi < 2; ++pi) result.ports[ps * 2 + pi].port = {ps, pi};

  if (mode == DeviceMode::active && !params.synchronous())
    result.warnings.push_back(
        "active drive is not synchronous with the bin separation (f_m != 1/2T_s); "
        "residual side lobes will appear");

  const double t_delay = params.t_s_ps;
  const double sigma = params.pulse_sigma_ps();
  const double phi_long_s = phases.phi_s;
  const double phi_long_i = topology == Topology::shared ? phases.phi_s : phases.phi_i;

  // Switch transfer for the early and late wavepackets (input on port 0;
  // output port 0 feeds the long arm, port 1 the short arm).
  std::array<ArmAmp, 2> arm{};
  for (int bin = 0; bin < 2; ++bin) {
    Mat2 w = switch_matrix(bin == 0 ? 0.0 : t_delay, params, mode);
    arm[bin] = {w(0, 0), w(1, 0)};
  }

  // Output combiner: columns are arms (0 = long, 1 = short).
  const double r = params.mmi_splitting;
  const Complex combiner[2][2] = {
      {Complex(std::sqrt(r), 0.0), Complex(0.0, std::sqrt(1.0 - r))},
      {Complex(0.0, std::sqrt(1.0 - r)), Complex(std::sqrt(r), 0.0)},
  };

  const Complex phase_s = std::polar(1.0, phi_long_s);
  const Complex phase_i = std::polar(1.0, phi_long_i);

  // 2 state terms x 2 arms per photon; both photons of a term share the bin.
  const Complex term_amp[2] = {state.amp_ee, state.amp_ll};
  for (int bin = 0; bin < 2; ++bin) {
    if (std::abs(term_amp[bin]) < kPathCull) continue;
    double t0 = bin == 0 ? 0.0 : t_delay;
    for (int arm_s = 0; arm_s < 2; ++arm_s) {  // 0 = long, 1 = short
      Complex a_s = arm_s == 0 ? arm[bin].long_arm * phase_s : arm[bin].short_arm;
      if (std::abs(a_s) < kPathCull) continue;
      double ts = t0 + (arm_s == 0 ? t_delay : 0.0);
      for (int arm_i = 0; arm_i < 2; ++arm_i) {
        Complex a_i = arm_i == 0 ? arm[bin].long_arm * phase_i : arm[bin].short_arm;
        if (std::abs(a_i) < kPathCull) continue;
        double ti = t0 + (arm_i == 0 ? t_delay : 0.0);
        Complex joint = term_amp[bin] * a_s * a_i;
        for (int ps = 0; ps < 2; ++ps)
          for (int pi = 0; pi < 2; ++pi)
            accumulate_lobe(result.ports[ps * 2 + pi].lobes, ts, ti,
                            joint * combiner[ps][arm_s] * combiner[pi][arm_i], sigma);
      }
    }
  }

  // Deterministic ordering for downstream consumers.
  for (auto& set : result.ports)
    std::sort(set.lobes.begin(), set.lobes.end(), [](const Lobe& a, const Lobe& b) {
      if (a.t_signal_center_ps != b.t_signal_center_ps)
        return a.t_signal_center_ps < b.t_signal_center_ps;
      return a.t_idler_center_ps < b.t_idler_center_ps;
    });
  return result;
}

LobeSet input_state_lobes(const TimeBinState& state, double bin_separation_ps,
                          double sigma_ps) {
  if (!(sigma_ps > 0.0)) throw std::domain_error("input_state_lobes: sigma must be > 0");
  LobeSet set;
  set.port = {0, 0};
  set.lobes.push_back({0.0, 0.0, state.amp_ee, sigma_ps});
  set.lobes.push_back({bin_separation_ps, bin_separation_ps, state.amp_ll, sigma_ps});
  return set;
}

}  // namespace timebin
