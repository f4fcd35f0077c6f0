#include "timebin/core.hpp"

#include <cmath>
#include <stdexcept>

namespace timebin {

TimeBinState::TimeBinState(Complex ee, Complex ll) : amp_ee(ee), amp_ll(ll) {
  double n = std::norm(ee) + std::norm(ll);
  if (std::abs(n - 1.0) > 1e-12)
    throw std::domain_error("TimeBinState: |amp_ee|^2 + |amp_ll|^2 must be 1 within 1e-12");
}

TimeBinState TimeBinState::bell(double pump_phase_rad) {
  const double r = 1.0 / std::sqrt(2.0);
  return TimeBinState(Complex(r, 0.0), std::polar(r, pump_phase_rad));
}

void PhaseSettings::validate() const {
  if (!std::isfinite(phi_s) || !std::isfinite(phi_i) || !std::isfinite(phi_p) ||
      !std::isfinite(phi_e))
    throw std::domain_error("PhaseSettings: phases must be finite");
  if (output_sign != 1 && output_sign != -1)
    throw std::domain_error("PhaseSettings: output_sign must be +1 or -1");
}

double coincidence_probability(const PhaseSettings& phases, double visibility) {
  phases.validate();
  if (!(visibility >= 0.0 && visibility <= 1.0))
    throw std::domain_error("coincidence_probability: visibility outside [0,1]");
  return 0.25 * (1.0 + phases.output_sign * visibility * std::cos(phases.fringe_arg()));
}

Mat2 analyzer_projector(double phi, int sign) {
  Eigen::Vector2cd psi;
  psi << Complex(1.0, 0.0), static_cast<double>(sign) * std::polar(1.0, phi);
  psi /= std::sqrt(2.0);
  return psi * psi.adjoint();
}

Mat2 analyzer_povm(double phi, int sign, double phi_e) {
  const double c2 = std::cos(phi_e / 2.0) * std::cos(phi_e / 2.0);
  const double s2 = std::sin(phi_e / 2.0) * std::sin(phi_e / 2.0);
  return 0.5 * c2 * Mat2::Identity() + s2 * analyzer_projector(phi, sign);
}

namespace {

// <Phi| Pi_s x Pi_i |Phi> restricted to the EE/LL amplitude pair; the joint
// amplitude matrix has only the two diagonal entries.
double joint_expectation(const Mat2& pi_s, const Mat2& pi_i, const TimeBinState& st) {
  Mat2 amp = Mat2::Zero();
  amp(0, 0) = st.amp_ee;
  amp(1, 1) = st.amp_ll;
  Complex acc(0.0, 0.0);
  for (int j = 0; j < 2; ++j)
    for (int l = 0; l < 2; ++l)
      for (int k = 0; k < 2; ++k)
        for (int m = 0; m < 2; ++m)
          acc += std::conj(amp(j, l)) * pi_s(j, k) * pi_i(l, m) * amp(k, m);
  return acc.real();
}

}  // namespace

double povm_coincidence_probability(const PhaseSettings& phases, const TimeBinState& state) {
  phases.validate();
  if (std::abs(state.norm_sq() - 1.0) > 1e-12)
    throw std::domain_error("povm_coincidence_probability: state not normalized");
  // The pump phase lives in the state (amp_ll convention); the projectors
  // carry only the analyzer phases.
  Mat2 pi_s = analyzer_povm(phases.phi_s, +1, phases.phi_e);
  Mat2 pi_i = analyzer_povm(phases.phi_i, phases.output_sign, phases.phi_e);
  return joint_expectation(pi_s, pi_i, state);
}

double chsh_correlation(const TimeBinState& state, double analyzer_a, double analyzer_b,
                        double phi_e) {
  double e = 0.0;
  double total = 0.0;
  for (int sa : {+1, -1}) {
    for (int sb : {+1, -1}) {
      Mat2 pi_a = analyzer_povm(analyzer_a, sa, phi_e);
      Mat2 pi_b = analyzer_povm(analyzer_b, sb, phi_e);
      double p = joint_expectation(pi_a, pi_b, state);
      e += sa * sb * p;
      total += p;
    }
  }
  return e / total;
}

double chsh_s(double e_ab, double e_ab_prime, double e_aprime_b, double e_aprime_bprime) {
  for (double e : {e_ab, e_ab_prime, e_aprime_b, e_aprime_bprime})
    if (!(std::abs(e) <= 1.0 + 1e-12))
      throw std::domain_error("chsh_s: |E| must be <= 1");
  return e_ab - e_ab_prime + e_aprime_b + e_aprime_bprime;
}

double chsh_s(const ChshSettings& s, const TimeBinState& state, double phi_e) {
  return chsh_s(chsh_correlation(state, s.a, s.b, phi_e),
                chsh_correlation(state, s.a, s.b_prime, phi_e),
                chsh_correlation(state, s.a_prime, s.b, phi_e),
                chsh_correlation(state, s.a_prime, s.b_prime, phi_e));
}

double chsh_s_max(double visibility) {
  if (!(visibility >= 0.0 && visibility <= 1.0))
    throw std::domain_error("chsh_s_max: visibility outside [0,1]");
  return 2.0 * std::sqrt(2.0) * visibility;
}

}  // namespace timebin
