#pragma once

#include <Eigen/Dense>
#include <complex>

namespace timebin {

using Complex = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;

constexpr double kPi = 3.14159265358979323846;

/// Two-photon time-bin qubit pair restricted to the |EE>/|LL> subspace.
/// The pump phase convention puts e^{i phi_p} inside amp_ll.
struct TimeBinState {
  Complex amp_ee;
  Complex amp_ll;

  TimeBinState(Complex ee, Complex ll);

  /// Maximally entangled pair: (|EE> + e^{i phi_p}|LL>)/sqrt(2).
  static TimeBinState bell(double pump_phase_rad = 0.0);

  double norm_sq() const { return std::norm(amp_ee) + std::norm(amp_ll); }
};

/// Analyzer and pump phases shared by the closed-form probability ops.
///
/// output_sign selects which of the two complementary interferometer output
/// port pairs is monitored; the +1 branch is the pair whose central fringe
/// goes as 1 + V cos(phi_s + phi_i - phi_p). phi_e is the switch modulation
/// depth entering the POVM (pi = full projective switching).
struct PhaseSettings {
  double phi_s = 0.0;
  double phi_i = 0.0;
  double phi_p = 0.0;
  double phi_e = kPi;
  int output_sign = +1;

  double fringe_arg() const { return phi_s + phi_i - phi_p; }
  void validate() const;
};

/// Four analyzer phase pairs of a CHSH run. Correlations use
/// E(a,b) = V cos(a + b - phi_p), so the Tsirelson preset differs from the
/// familiar polarization angles.
struct ChshSettings {
  double a, a_prime, b, b_prime;

  /// Settings reaching S = 2 sqrt(2) V at phi_p = 0.
  static ChshSettings tsirelson() { return {0.0, -kPi / 2.0, kPi / 4.0, 3.0 * kPi / 4.0}; }
};

/// Central-peak coincidence probability,
/// (1/4)[1 + sign * V cos(phi_s + phi_i - phi_p)].
double coincidence_probability(const PhaseSettings& phases, double visibility);

/// Single-photon analyzer projector |psi><psi| with
/// |psi> = (|E> + sign e^{i phi}|L>)/sqrt(2), as a dense {E,L} matrix.
Mat2 analyzer_projector(double phi, int sign);

/// Switch POVM element: (1/2)cos^2(phi_e/2) 1 + sin^2(phi_e/2) |psi><psi|.
Mat2 analyzer_povm(double phi, int sign, double phi_e);

/// <Pi_s x Pi_i> on the state. The signal element carries sign +1 and the
/// idler carries output_sign; only the product is observable for states in
/// the EE/LL family, matching the port-pair labeling of the device model.
/// The pump phase is read from the state, so for a bell(phi_p) state this
/// reduces to coincidence_probability(.., V=1) at phi_e = pi and to the
/// flat 1/4 at phi_e = 0.
double povm_coincidence_probability(const PhaseSettings& phases, const TimeBinState& state);

/// Correlation E(a,b) from the four projector-outcome probabilities at one
/// setting pair, with the switch depth phi_e folded in. The pump phase is
/// the state's; shift the analyzer angles to compensate a nonzero phi_p.
double chsh_correlation(const TimeBinState& state, double analyzer_a, double analyzer_b,
                        double phi_e = kPi);

/// S = E(a,b) - E(a,b') + E(a',b) + E(a',b').
double chsh_s(double e_ab, double e_ab_prime, double e_aprime_b, double e_aprime_bprime);

/// S evaluated on a state at the four settings.
double chsh_s(const ChshSettings& settings, const TimeBinState& state, double phi_e = kPi);

/// S_max = 2 sqrt(2) V; violation (S > 2) iff V > 1/sqrt(2).
double chsh_s_max(double visibility);

}  // namespace timebin
