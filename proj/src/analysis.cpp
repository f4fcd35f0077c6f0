#include "timebin/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>
#include <thread>

namespace timebin {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t x = seed ^ (0x9E3779B97F4A7C15ull * (k + 1));
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  return x;
}

BellPoint evaluate_point(const ExperimentConfig& config, int index, int n_phases,
                         std::uint64_t pulses, SweepPath path,
                         std::optional<double> central_window_ps) {
  const double fringe = 2.0 * kPi * index / n_phases;
  PhaseSettings ph = config.phases();
  double actuator;
  if (config.topology == Topology::shared) {
    // One TPS drives both photons: fringe argument is 2 phi - phi_p.
    actuator = (fringe + ph.phi_p) / 2.0;
    ph.phi_s = ph.phi_i = actuator;
  } else {
    actuator = fringe + ph.phi_p - ph.phi_i;
    ph.phi_s = actuator;
  }

  TimeBinState state = TimeBinState::bell(ph.phi_p);
  PropagationResult dist =
      propagate(state, config.device, config.mode, ph, config.topology);

  const DetectorParams det_s = config.effective_detector(config.detector_signal);
  const DetectorParams det_i = config.effective_detector(config.detector_idler);
  const double integration_s = pulses * config.source.period_ps() * 1e-12;

  BellPoint point{actuator, fringe, 0.0, 0.0, integration_s};

  CoincidenceConfig ccfg = config.correlator;
  if (central_window_ps) ccfg.window_ps = *central_window_ps;

  if (path == SweepPath::analytic) {
    // Noise-free expectation: pure fringe counts; the expected accidental
    // level is reported alongside but not mixed in.
    double p_pair = dist.port(det_s.monitor_port, det_i.monitor_port).total_probability();
    point.coincidences = static_cast<double>(pulses) * config.source.pair_mean * p_pair *
                         det_s.survival() * det_i.survival();
    CarEstimate car = expected_car(config.source, det_s, det_i, dist, ccfg.window_ps);
    point.accidentals = car.accidental_rate_hz * integration_s;
    return point;
  }

  std::uint64_t point_seed = mix_seed(config.seed, static_cast<std::uint64_t>(index));
  DistributionRebuild rebuild;
  if (config.source.pump_phase_jitter_rms_rad > 0.0) {
    rebuild = [&config, ph](double dphi) {
      PhaseSettings shifted = ph;
      shifted.phi_p += dphi;
      return propagate(TimeBinState::bell(shifted.phi_p), config.device, config.mode,
                       shifted, config.topology);
    };
  }
  PairBatch batch = sample_pairs(pulses, config.source, dist, point_seed,
                                 /*workers=*/2, rebuild);
  TimeTagStream tags = detect(batch, det_s, det_i, point_seed);
  std::vector<std::int64_t> ch_s = tags.channel_times(0);
  std::vector<std::int64_t> ch_i = tags.channel_times(1);
  AccidentalEstimate acc = estimate_accidentals(ch_s, ch_i, ccfg);
  point.coincidences = static_cast<double>(acc.true_window_counts);
  point.accidentals = static_cast<double>(acc.accidental_counts);
  return point;
}

}  // namespace

BellCurve run_bell_sweep(const ExperimentConfig& config, int n_phases,
                         std::uint64_t pulses_per_point, SweepPath path,
                         std::optional<double> central_window_ps) {
  config.validate();
  if (n_phases < 2) throw std::domain_error("run_bell_sweep: need at least 2 phases");

  BellCurve curve;
  curve.mode = config.mode;
  curve.points.resize(n_phases);

  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::future<BellPoint>> futures(n_phases);
  // Points are independent; bounded fan-out, results placed by index.
  int in_flight = 0, next_collect = 0;
  for (int k = 0; k < n_phases; ++k) {
    futures[k] = std::async(std::launch::async, evaluate_point, std::cref(config), k,
                            n_phases, pulses_per_point, path, central_window_ps);
    if (++in_flight >= static_cast<int>(hw)) {
      curve.points[next_collect] = futures[next_collect].get();
      ++next_collect;
      --in_flight;
    }
  }
  for (; next_collect < n_phases; ++next_collect)
    curve.points[next_collect] = futures[next_collect].get();
  return curve;
}

FringeFit fit_fringe(const BellCurve& curve, bool subtract_accidentals,
                     int reweight_iterations) {
  const int n = static_cast<int>(curve.points.size());
  if (n < 3) throw std::domain_error("fit_fringe: fewer points than parameters");
  if (n < 8) throw std::domain_error("fit_fringe: need at least 8 phase points");

  Eigen::VectorXd y(n), var(n);
  Eigen::MatrixXd x(n, 3);
  for (int i = 0; i < n; ++i) {
    const BellPoint& p = curve.points[i];
    y(i) = subtract_accidentals ? p.coincidences - p.accidentals : p.coincidences;
    // Poisson variance of the counts, plus the subtracted estimate's own.
    var(i) = std::max(p.coincidences + (subtract_accidentals ? p.accidentals : 0.0), 1.0);
    x(i, 0) = 1.0;
    x(i, 1) = std::cos(p.fringe_arg_rad);
    x(i, 2) = std::sin(p.fringe_arg_rad);
  }

  Eigen::Vector3d theta = Eigen::Vector3d::Zero();
  Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();
  for (int iter = 0; iter <= reweight_iterations; ++iter) {
    Eigen::Matrix3d xtwx = Eigen::Matrix3d::Zero();
    Eigen::Vector3d xtwy = Eigen::Vector3d::Zero();
    for (int i = 0; i < n; ++i) {
      double w = 1.0 / var(i);
      Eigen::Vector3d row = x.row(i);
      xtwx += w * row * row.transpose();
      xtwy += w * row * y(i);
    }
    Eigen::FullPivLU<Eigen::Matrix3d> lu(xtwx);
    if (!lu.isInvertible())
      throw std::domain_error("fit_fringe: singular design (degenerate phase coverage)");
    cov = lu.inverse();
    theta = cov * xtwy;
    if (iter < reweight_iterations)
      for (int i = 0; i < n; ++i) {
        double pred = x.row(i).dot(theta);
        var(i) = std::max(pred + (subtract_accidentals ? 2.0 * curve.points[i].accidentals
                                                       : 0.0),
                          1.0);
      }
  }

  double a = theta(0), b = theta(1), c = theta(2);
  if (!(a > 0.0))
    throw std::domain_error(
        "fit_fringe: non-positive fitted offset (last iterate a = " + std::to_string(a) +
        "); too few coincidences to fit, increase pulses per point or reduce losses");
  double amp = std::hypot(b, c);

  FringeFit fit;
  fit.n_points = n;
  fit.offset = a;
  fit.visibility = std::clamp(amp / a, 0.0, 1.0);
  fit.phase_rad = std::atan2(c, b);

  // Delta-method errors from the linear-fit covariance.
  Eigen::Vector3d gv;
  if (amp > 0.0)
    gv << -amp / (a * a), b / (a * amp), c / (a * amp);
  else
    gv << 0.0, 1.0 / a, 1.0 / a;  // flat curve: amplitude errors dominate
  fit.visibility_err = std::sqrt(std::max(0.0, double(gv.transpose() * cov * gv)));
  fit.offset_err = std::sqrt(cov(0, 0));
  if (amp > 0.0) {
    Eigen::Vector3d gp(0.0, -c / (amp * amp), b / (amp * amp));
    fit.phase_err = std::sqrt(std::max(0.0, double(gp.transpose() * cov * gp)));
  } else {
    fit.phase_err = kPi;
  }
  for (int r = 0; r < 3; ++r)
    for (int s = 0; s < 3; ++s) fit.covariance[r * 3 + s] = cov(r, s);

  double chi2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double resid = y(i) - x.row(i).dot(theta);
    chi2 += resid * resid / var(i);
  }
  fit.chi2_dof = n > 3 ? chi2 / (n - 3) : 0.0;
  return fit;
}

ViolationReport violation_sigmas(const FringeFit& fit) {
  if (!(fit.visibility_err > 0.0))
    throw std::domain_error("violation_sigmas: sigma_V must be > 0");
  const double bound = 1.0 / std::sqrt(2.0);
  const double s = 2.0 * std::sqrt(2.0);
  return {(fit.visibility - bound) / fit.visibility_err, s * fit.visibility,
          s * fit.visibility_err};
}

}  // namespace timebin
