#include "timebin/eventgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "timebin/errors.hpp"
#include "timebin/rng.hpp"

namespace timebin {

namespace {

constexpr double kFwhmToSigma = 2.3548200450309493;

// RNG stream ids; blocks are pulse indices except for the uniform-background
// streams, which use fixed-size pulse chunks.
enum Stream : std::uint32_t {
  kPairCount = 0,
  kPairOutcome = 1,
  kPumpPhase = 2,
  kDetection = 3,
  kBackgroundS = 4,
  kBackgroundI = 5,
};

constexpr std::uint64_t kBackgroundChunkPulses = 1u << 20;
constexpr std::uint32_t kDrawsPerPair = 8;

struct FlatLobe {
  double weight;
  double ts, ti, sigma;
  std::uint8_t ps, pi;
};

struct FlatDistribution {
  std::vector<FlatLobe> lobes;
  double total = 0.0;
};

FlatDistribution flatten(const PropagationResult& dist) {
  FlatDistribution flat;
  for (const LobeSet& set : dist.ports) {
    for (const Lobe& l : set.lobes) {
      double w = std::norm(l.amplitude);
      if (w <= 0.0) continue;
      flat.lobes.push_back({w, l.t_signal_center_ps, l.t_idler_center_ps, l.width_sigma_ps,
                            static_cast<std::uint8_t>(set.port.signal_port),
                            static_cast<std::uint8_t>(set.port.idler_port)});
      flat.total += w;
    }
  }
  return flat;
}

std::uint64_t draw_pair_count(RandomStream& rs, const SourceParams& src) {
  if (src.multipair_model == MultipairModel::poisson) return rs.poisson(src.pair_mean);
  // Thermal (single-mode Bose-Einstein): geometric with ratio mu/(1+mu).
  double r = src.pair_mean / (1.0 + src.pair_mean);
  if (r <= 0.0) return 0;
  double u = rs.uniform();
  double k = std::ceil(std::log1p(-u) / std::log(r)) - 1.0;
  return k < 0.0 ? 0 : static_cast<std::uint64_t>(k);
}

}  // namespace

void SourceParams::validate() const {
  if (!(rep_rate_mhz > 0.0)) throw std::domain_error("SourceParams: rep_rate_mhz must be > 0");
  if (pair_mean < 0.0) throw std::domain_error("SourceParams: pair_mean must be >= 0");
  if (pair_mean > 0.5)
    throw std::domain_error("SourceParams: pair_mean too large for the two-term state model");
  if (noise_singles_rate_hz < 0.0 || pump_phase_jitter_rms_rad < 0.0)
    throw std::domain_error("SourceParams: rates must be >= 0");
}

void DetectorParams::validate() const {
  if (!(efficiency >= 0.0 && efficiency <= 1.0))
    throw std::domain_error("DetectorParams: efficiency must be in [0,1]");
  if (jitter_fwhm_ps < 0.0 || dead_time_ns < 0.0 || dark_rate_hz < 0.0 ||
      channel_loss_db < 0.0)
    throw std::domain_error("DetectorParams: negative parameter");
  if (monitor_port != 0 && monitor_port != 1)
    throw std::domain_error("DetectorParams: monitor_port must be 0 or 1");
}

double DetectorParams::survival() const {
  return std::pow(10.0, -channel_loss_db / 10.0) * efficiency;
}

std::vector<std::int64_t> TimeTagStream::channel_times(std::uint8_t channel) const {
  std::vector<std::int64_t> out;
  for (const TagEvent& e : events)
    if (e.channel == channel) out.push_back(e.time_ps);
  return out;
}

PairBatch sample_pairs(std::uint64_t n_pulses, const SourceParams& source,
                       const PropagationResult& distribution, std::uint64_t seed,
                       int workers, const DistributionRebuild& rebuild) {
  source.validate();
  FlatDistribution base = flatten(distribution);
  if (base.total > 1.0 + 1e-9)
    throw std::domain_error("sample_pairs: distribution total exceeds 1");
  if (source.pump_phase_jitter_rms_rad > 0.0 && !rebuild)
    throw ConfigError("sample_pairs: pump phase jitter requires a distribution rebuild hook");
  if (workers < 1) workers = 1;

  const double period = source.period_ps();
  PairBatch batch;
  batch.n_pulses = n_pulses;
  batch.source = source;
  if (n_pulses == 0 || source.pair_mean == 0.0) return batch;

  auto run_range = [&](std::uint64_t begin, std::uint64_t end, std::vector<PairEvent>& out) {
    for (std::uint64_t p = begin; p < end; ++p) {
      RandomStream count_rs(seed, kPairCount, p);
      std::uint64_t k = draw_pair_count(count_rs, source);
      if (k == 0) continue;

      const FlatDistribution* flat = &base;
      FlatDistribution jittered;
      if (source.pump_phase_jitter_rms_rad > 0.0) {
        RandomStream phase_rs(seed, kPumpPhase, p);
        jittered = flatten(rebuild(phase_rs.gauss() * source.pump_phase_jitter_rms_rad));
        flat = &jittered;
      }

      double pulse_time = (static_cast<double>(p) + 0.5) * period;
      RandomStream rs(seed, kPairOutcome, p);
      for (std::uint64_t q = 0; q < k; ++q) {
        rs.seek(q * kDrawsPerPair);
        // Draw against 1, not the distribution total: any sub-unitary
        // deficit is physical loss.
        double x = rs.uniform();
        if (x >= flat->total) continue;
        double acc = 0.0;
        std::size_t idx = flat->lobes.size() - 1;
        for (std::size_t i = 0; i < flat->lobes.size(); ++i) {
          acc += flat->lobes[i].weight;
          if (x < acc) {
            idx = i;
            break;
          }
        }
        const FlatLobe& l = flat->lobes[idx];
        double ts = pulse_time + l.ts + l.sigma * rs.gauss();
        double ti = pulse_time + l.ti + l.sigma * rs.gauss();
        out.push_back({p, static_cast<std::uint32_t>(q), l.ps, l.pi, ts, ti});
      }
    }
  };

  if (workers == 1 || n_pulses < 2 * static_cast<std::uint64_t>(workers)) {
    run_range(0, n_pulses, batch.pairs);
  } else {
    std::vector<std::vector<PairEvent>> parts(workers);
    std::vector<std::thread> threads;
    std::uint64_t chunk = (n_pulses + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      std::uint64_t begin = chunk * w;
      std::uint64_t end = std::min(n_pulses, begin + chunk);
      if (begin >= end) break;
      threads.emplace_back([&, begin, end, w] { run_range(begin, end, parts[w]); });
    }
    for (auto& t : threads) t.join();
    for (auto& part : parts)
      batch.pairs.insert(batch.pairs.end(), part.begin(), part.end());
  }
  return batch;
}

TimeTagStream detect(const PairBatch& batch, const DetectorParams& det_s,
                     const DetectorParams& det_i, std::uint64_t seed) {
  det_s.validate();
  det_i.validate();
  batch.source.validate();

  const double period = batch.source.period_ps();
  const double duration_ps = static_cast<double>(batch.n_pulses) * period;
  const DetectorParams* det[2] = {&det_s, &det_i};
  const double sigma[2] = {det_s.jitter_fwhm_ps / kFwhmToSigma,
                           det_i.jitter_fwhm_ps / kFwhmToSigma};
  const double survival[2] = {det_s.survival(), det_i.survival()};

  std::vector<std::int64_t> ch[2];
  for (const PairEvent& pe : batch.pairs) {
    RandomStream rs(seed, kDetection, pe.pulse);
    rs.seek(static_cast<std::uint64_t>(pe.ordinal) * kDrawsPerPair);
    // Fixed draw order keeps the two photons' outcomes independent of each
    // other's acceptance.
    double u_s = rs.uniform();
    double u_i = rs.uniform();
    double g_s = rs.gauss();
    double g_i = rs.gauss();
    if (pe.port_s == det_s.monitor_port && u_s < survival[0]) {
      double t = pe.t_s_ps + g_s * sigma[0];
      if (t >= 0.0) ch[0].push_back(std::llround(t));
    }
    if (pe.port_i == det_i.monitor_port && u_i < survival[1]) {
      double t = pe.t_i_ps + g_i * sigma[1];
      if (t >= 0.0) ch[1].push_back(std::llround(t));
    }
  }

  // Uniform background: dark counts plus untagged noise singles, generated
  // per fixed-size pulse chunk so output is worker-partition independent.
  for (int c = 0; c < 2; ++c) {
    double rate = det[c]->dark_rate_hz + batch.source.noise_singles_rate_hz;
    if (rate <= 0.0 || batch.n_pulses == 0) continue;
    std::uint64_t n_chunks = (batch.n_pulses + kBackgroundChunkPulses - 1) / kBackgroundChunkPulses;
    for (std::uint64_t chunk = 0; chunk < n_chunks; ++chunk) {
      std::uint64_t first = chunk * kBackgroundChunkPulses;
      std::uint64_t last = std::min<std::uint64_t>(first + kBackgroundChunkPulses, batch.n_pulses);
      double t0 = static_cast<double>(first) * period;
      double span = static_cast<double>(last - first) * period;
      RandomStream rs(seed, c == 0 ? kBackgroundS : kBackgroundI, chunk);
      std::uint64_t n = rs.poisson(rate * span * 1e-12);
      for (std::uint64_t i = 0; i < n; ++i) ch[c].push_back(std::llround(t0 + rs.uniform() * span));
    }
  }

  TimeTagStream stream;
  stream.header.n_pulses = batch.n_pulses;
  stream.header.rep_rate_mhz = batch.source.rep_rate_mhz;
  stream.header.duration_ps = duration_ps;
  stream.header.seed = seed;

  for (int c = 0; c < 2; ++c) {
    std::sort(ch[c].begin(), ch[c].end());
    std::int64_t dead_ps = static_cast<std::int64_t>(det[c]->dead_time_ns * 1000.0);
    std::int64_t last_accept = std::numeric_limits<std::int64_t>::min();
    for (std::int64_t t : ch[c]) {
      if (dead_ps > 0 && t - last_accept < dead_ps && last_accept != std::numeric_limits<std::int64_t>::min())
        continue;
      last_accept = t;
      stream.events.push_back({static_cast<std::uint8_t>(c), t});
    }
  }
  std::sort(stream.events.begin(), stream.events.end(), [](const TagEvent& a, const TagEvent& b) {
    if (a.time_ps != b.time_ps) return a.time_ps < b.time_ps;
    return a.channel < b.channel;
  });
  return stream;
}

CarEstimate expected_car(const SourceParams& source, const DetectorParams& det_s,
                         const DetectorParams& det_i, const PropagationResult& distribution,
                         double window_ps) {
  source.validate();
  det_s.validate();
  det_i.validate();
  if (!(window_ps > 0.0)) throw std::domain_error("expected_car: window must be > 0");

  const double f = source.rep_rate_mhz * 1e6;  // Hz
  const double mu = source.pair_mean;
  const double eta_s = det_s.survival();
  const double eta_i = det_i.survival();

  double p_pair = distribution.port(det_s.monitor_port, det_i.monitor_port).total_probability();
  double marg_s = 0.0, marg_i = 0.0;
  for (int other = 0; other < 2; ++other) {
    marg_s += distribution.port(det_s.monitor_port, other).total_probability();
    marg_i += distribution.port(other, det_i.monitor_port).total_probability();
  }

  const double q_s = mu * marg_s * eta_s;  // pulse-correlated singles per pulse
  const double q_i = mu * marg_i * eta_i;
  const double u_s = det_s.dark_rate_hz + source.noise_singles_rate_hz;
  const double u_i = det_i.dark_rate_hz + source.noise_singles_rate_hz;
  const double two_w = 2.0 * window_ps * 1e-12;  // s

  CarEstimate est;
  est.true_rate_hz = f * mu * p_pair * eta_s * eta_i;
  est.accidental_rate_hz =
      f * q_s * q_i + two_w * (f * q_s * u_i + f * q_i * u_s + u_s * u_i);
  if (est.accidental_rate_hz <= 0.0) {
    est.infinite = true;
    est.car = std::numeric_limits<double>::infinity();
    est.visibility_ceiling = 1.0;
    return est;
  }
  est.car = est.true_rate_hz / est.accidental_rate_hz;
  est.visibility_ceiling = est.car / (est.car + 2.0);
  return est;
}

double tune_noise_for_car(double target_car, const SourceParams& source,
                          const DetectorParams& det_s, const DetectorParams& det_i,
                          const PropagationResult& distribution_at_max, double window_ps) {
  if (!(target_car > 0.0)) throw std::domain_error("tune_noise_for_car: target must be > 0");
  SourceParams quiet = source;
  quiet.noise_singles_rate_hz = 0.0;
  DetectorParams ds = det_s, di = det_i;
  ds.dark_rate_hz = 0.0;
  di.dark_rate_hz = 0.0;
  CarEstimate floor = expected_car(quiet, ds, di, distribution_at_max, window_ps);

  const double f = source.rep_rate_mhz * 1e6;
  const double q_s = source.pair_mean *
                     (distribution_at_max.port(det_s.monitor_port, 0).total_probability() +
                      distribution_at_max.port(det_s.monitor_port, 1).total_probability()) *
                     det_s.survival();
  const double q_i = source.pair_mean *
                     (distribution_at_max.port(0, det_i.monitor_port).total_probability() +
                      distribution_at_max.port(1, det_i.monitor_port).total_probability()) *
                     det_i.survival();
  const double two_w = 2.0 * window_ps * 1e-12;

  // Solve 2w U^2 + 2w f (q_s+q_i) U + (f q_s q_i - R_true/target) = 0 for the
  // total uniform rate U per channel, with dark counts already part of U.
  double a = two_w;
  double b = two_w * f * (q_s + q_i);
  double c = f * q_s * q_i - floor.true_rate_hz / target_car;
  if (c >= 0.0)
    throw std::domain_error(
        "tune_noise_for_car: multipair accidentals alone already exceed the target CAR");
  double u_total = (-b + std::sqrt(b * b - 4.0 * a * c)) / (2.0 * a);
  double dark_avg = 0.5 * (det_s.dark_rate_hz + det_i.dark_rate_hz);
  if (u_total < dark_avg)
    throw std::domain_error("tune_noise_for_car: dark counts alone already exceed the target");
  return u_total - dark_avg;
}

}  // namespace timebin
