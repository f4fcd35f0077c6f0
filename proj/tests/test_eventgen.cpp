#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "timebin/errors.hpp"
#include "timebin/eventgen.hpp"

using namespace timebin;

namespace {

PropagationResult device_output(DeviceMode mode, double fringe = 0.0,
                                DeviceParams params = DeviceParams{}) {
  PhaseSettings ph;
  ph.phi_s = ph.phi_i = fringe / 2.0;
  return propagate(TimeBinState::bell(0.0), params, mode, ph);
}

DetectorParams perfect_detector() {
  DetectorParams d;
  d.efficiency = 1.0;
  d.jitter_fwhm_ps = 0.0;
  d.channel_loss_db = 0.0;
  d.dark_rate_hz = 0.0;
  return d;
}

}  // namespace

TEST_CASE("zero pair mean gives an empty batch") {
  SourceParams src;
  src.pair_mean = 0.0;
  PairBatch batch = sample_pairs(100000, src, device_output(DeviceMode::active), 1);
  CHECK(batch.pairs.empty());
  CHECK(batch.n_pulses == 100000);
}

TEST_CASE("fixed seed reproduces the batch bit-identically across worker counts") {
  SourceParams src;
  src.pair_mean = 0.02;
  PropagationResult dist = device_output(DeviceMode::passive);
  PairBatch one = sample_pairs(200000, src, dist, 77, 1);
  PairBatch four = sample_pairs(200000, src, dist, 77, 4);
  PairBatch three = sample_pairs(200000, src, dist, 77, 3);
  REQUIRE(one.pairs.size() == four.pairs.size());
  REQUIRE(one.pairs.size() == three.pairs.size());
  CHECK(one.pairs.size() > 3000);
  for (std::size_t i = 0; i < one.pairs.size(); ++i) {
    CHECK(one.pairs[i].pulse == four.pairs[i].pulse);
    CHECK(one.pairs[i].t_s_ps == four.pairs[i].t_s_ps);
    CHECK(one.pairs[i].t_i_ps == four.pairs[i].t_i_ps);
    CHECK(one.pairs[i].t_s_ps == three.pairs[i].t_s_ps);
  }
  PairBatch different = sample_pairs(200000, src, dist, 78, 1);
  CHECK(different.pairs.size() != one.pairs.size());

  // The full detected stream is also identical for any worker count.
  DetectorParams det;
  TimeTagStream t1 = detect(one, det, det, 77);
  TimeTagStream t4 = detect(four, det, det, 77);
  REQUIRE(t1.events.size() == t4.events.size());
  for (std::size_t i = 0; i < t1.events.size(); ++i) {
    CHECK(t1.events[i].channel == t4.events[i].channel);
    CHECK(t1.events[i].time_ps == t4.events[i].time_ps);
  }
}

TEST_CASE("detect with an identity channel returns the ideal pair times") {
  SourceParams src;
  src.pair_mean = 0.01;
  PropagationResult dist = device_output(DeviceMode::active);
  PairBatch batch = sample_pairs(50000, src, dist, 5);
  TimeTagStream tags = detect(batch, perfect_detector(), perfect_detector(), 5);

  std::multiset<std::int64_t> expected_s, expected_i;
  for (const PairEvent& p : batch.pairs) {
    if (p.port_s == 0) expected_s.insert(std::llround(p.t_s_ps));
    if (p.port_i == 0) expected_i.insert(std::llround(p.t_i_ps));
  }
  std::vector<std::int64_t> got_s = tags.channel_times(0);
  std::vector<std::int64_t> got_i = tags.channel_times(1);
  CHECK(got_s.size() == expected_s.size());
  CHECK(got_i.size() == expected_i.size());
  CHECK(std::multiset<std::int64_t>(got_s.begin(), got_s.end()) == expected_s);
  CHECK(std::multiset<std::int64_t>(got_i.begin(), got_i.end()) == expected_i);
  for (std::size_t i = 1; i < got_s.size(); ++i) CHECK(got_s[i] >= got_s[i - 1]);
}

TEST_CASE("survival follows the loss budget: 18.6 dB + 85% efficiency") {
  DetectorParams det = perfect_detector();
  det.channel_loss_db = 18.6;
  det.efficiency = 0.85;
  double p = det.survival();
  CHECK(p == doctest::Approx(0.0117).epsilon(2e-3));

  SourceParams src;
  src.pair_mean = 0.05;
  PropagationResult dist = device_output(DeviceMode::active);
  PairBatch batch = sample_pairs(400000, src, dist, 9);
  TimeTagStream tags = detect(batch, det, perfect_detector(), 9);
  double sent = 0.0;
  for (const PairEvent& pe : batch.pairs) sent += pe.port_s == 0 ? 1.0 : 0.0;
  double got = static_cast<double>(tags.channel_times(0).size());
  double sigma = std::sqrt(sent * p * (1.0 - p));
  CHECK(std::abs(got - sent * p) < 4.0 * sigma);
}

TEST_CASE("dark counts arrive at the configured Poisson rate") {
  SourceParams src;
  src.pair_mean = 0.0;
  src.rep_rate_mhz = 500.0;
  PairBatch batch;
  batch.n_pulses = 500000000;  // 1 s of wall time at 500 MHz
  batch.source = src;
  DetectorParams det = perfect_detector();
  det.dark_rate_hz = 1000.0;
  TimeTagStream tags = detect(batch, det, perfect_detector(), 3);
  double n = static_cast<double>(tags.channel_times(0).size());
  CHECK(std::abs(n - 1000.0) < 3.0 * std::sqrt(1000.0));
  CHECK(tags.channel_times(1).empty());
  for (const TagEvent& e : tags.events) {
    CHECK(e.time_ps >= 0);
    CHECK(e.time_ps < static_cast<std::int64_t>(1e12));
  }
}

TEST_CASE("dead time suppresses close successors") {
  PairBatch batch;
  batch.n_pulses = 10;
  batch.source = SourceParams{};
  batch.source.pair_mean = 0.01;
  // Hand-built pairs all exiting port 0, 3 ns apart plus one 5 ps echo.
  batch.pairs.push_back({0, 0, 0, 0, 1000.0, 1000.0});
  batch.pairs.push_back({0, 1, 0, 0, 1005.0, 1005.0});
  batch.pairs.push_back({1, 0, 0, 0, 4000.0, 4000.0});
  DetectorParams det = perfect_detector();
  det.dead_time_ns = 1.0;
  TimeTagStream tags = detect(batch, det, det, 1);
  CHECK(tags.channel_times(0).size() == 2);  // 1000 kept, 1005 vetoed, 4000 kept
}

TEST_CASE("passive three-peak coincidence ratio 1:3:1 at zero fringe") {
  SourceParams src;
  src.pair_mean = 0.01;
  PropagationResult dist = device_output(DeviceMode::passive, 0.0);
  PairBatch batch = sample_pairs(1000000, src, dist, 13);

  std::map<int, int> peak_counts;  // delay rounded to 100 ps, port (0,0) only
  for (const PairEvent& p : batch.pairs) {
    if (p.port_s != 0 || p.port_i != 0) continue;
    int peak = static_cast<int>(std::lround((p.t_i_ps - p.t_s_ps) / 100.0));
    peak_counts[peak]++;
  }
  double n = 1000000.0 * src.pair_mean;
  auto check_peak = [&](int peak, double mass) {
    double expect = n * mass;
    CHECK(std::abs(peak_counts[peak] - expect) < 4.0 * std::sqrt(expect));
  };
  check_peak(-1, 1.0 / 16.0);
  check_peak(0, 3.0 / 16.0);
  check_peak(+1, 1.0 / 16.0);
}

TEST_CASE("active fringe minimum sends nothing to the monitored port pair") {
  SourceParams src;
  src.pair_mean = 0.01;
  PropagationResult dist = device_output(DeviceMode::active, kPi);
  PairBatch batch = sample_pairs(1000000, src, dist, 17);
  int port00 = 0, other = 0;
  for (const PairEvent& p : batch.pairs)
    (p.port_s == 0 && p.port_i == 0 ? port00 : other)++;
  CHECK(port00 == 0);
  CHECK(other > 9000);
}

TEST_CASE("thermal multipair statistics are overdispersed") {
  SourceParams src;
  src.pair_mean = 0.2;
  src.multipair_model = MultipairModel::thermal;
  PropagationResult dist = device_output(DeviceMode::active);
  PairBatch batch = sample_pairs(200000, src, dist, 19);
  std::map<std::uint64_t, int> by_pulse;
  for (const PairEvent& p : batch.pairs) by_pulse[p.pulse]++;
  double sum = 0.0, sum2 = 0.0;
  for (auto& [pulse, k] : by_pulse) {
    sum += k;
    sum2 += static_cast<double>(k) * k;
  }
  double n = 200000.0;
  double mean = sum / n;
  double var = sum2 / n - mean * mean;
  CHECK(mean == doctest::Approx(0.2).epsilon(0.05));
  // Thermal: var = mu (1 + mu) = 0.24 vs Poisson 0.2.
  CHECK(var > 0.22);
  CHECK(var < 0.27);
}

TEST_CASE("distribution totals above one are rejected") {
  PropagationResult dist = device_output(DeviceMode::active);
  for (auto& set : dist.ports)
    for (auto& l : set.lobes) l.amplitude *= 1.2;
  SourceParams src;
  CHECK_THROWS_AS(sample_pairs(10, src, dist, 1), std::domain_error);
}

TEST_CASE("pump phase jitter requires a rebuild hook and washes the fringe") {
  SourceParams src;
  src.pair_mean = 0.01;
  src.pump_phase_jitter_rms_rad = 1.0;
  PropagationResult dist = device_output(DeviceMode::active, 0.0);
  CHECK_THROWS_AS(sample_pairs(1000, src, dist, 1), ConfigError);

  DeviceParams params;
  DistributionRebuild rebuild = [&params](double dphi) {
    PhaseSettings ph;  // fringe argument -dphi once the state carries dphi
    return propagate(TimeBinState::bell(dphi), params, DeviceMode::active, ph);
  };
  PairBatch batch = sample_pairs(300000, src, dist, 23, 2, rebuild);
  int port00 = 0;
  for (const PairEvent& p : batch.pairs)
    if (p.port_s == 0 && p.port_i == 0) port00++;
  // E[cos(delta)] = exp(-rms^2/2): the maximum softens from 1/2 to ~0.40.
  double expect = 300000.0 * src.pair_mean * 0.25 * (1.0 + std::exp(-0.5));
  CHECK(std::abs(port00 - expect) < 4.0 * std::sqrt(expect));
  CHECK(port00 < 300000.0 * src.pair_mean * 0.5 - 3.0 * std::sqrt(expect));
}

TEST_CASE("expected CAR: multipair floor without noise, 60/62 ceiling when tuned") {
  SourceParams src;
  src.pair_mean = 0.01;
  DetectorParams det = perfect_detector();
  PropagationResult dist = device_output(DeviceMode::active, 0.0);

  // With no background the shifted-window accidentals are pure multipair
  // products: CAR = P_pair / (M_s M_i mu) = 2/mu at the fringe maximum.
  CarEstimate quiet = expected_car(src, det, det, dist, 500.0);
  CHECK(!quiet.infinite);
  CHECK(quiet.car == doctest::Approx(2.0 / src.pair_mean).epsilon(1e-9));

  // The distinguished infinite value appears when the accidental rate is
  // identically zero.
  SourceParams dead = src;
  dead.pair_mean = 0.0;
  CarEstimate off = expected_car(dead, det, det, dist, 500.0);
  CHECK(off.infinite);

  double noise = tune_noise_for_car(60.0, src, det, det, dist, 500.0);
  CHECK(noise > 0.0);
  src.noise_singles_rate_hz = noise;
  CarEstimate tuned = expected_car(src, det, det, dist, 500.0);
  CHECK(tuned.car == doctest::Approx(60.0).epsilon(1e-6));
  CHECK(tuned.visibility_ceiling == doctest::Approx(60.0 / 62.0).epsilon(1e-6));

  CHECK_THROWS_AS(tune_noise_for_car(300.0, src, det, det, dist, 500.0),
                  std::domain_error);
}

TEST_CASE("doubling the window halves the CAR in the noise-dominated regime") {
  SourceParams src;
  src.pair_mean = 0.001;
  src.noise_singles_rate_hz = 2e6;
  DetectorParams det = perfect_detector();
  PropagationResult dist = device_output(DeviceMode::active, 0.0);
  double car_w = expected_car(src, det, det, dist, 250.0).car;
  double car_2w = expected_car(src, det, det, dist, 500.0).car;
  CHECK(car_w / car_2w == doctest::Approx(2.0).epsilon(0.02));
}
