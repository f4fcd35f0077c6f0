#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "timebin/correlator.hpp"
#include "timebin/errors.hpp"
#include "timebin/eventgen.hpp"

using namespace timebin;

namespace {

// O(n^2) all-pairs oracle.
std::vector<std::uint64_t> oracle_histogram(const std::vector<std::int64_t>& a,
                                            const std::vector<std::int64_t>& b,
                                            const CoincidenceConfig& cfg,
                                            std::uint64_t* in_window) {
  int n_bins = static_cast<int>(std::ceil(2.0 * cfg.range_ps / cfg.bin_ps));
  std::vector<std::uint64_t> hist(n_bins, 0);
  *in_window = 0;
  for (std::int64_t ta : a)
    for (std::int64_t tb : b) {
      double d = static_cast<double>(tb - ta);
      if (std::abs(d) <= cfg.range_ps) {
        int idx = static_cast<int>((d + cfg.range_ps) / cfg.bin_ps);
        if (idx >= n_bins) idx = n_bins - 1;
        ++hist[idx];
      }
      if (std::abs(d) <= cfg.window_ps) ++(*in_window);
    }
  return hist;
}

std::vector<std::int64_t> random_sorted_tags(std::mt19937& rng, std::size_t n,
                                             std::int64_t span) {
  std::uniform_int_distribution<std::int64_t> u(0, span);
  std::vector<std::int64_t> tags(n);
  for (auto& t : tags) t = u(rng);
  std::sort(tags.begin(), tags.end());
  return tags;
}

}  // namespace

TEST_CASE("single pair lands in the +30 ps bin") {
  CoincidenceConfig cfg;
  cfg.window_ps = 100.0;
  cfg.range_ps = 100.0;
  cfg.bin_ps = 1.0;
  std::vector<std::int64_t> a = {0}, b = {30};
  CoincidenceResult res = coincide(a, b, cfg);
  CHECK(res.pairs_in_window == 1);
  int idx = static_cast<int>((30.0 + cfg.range_ps) / cfg.bin_ps);
  CHECK(res.counts[idx] == 1);
  CHECK(std::accumulate(res.counts.begin(), res.counts.end(), 0ull) == 1);
}

TEST_CASE("disjoint streams yield zero coincidences") {
  CoincidenceConfig cfg;
  cfg.window_ps = cfg.range_ps = 200.0;
  std::vector<std::int64_t> a = {0, 10, 20}, b = {100000, 100010};
  CoincidenceResult res = coincide(a, b, cfg);
  CHECK(res.pairs_in_window == 0);
  CHECK(std::accumulate(res.counts.begin(), res.counts.end(), 0ull) == 0);
}

TEST_CASE("empty streams are fine") {
  CoincidenceConfig cfg;
  std::vector<std::int64_t> none;
  CoincidenceResult res = coincide(none, none, cfg);
  CHECK(res.pairs_in_window == 0);
}

TEST_CASE("matches the all-pairs oracle on random instances") {
  std::mt19937 rng(2024);
  for (int seed = 0; seed < 50; ++seed) {
    CoincidenceConfig cfg;
    cfg.window_ps = 150.0 + 10.0 * (seed % 7);
    cfg.range_ps = 200.0 + 25.0 * (seed % 5);
    cfg.bin_ps = 1.0 + (seed % 3);
    auto a = random_sorted_tags(rng, 10000, 2000000);
    auto b = random_sorted_tags(rng, 10000, 2000000);
    std::uint64_t oracle_window = 0;
    auto oracle = oracle_histogram(a, b, cfg, &oracle_window);
    CoincidenceResult res = coincide(a, b, cfg);
    CHECK(res.pairs_in_window == oracle_window);
    REQUIRE(res.counts.size() == oracle.size());
    bool equal = true;
    for (std::size_t i = 0; i < oracle.size(); ++i)
      if (res.counts[i] != oracle[i]) equal = false;
    CHECK(equal);
  }
}

TEST_CASE("chunked feeding reproduces the one-shot histogram") {
  std::mt19937 rng(99);
  auto a = random_sorted_tags(rng, 20000, 5000000);
  auto b = random_sorted_tags(rng, 20000, 5000000);
  CoincidenceConfig cfg;
  CoincidenceResult whole = coincide(a, b, cfg);

  std::uniform_int_distribution<std::size_t> cut(0, 3000);
  for (int trial = 0; trial < 10; ++trial) {
    CoincidenceAccumulator acc(cfg);
    std::size_t ia = 0, ib = 0;
    while (ia < a.size() || ib < b.size()) {
      std::size_t na = std::min(a.size() - ia, cut(rng));
      std::size_t nb = std::min(b.size() - ib, cut(rng));
      acc.feed_a(std::span<const std::int64_t>(a.data() + ia, na));
      acc.feed_b(std::span<const std::int64_t>(b.data() + ib, nb));
      ia += na;
      ib += nb;
    }
    CoincidenceResult chunked = acc.finish();
    CHECK(chunked.pairs_in_window == whole.pairs_in_window);
    bool equal = chunked.counts == whole.counts;
    CHECK(equal);
  }
}

TEST_CASE("unsorted input names the offending record") {
  CoincidenceConfig cfg;
  std::vector<std::int64_t> bad = {0, 10, 5, 20};
  std::vector<std::int64_t> good = {0, 10, 20};
  try {
    coincide(bad, good, cfg);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.record_index == 2);
  }
  try {
    coincide(good, bad, cfg);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.record_index == 2);
  }
}

TEST_CASE("folded JTI shows seven clusters passive, one active") {
  SourceParams src;
  src.pair_mean = 0.01;
  DeviceParams params;
  DetectorParams det;
  det.efficiency = 1.0;
  det.channel_loss_db = 0.0;
  det.jitter_fwhm_ps = 10.0;

  CoincidenceConfig cfg;
  TriggerSpec trig{2000.0, 1000.0};  // generator emits at (k + 1/2) periods

  auto clusters = [&](DeviceMode mode) {
    PhaseSettings ph;  // zero fringe argument
    PropagationResult dist = propagate(TimeBinState::bell(0.0), params, mode, ph);
    PairBatch batch = sample_pairs(400000, src, dist, 31);
    TimeTagStream tags = detect(batch, det, det, 31);
    auto ch_s = tags.channel_times(0);
    auto ch_i = tags.channel_times(1);
    Jti2dCounts counts = fold_jti(ch_s, ch_i, trig, cfg);
    // Count occupied 100 ps cells around the lobe grid.
    std::map<std::pair<int, int>, std::uint64_t> cells;
    for (int i = 0; i < counts.axis.n_bins; ++i)
      for (int j = 0; j < counts.axis.n_bins; ++j) {
        if (counts.at(i, j) == 0) continue;
        int cs = static_cast<int>(std::lround(counts.axis.center(i) / 100.0));
        int ci = static_cast<int>(std::lround(counts.axis.center(j) / 100.0));
        cells[{cs, ci}] += counts.at(i, j);
      }
    std::uint64_t total = 0;
    for (auto& [cell, n] : cells) total += n;
    int significant = 0;
    for (auto& [cell, n] : cells)
      if (n > total / 100) ++significant;
    return significant;
  };

  CHECK(clusters(DeviceMode::passive) == 7);
  CHECK(clusters(DeviceMode::active) == 1);

  Jti2dCounts empty = fold_jti(std::vector<std::int64_t>{}, std::vector<std::int64_t>{},
                               trig, cfg);
  CHECK(empty.coincidences == 0);
  CHECK_THROWS_AS(fold_jti(std::vector<std::int64_t>{}, std::vector<std::int64_t>{},
                           TriggerSpec{0.0, 0.0}, cfg),
                  ConfigError);
}

TEST_CASE("accidental estimate: uncorrelated streams give CAR near 1") {
  std::mt19937 rng(7);
  auto a = random_sorted_tags(rng, 30000, 60000000);
  auto b = random_sorted_tags(rng, 30000, 60000000);
  CoincidenceConfig cfg;
  cfg.window_ps = 500.0;
  AccidentalEstimate est = estimate_accidentals(a, b, cfg);
  CHECK(!est.infinite);
  double expect = static_cast<double>(est.true_window_counts);
  CHECK(std::abs(static_cast<double>(est.accidental_counts) - expect) <
        3.0 * std::sqrt(expect) + 10.0);
  CHECK(est.car_ratio == doctest::Approx(1.0).epsilon(0.25));
}

TEST_CASE("accidental estimate flags infinity and bad offsets") {
  CoincidenceConfig cfg;
  std::vector<std::int64_t> a = {1000, 2000, 3000};
  std::vector<std::int64_t> b = {1010, 2020, 3030};
  // Shift is 5 x 2000 ps = 10 ns > run span: error.
  CHECK_THROWS_AS(estimate_accidentals(a, b, cfg), std::domain_error);

  std::vector<std::int64_t> long_a, long_b;
  for (int i = 0; i < 100; ++i) {
    long_a.push_back(20000ll * i);
    long_b.push_back(20000ll * i + 15);
  }
  AccidentalEstimate est = estimate_accidentals(long_a, long_b, cfg);
  CHECK(est.true_window_counts == 100);
  CHECK(est.accidental_counts == 0);
  CHECK(est.infinite);
}

TEST_CASE("measured CAR tracks the analytic expectation within 10%") {
  SourceParams src;
  src.pair_mean = 0.01;
  DeviceParams params;
  PhaseSettings ph;  // fringe maximum
  PropagationResult dist = propagate(TimeBinState::bell(0.0), params, DeviceMode::active, ph);
  DetectorParams det;
  det.efficiency = 1.0;
  det.channel_loss_db = 0.0;
  det.jitter_fwhm_ps = 50.0;

  CoincidenceConfig cfg;
  cfg.window_ps = 400.0;

  struct Case {
    double target;
    std::uint64_t pulses;
  };
  for (const Case& c : {Case{10.0, 2000000}, Case{60.0, 8000000}, Case{150.0, 20000000}}) {
    SourceParams tuned = src;
    tuned.noise_singles_rate_hz = tune_noise_for_car(c.target, src, det, det, dist, cfg.window_ps);
    PairBatch batch = sample_pairs(c.pulses, tuned, dist, 1234 + static_cast<int>(c.target), 4);
    TimeTagStream tags = detect(batch, det, det, 1234 + static_cast<int>(c.target));
    auto ch_s = tags.channel_times(0);
    auto ch_i = tags.channel_times(1);
    AccidentalEstimate est = estimate_accidentals(ch_s, ch_i, cfg);
    CHECK(est.car_excess == doctest::Approx(c.target).epsilon(0.10));
  }
}
