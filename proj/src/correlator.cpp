#include "timebin/correlator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "timebin/errors.hpp"

namespace timebin {

void CoincidenceConfig::validate() const {
  if (!(bin_ps > 0.0 && bin_ps <= window_ps))
    throw std::domain_error("CoincidenceConfig: need 0 < bin <= window");
  if (!(range_ps > 0.0)) throw std::domain_error("CoincidenceConfig: range must be > 0");
  if (!(pump_period_ps > 0.0))
    throw std::domain_error("CoincidenceConfig: pump period must be > 0");
  if (accidental_offset_periods == 0)
    throw std::domain_error("CoincidenceConfig: accidental offset must be nonzero");
  if (!(jti_bin_ps > 0.0)) throw std::domain_error("CoincidenceConfig: jti bin must be > 0");
}

DelayHistogram CoincidenceResult::to_histogram() const {
  DelayHistogram h;
  h.axis = axis;
  h.mass.assign(counts.begin(), counts.end());
  return h;
}

CoincidenceAccumulator::CoincidenceAccumulator(const CoincidenceConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  reach_ps_ = static_cast<std::int64_t>(std::ceil(std::max(cfg.range_ps, cfg.window_ps)));
  result_.axis.bin_ps = cfg.bin_ps;
  result_.axis.min_ps = -cfg.range_ps;
  result_.axis.n_bins = static_cast<int>(std::ceil(2.0 * cfg.range_ps / cfg.bin_ps));
  result_.counts.assign(result_.axis.n_bins, 0);
  a_last_ = b_last_ = std::numeric_limits<std::int64_t>::min();
}

void CoincidenceAccumulator::check_sorted(std::span<const std::int64_t> chunk, bool is_a) {
  std::int64_t last = is_a ? a_last_ : b_last_;
  std::uint64_t seen = is_a ? a_seen_ : b_seen_;
  for (std::size_t i = 0; i < chunk.size(); ++i) {
    if (chunk[i] < last)
      throw DataError(std::string("unsorted tag stream ") + (is_a ? "a" : "b") +
                          " at record " + std::to_string(seen + i),
                      static_cast<long long>(seen + i));
    last = chunk[i];
  }
  if (is_a) {
    a_last_ = last;
    a_seen_ = seen + chunk.size();
  } else {
    b_last_ = last;
    b_seen_ = seen + chunk.size();
  }
}

void CoincidenceAccumulator::drain(bool b_exhausted) {
  const double range = cfg_.range_ps;
  const double window = cfg_.window_ps;
  while (!a_.empty()) {
    std::int64_t a = a_.front();
    // Finalize a only once every matching b is guaranteed present.
    if (!b_exhausted && (b_.empty() || b_last_ < a + reach_ps_)) break;
    while (!b_.empty() && b_.front() < a - reach_ps_) b_.pop_front();
    for (std::int64_t b : b_) {
      if (b > a + reach_ps_) break;
      double d = static_cast<double>(b - a);
      if (std::abs(d) <= range) {
        int idx = static_cast<int>((d + range) / cfg_.bin_ps);
        if (idx >= result_.axis.n_bins) idx = result_.axis.n_bins - 1;
        if (idx >= 0) ++result_.counts[idx];
      }
      if (std::abs(d) <= window) ++result_.pairs_in_window;
    }
    a_.pop_front();
  }
  if (b_exhausted) b_.clear();
}

void CoincidenceAccumulator::feed_a(std::span<const std::int64_t> chunk) {
  check_sorted(chunk, true);
  a_.insert(a_.end(), chunk.begin(), chunk.end());
  drain(false);
}

void CoincidenceAccumulator::feed_b(std::span<const std::int64_t> chunk) {
  check_sorted(chunk, false);
  b_.insert(b_.end(), chunk.begin(), chunk.end());
  drain(false);
}

CoincidenceResult CoincidenceAccumulator::finish() {
  if (!finished_) {
    drain(true);
    finished_ = true;
  }
  result_.tags_a = a_seen_;
  result_.tags_b = b_seen_;
  return result_;
}

CoincidenceResult coincide(std::span<const std::int64_t> stream_a,
                           std::span<const std::int64_t> stream_b,
                           const CoincidenceConfig& cfg) {
  CoincidenceAccumulator acc(cfg);
  acc.feed_a(stream_a);
  acc.feed_b(stream_b);
  return acc.finish();
}

Jti2dCounts fold_jti(std::span<const std::int64_t> stream_s,
                     std::span<const std::int64_t> stream_i, const TriggerSpec& trigger,
                     const CoincidenceConfig& cfg) {
  cfg.validate();
  if (!(trigger.period_ps > 0.0))
    throw ConfigError("fold_jti: pump period missing or not positive");

  Jti2dCounts out;
  out.axis.bin_ps = cfg.jti_bin_ps;
  out.axis.min_ps = -trigger.period_ps / 2.0;
  out.axis.n_bins = static_cast<int>(std::ceil(trigger.period_ps / cfg.jti_bin_ps));
  out.counts.assign(static_cast<std::size_t>(out.axis.n_bins) * out.axis.n_bins, 0);
  out.tags_s = stream_s.size();
  out.tags_i = stream_i.size();

  auto fold = [&](std::int64_t t) {
    double m = std::fmod(static_cast<double>(t) - trigger.offset_ps, trigger.period_ps);
    if (m < -trigger.period_ps / 2.0) m += trigger.period_ps;
    if (m >= trigger.period_ps / 2.0) m -= trigger.period_ps;
    int idx = static_cast<int>((m - out.axis.min_ps) / out.axis.bin_ps);
    return std::clamp(idx, 0, out.axis.n_bins - 1);
  };

  // Same two-pointer pass as coincide, restricted to the coincidence window.
  const std::int64_t reach = static_cast<std::int64_t>(std::ceil(cfg.window_ps));
  std::size_t lo = 0;
  std::int64_t last_s = std::numeric_limits<std::int64_t>::min();
  std::int64_t last_i = std::numeric_limits<std::int64_t>::min();
  for (std::size_t j = 0; j < stream_i.size(); ++j) {
    if (stream_i[j] < last_i)
      throw DataError("unsorted tag stream i at record " + std::to_string(j),
                      static_cast<long long>(j));
    last_i = stream_i[j];
  }
  for (std::size_t i = 0; i < stream_s.size(); ++i) {
    std::int64_t ts = stream_s[i];
    if (ts < last_s)
      throw DataError("unsorted tag stream s at record " + std::to_string(i),
                      static_cast<long long>(i));
    last_s = ts;
    while (lo < stream_i.size() && stream_i[lo] < ts - reach) ++lo;
    for (std::size_t j = lo; j < stream_i.size() && stream_i[j] <= ts + reach; ++j) {
      if (std::abs(static_cast<double>(stream_i[j] - ts)) > cfg.window_ps) continue;
      ++out.counts[static_cast<std::size_t>(fold(ts)) * out.axis.n_bins + fold(stream_i[j])];
      ++out.coincidences;
    }
  }
  return out;
}

AccidentalEstimate estimate_accidentals(std::span<const std::int64_t> stream_a,
                                        std::span<const std::int64_t> stream_b,
                                        const CoincidenceConfig& cfg) {
  cfg.validate();
  std::int64_t shift = static_cast<std::int64_t>(
      std::llround(cfg.accidental_offset_periods * cfg.pump_period_ps));
  if (!stream_b.empty() && !stream_a.empty()) {
    std::int64_t span_b = stream_b.back() - stream_b.front();
    if (std::abs(shift) >= span_b && span_b > 0)
      throw std::domain_error("estimate_accidentals: offset shift exceeds run duration");
  }

  AccidentalEstimate est;
  est.true_window_counts = coincide(stream_a, stream_b, cfg).pairs_in_window;

  std::vector<std::int64_t> shifted(stream_b.begin(), stream_b.end());
  for (std::int64_t& t : shifted) t -= shift;
  est.accidental_counts = coincide(stream_a, shifted, cfg).pairs_in_window;

  if (est.accidental_counts == 0) {
    est.infinite = true;
    est.car_ratio = std::numeric_limits<double>::infinity();
    est.car_excess = std::numeric_limits<double>::infinity();
  } else {
    est.car_ratio = static_cast<double>(est.true_window_counts) / est.accidental_counts;
    est.car_excess = (static_cast<double>(est.true_window_counts) -
                      static_cast<double>(est.accidental_counts)) /
                     est.accidental_counts;
  }
  return est;
}

}  // namespace timebin
