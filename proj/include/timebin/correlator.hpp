#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "timebin/analytic.hpp"

namespace timebin {

struct CoincidenceConfig {
  double window_ps = 500.0;   // |t_b - t_a| <= window counts as a coincidence
  double bin_ps = 1.0;        // delay histogram bin
  double range_ps = 500.0;    // delay histogram half-range
  double pump_period_ps = 2000.0;
  int accidental_offset_periods = 5;
  double jti_bin_ps = 10.0;   // folded-JTI bin (Fig-4-style rebinning)

  void validate() const;
};

struct CoincidenceResult {
  GridSpec axis;                     // delay bins over [-range, range)
  std::vector<std::uint64_t> counts;
  std::uint64_t pairs_in_window = 0;
  std::uint64_t tags_a = 0, tags_b = 0;

  DelayHistogram to_histogram() const;
};

/// Single-pass windowed pairing of two sorted tag streams. Streams may be
/// fed in arbitrary chunks; memory stays bounded by the number of tags
/// inside one histogram range. Results are identical for any chunking.
class CoincidenceAccumulator {
 public:
  explicit CoincidenceAccumulator(const CoincidenceConfig& cfg);

  void feed_a(std::span<const std::int64_t> chunk);
  void feed_b(std::span<const std::int64_t> chunk);
  CoincidenceResult finish();

 private:
  void check_sorted(std::span<const std::int64_t> chunk, bool is_a);
  void drain(bool b_exhausted);

  CoincidenceConfig cfg_;
  std::int64_t reach_ps_;
  std::deque<std::int64_t> a_, b_;
  std::int64_t a_last_, b_last_;
  std::uint64_t a_seen_ = 0, b_seen_ = 0;
  CoincidenceResult result_;
  bool finished_ = false;
};

/// All-pairs-within-range coincidence histogram of two sorted streams.
/// Throws DataError naming the offending index on unsorted input.
CoincidenceResult coincide(std::span<const std::int64_t> stream_a,
                           std::span<const std::int64_t> stream_b,
                           const CoincidenceConfig& cfg);

struct TriggerSpec {
  double period_ps;
  double offset_ps = 0.0;  // emission-time origin of the pulse train
};

/// Trigger-folded 2D coincidence counts over one pulse frame, axes centered
/// on [-period/2, period/2).
struct Jti2dCounts {
  GridSpec axis;
  std::vector<std::uint64_t> counts;  // row-major [i_s * n + i_i]
  std::uint64_t tags_s = 0, tags_i = 0;
  std::uint64_t coincidences = 0;

  std::uint64_t at(int i_s, int i_i) const { return counts[i_s * axis.n_bins + i_i]; }
};

/// Folds every in-window coincidence at (t_s mod period, t_i mod period).
Jti2dCounts fold_jti(std::span<const std::int64_t> stream_s,
                     std::span<const std::int64_t> stream_i, const TriggerSpec& trigger,
                     const CoincidenceConfig& cfg);

struct AccidentalEstimate {
  std::uint64_t true_window_counts = 0;
  std::uint64_t accidental_counts = 0;
  double car_ratio = 0.0;   // true / accidental
  double car_excess = 0.0;  // (true - accidental) / accidental
  bool infinite = false;
};

/// Shifted-window accidental estimate: repeats the coincidence count with
/// stream_b delayed by offset pump periods and reports both CAR conventions.
AccidentalEstimate estimate_accidentals(std::span<const std::int64_t> stream_a,
                                        std::span<const std::int64_t> stream_b,
                                        const CoincidenceConfig& cfg);

}  // namespace timebin
