#pragma once

#include <array>
#include <cstdint>

namespace timebin {

/// Philox4x32-10 counter-based generator.
///
/// Event generation must be bit-identical for a fixed seed no matter how the
/// pulse range is split across workers, so every draw is addressed by
/// (seed, stream, block, draw index) instead of depending on generator state
/// accumulated elsewhere. `block` is typically a pulse index.
struct Philox4x32 {
  static std::array<std::uint32_t, 4> round10(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key);
};

/// One logical draw sequence keyed by (seed, stream, block).
/// Consecutive uniform()/gauss()/poisson() calls advance a private draw
/// counter; two streams never collide for distinct (stream, block) pairs.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint32_t stream, std::uint64_t block)
      : seed_(seed), stream_(stream), block_(block) {}

  /// Uniform double in the open interval (0, 1).
  double uniform();

  /// Standard normal via Box-Muller (two uniforms per pair, cached).
  double gauss();

  /// Poisson sample; splits large means so the multiplication method
  /// stays cheap and exact.
  std::uint64_t poisson(double mean);

  /// Categorical draw from non-negative weights (need not be normalized).
  std::size_t categorical(const double* weights, std::size_t n, double total);

  /// Skip to an absolute draw offset (used to give each pair event within a
  /// pulse its own reserved slot of draws).
  void seek(std::uint64_t draw_index) { draw_ = draw_index; have_spare_ = false; }

 private:
  std::uint64_t next_u64();

  std::uint64_t seed_;
  std::uint32_t stream_;
  std::uint64_t block_;
  std::uint64_t draw_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace timebin
