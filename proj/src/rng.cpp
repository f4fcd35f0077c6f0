#include "timebin/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace timebin {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline std::uint32_t mulhi(std::uint32_t a, std::uint32_t b, std::uint32_t* lo) {
  std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  *lo = static_cast<std::uint32_t>(p);
  return static_cast<std::uint32_t>(p >> 32);
}

}  // namespace

std::array<std::uint32_t, 4> Philox4x32::round10(std::array<std::uint32_t, 4> ctr,
                                                 std::array<std::uint32_t, 2> key) {
  for (int r = 0; r < 10; ++r) {
    std::uint32_t lo0, lo1;
    std::uint32_t hi0 = mulhi(kPhiloxM0, ctr[0], &lo0);
    std::uint32_t hi1 = mulhi(kPhiloxM1, ctr[2], &lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

std::uint64_t RandomStream::next_u64() {
  // Counter layout: (draw index, block lo, block hi, stream id).
  std::array<std::uint32_t, 4> ctr = {
      static_cast<std::uint32_t>(draw_ >> 1),
      static_cast<std::uint32_t>(block_),
      static_cast<std::uint32_t>(block_ >> 32),
      stream_,
  };
  // High draw-index bits fold into the key; runs never get near 2^33 draws
  // per block, but keep it total anyway.
  std::array<std::uint32_t, 2> key = {
      static_cast<std::uint32_t>(seed_) + static_cast<std::uint32_t>(draw_ >> 33),
      static_cast<std::uint32_t>(seed_ >> 32),
  };
  auto out = Philox4x32::round10(ctr, key);
  bool hi = draw_ & 1;
  ++draw_;
  return hi ? (static_cast<std::uint64_t>(out[2]) << 32 | out[3])
            : (static_cast<std::uint64_t>(out[0]) << 32 | out[1]);
}

double RandomStream::uniform() {
  // 53-bit mantissa, shifted into (0,1) so log() and Box-Muller stay finite.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::gauss() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * M_PI * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

std::uint64_t RandomStream::poisson(double mean) {
  if (mean < 0.0) throw std::domain_error("poisson: negative mean");
  if (mean == 0.0) return 0;
  // Recursive halving keeps the multiplication method at O(mean<=32) per leaf
  // while staying a pure function of the draw counter.
  if (mean > 32.0) return poisson(mean * 0.5) + poisson(mean * 0.5);
  double limit = std::exp(-mean);
  std::uint64_t k = 0;
  double prod = uniform();
  while (prod > limit) {
    ++k;
    prod *= uniform();
  }
  return k;
}

std::size_t RandomStream::categorical(const double* weights, std::size_t n, double total) {
  double x = uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    acc += weights[i];
    if (x < acc) return i;
  }
  return n - 1;
}

}  // namespace timebin
