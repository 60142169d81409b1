#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace hte {

namespace detail {

// SplitMix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

}  // namespace detail

/// Counter-based random stream. The pair (seed, stream_id) fully determines
/// the output sequence, independent of platform or call site. Distinct
/// stream_ids give statistically independent sequences, so parallel workers
/// can each take a substream and still reproduce bit-identical results.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : seed_(seed),
        stream_id_(stream_id),
        state_(detail::mix64(seed + detail::kGolden * detail::mix64(stream_id + 1))) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Derived stream; substream(k) of equal streams are equal, substreams with
  /// distinct k are independent.
  RngStream substream(std::uint64_t k) const {
    return RngStream(seed_, detail::mix64(stream_id_ + detail::kGolden * (k + 1)));
  }

  std::uint64_t next_u64() {
    state_ += detail::kGolden;
    return detail::mix64(state_);
  }

  /// Uniform on [0, 1), 53 random bits.
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double next_gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    // u1 in (0, 1] so the log is finite.
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    // Multiply-shift; bias is negligible for n << 2^64 but we reject to be exact.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x > limit);
    return x % n;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace hte
