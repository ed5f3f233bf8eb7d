#pragma once

#include <cstdint>
#include <random>

namespace arff {

/// Seeded random stream.
///
/// Built on std::mt19937_64, whose output sequence is fixed by the standard,
/// with uniform and normal variates derived here rather than through the
/// implementation-defined std:: distributions. Identical seeds therefore give
/// identical draws on every conforming platform. Child streams obtained with
/// split() are seeded by mixing the parent seed with a stream id, so
/// independent consumers never share state.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }
  /// Number of 64-bit words consumed so far.
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1); never returns 0.
  double uniform_open();
  /// Standard normal (Marsaglia polar method).
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);

  /// Independent stream derived from (seed, stream_id); does not advance *this.
  RngStream split(std::uint64_t stream_id) const;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer, used for seed derivation.
std::uint64_t mix_seed(std::uint64_t x) noexcept;

}  // namespace arff
