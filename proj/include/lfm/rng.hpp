#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace lfm {

/// Counter-based SplitMix64 stream.
///
/// Every draw is defined bit-for-bit here (no std distributions), so runs are
/// reproducible across standard libraries. Independent substreams are
/// derived from a parent key plus integer coordinates, which lets parallel
/// loops draw without depending on the schedule.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : key_(seed), state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next(); }
  std::uint64_t next();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, bound). `bound` must be positive.
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal via Box-Muller.
  double normal();

  /// Substream keyed by this stream's seed and `index`; does not advance this stream.
  Rng substream(std::uint64_t index) const;
  Rng substream(std::initializer_list<std::uint64_t> path) const;

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t state_;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace lfm
