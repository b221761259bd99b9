#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace bks {

// Counter-based pseudo-random generator: a SplitMix64 output function applied
// to an incrementing counter under a per-stream key.  Forking a child stream
// is O(1) and children are statistically independent of the parent, which
// keeps replicated experiments deterministic no matter how repetitions are
// scheduled.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : key_(mix(seed ^ 0x7b1dcdaf1a583f2cULL)) {}

  std::uint64_t next_u64() {
    counter_ += 0x9e3779b97f4a7c15ULL;
    return mix(key_ ^ counter_);
  }

  // Uniform draw from the open interval (0,1).  Never returns 0 or 1, so
  // logarithms and reciprocals of the result stay finite.
  double open01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Exponential variate with the given rate.  Rate 0 yields +infinity, which
  // callers treat as "no constraint"; a negative rate is a caller bug.
  double exponential(double rate) {
    if (rate < 0 || std::isnan(rate)) {
      throw std::domain_error("exponential draw requires a nonnegative rate");
    }
    if (rate == 0) return std::numeric_limits<double>::infinity();
    return -std::log(open01()) / rate;
  }

  // Child generator for the given stream index.  Distinct indices, and the
  // parent itself, produce unrelated sequences.
  SplitRng split(std::uint64_t index) const {
    SplitRng child(0);
    child.key_ = mix(key_ + mix(index ^ 0xa3ec647659359acdULL));
    return child;
  }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace bks
