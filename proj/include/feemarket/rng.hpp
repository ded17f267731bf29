#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace feemarket {

enum class StreamPurpose : std::uint64_t {
  kArrival = 1,
  kValuation = 2,
  kService = 3,
  kBlockArrival = 4,
  kBlockBid = 5,
};

/// Counter-based generator: output n is the SplitMix64 finalizer applied to
/// key + n * golden_gamma, with the key derived from (seed, replication,
/// queue, purpose). Every substream is independent of the order in which
/// other substreams are consumed.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  static constexpr const char* kAlgorithm = "splitmix64-counter";

  CounterRng(std::uint64_t seed, std::uint64_t replication, std::uint64_t queue, StreamPurpose purpose)
      : key_(derive_key(seed, replication, queue, static_cast<std::uint64_t>(purpose))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    ++counter_;
    return mix(key_ + counter_ * kGamma);
  }

  /// Uniform on (0, 1].
  double uniform_open_zero() { return (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53; }

  /// Exponential with the given rate, by inversion.
  double exponential(double rate) { return -std::log(uniform_open_zero()) / rate; }

  std::uint64_t counter() const { return counter_; }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t replication,
                                            std::uint64_t queue, std::uint64_t purpose) {
    std::uint64_t k = mix(seed + kGamma);
    k = mix(k ^ (replication + 1) * 0xd1b54a32d192ed03ULL);
    k = mix(k ^ (queue + 1) * 0xabc98388fb8fac03ULL);
    k = mix(k ^ purpose * 0x8cb92ba72f3d8dd7ULL);
    return k;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace feemarket
