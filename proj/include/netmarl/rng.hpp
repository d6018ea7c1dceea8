#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

namespace netmarl {

/// SplitMix64 output finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/**
 * Counter-based random stream.
 *
 * The n-th draw of a stream is a pure function of (key, n), and child
 * streams are keyed by hashing (parent key, tag). A simulation derives one
 * stream per (purpose, time step, agent) so results never depend on the
 * order in which agents or replicates are processed.
 */
class Stream {
 public:
  using result_type = std::uint64_t;

  constexpr Stream() noexcept : key_(mix64(0x6a09e667f3bcc909ULL)) {}
  explicit constexpr Stream(std::uint64_t seed) noexcept
      : key_(mix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

  [[nodiscard]] constexpr Stream split(std::uint64_t tag) const noexcept {
    Stream child;
    child.key_ = mix64(key_ ^ mix64(tag + 0x9e3779b97f4a7c15ULL));
    return child;
  }

  template <class... Tags>
  [[nodiscard]] constexpr Stream split(std::uint64_t tag, std::uint64_t next, Tags... rest) const noexcept {
    return split(tag).split(next, static_cast<std::uint64_t>(rest)...);
  }

  constexpr std::uint64_t key() const noexcept { return key_; }

  constexpr std::uint64_t next_u64() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }
  constexpr std::uint64_t operator()() noexcept { return next_u64(); }
  static constexpr std::uint64_t min() noexcept { return 0; }
  static constexpr std::uint64_t max() noexcept { return std::numeric_limits<std::uint64_t>::max(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Uniform integer in [0, n), rejection sampled (no modulo bias).
  std::uint64_t below(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  /// Inverse-CDF draw from unnormalized nonnegative weights.
  std::size_t categorical(std::span<const double> weights) noexcept {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    std::size_t last_positive = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      if (weights[k] <= 0.0) continue;
      last_positive = k;
      if (u < weights[k]) return k;
      u -= weights[k];
    }
    return last_positive;
  }

  double normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Stable tags for the stream tree, so independent consumers never share draws.
namespace stream_tag {
inline constexpr std::uint64_t kLinks = 0x4c494e4b;       // "LINK"
inline constexpr std::uint64_t kTransition = 0x54524e53;  // "TRNS"
inline constexpr std::uint64_t kAction = 0x41435421;      // "ACT!"
inline constexpr std::uint64_t kInitial = 0x494e4954;     // "INIT"
inline constexpr std::uint64_t kOuter = 0x4f555452;       // "OUTR"
inline constexpr std::uint64_t kEval = 0x4556414c;        // "EVAL"
inline constexpr std::uint64_t kEnv = 0x454e5650;         // "ENVP"
inline constexpr std::uint64_t kReplicate = 0x5245504c;   // "REPL"
}  // namespace stream_tag

}  // namespace netmarl
