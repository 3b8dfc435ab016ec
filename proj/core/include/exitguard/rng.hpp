#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace exitguard {

/// Identifies a reproducible random sequence. Two streams with equal
/// (seed, stream_id) produce identical draws on every platform.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  /// Child stream for a sub-task (trial index, epoch, ...).
  RngStream derive(std::uint64_t sub) const noexcept;

  friend bool operator==(const RngStream&, const RngStream&) = default;
};

// Well-known stream ids so independent pipeline stages never share draws.
namespace streams {
inline constexpr std::uint64_t kSynth = 1;
inline constexpr std::uint64_t kSplit = 2;
inline constexpr std::uint64_t kInit = 3;
inline constexpr std::uint64_t kShuffle = 4;
inline constexpr std::uint64_t kMonteCarlo = 5;
inline constexpr std::uint64_t kShift = 6;
inline constexpr std::uint64_t kGradCheck = 7;
}  // namespace streams

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Sampler bound to one RngStream. Distributions are implemented here rather
/// than through <random> distribution objects, whose algorithms are
/// implementation-defined.
class Rng {
 public:
  explicit Rng(RngStream stream);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace exitguard
