#include "exitguard/split.hpp"

#include <cmath>

namespace exitguard {

std::array<std::size_t, 4> split_sizes(std::size_t n, const SplitFractions& fractions) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0) || !std::isfinite(f)) throw ConfigError("split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("split fractions sum to " + std::to_string(total) + ", expected 1");
  }
  std::array<std::size_t, 4> sizes{};
  std::array<double, 4> remainders{};
  std::size_t assigned = 0;
  for (std::size_t p = 0; p < 4; ++p) {
    const double share = fractions[p] * static_cast<double>(n);
    sizes[p] = static_cast<std::size_t>(std::floor(share));
    // Empty splits never receive leftover items.
    remainders[p] = fractions[p] > 0.0 ? share - static_cast<double>(sizes[p]) : -0.5;
    assigned += sizes[p];
  }
  while (assigned < n) {
    std::size_t best = 0;
    for (std::size_t p = 1; p < 4; ++p) {
      if (remainders[p] > remainders[best]) best = p;
    }
    ++sizes[best];
    remainders[best] = -1.0;
    ++assigned;
  }
  return sizes;
}

}  // namespace exitguard
