#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "exitguard/error.hpp"
#include "exitguard/rng.hpp"

namespace exitguard {

/// Fractions for train / val / cal / test.
using SplitFractions = std::array<double, 4>;

inline constexpr SplitFractions kDefaultSplit{0.6, 0.1, 0.15, 0.15};

template <typename T>
struct DatasetSplit {
  std::vector<T> train;
  std::vector<T> val;
  std::vector<T> cal;
  std::vector<T> test;
};

/// Partition sizes for n items: floor of each share, then the remainder goes
/// to the largest fractional parts (ties to the earlier split).
std::array<std::size_t, 4> split_sizes(std::size_t n, const SplitFractions& fractions);

/// Deterministic shuffled partition. Items are first ordered by id so the
/// result does not depend on input order, then shuffled with `stream`.
/// T must expose a string member `id`; ids must be unique.
template <typename T>
DatasetSplit<T> split_dataset(const std::vector<T>& records, const SplitFractions& fractions,
                              RngStream stream) {
  if (records.empty()) throw InvalidInput("cannot split an empty record set");
  const auto sizes = split_sizes(records.size(), fractions);

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].id < records[b].id;
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (records[order[i]].id == records[order[i - 1]].id) {
      throw InvalidInput("duplicate record id '" + records[order[i]].id + "'");
    }
  }
  Rng rng(stream);
  rng.shuffle(std::span<std::size_t>(order));

  DatasetSplit<T> out;
  std::array<std::vector<T>*, 4> parts{&out.train, &out.val, &out.cal, &out.test};
  std::size_t pos = 0;
  for (std::size_t p = 0; p < 4; ++p) {
    parts[p]->reserve(sizes[p]);
    for (std::size_t i = 0; i < sizes[p]; ++i) parts[p]->push_back(records[order[pos++]]);
  }
  return out;
}

/// Two-way exchangeable split used for calibration / test resampling.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_two(const std::vector<T>& records,
                                                    double first_fraction, RngStream stream) {
  if (!(first_fraction >= 0.0 && first_fraction <= 1.0)) {
    throw ConfigError("split fraction must lie in [0,1]");
  }
  auto parts = split_dataset(records, {first_fraction, 0.0, 0.0, 1.0 - first_fraction}, stream);
  return {std::move(parts.train), std::move(parts.test)};
}

}  // namespace exitguard
