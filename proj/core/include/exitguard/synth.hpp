#pragma once

#include <cstddef>
#include <vector>

#include "exitguard/rng.hpp"
#include "exitguard/types.hpp"

namespace exitguard {

struct BlobSpec {
  std::size_t n = 3000;
  std::size_t classes = 3;
  std::size_t dim = 8;
  double separation = 4.0;
};

/// Class means: separation * e_c for c < dim, then -separation * e_(c-dim).
/// Every pair sits at distance >= separation. Throws ConfigError when
/// classes > 2 * dim.
std::vector<std::vector<double>> blob_means(const BlobSpec& spec);

/// Balanced Gaussian blobs with unit covariance. Sample i belongs to class
/// i mod C and has id "s<i>" zero-padded to 6 digits.
std::vector<Sample> synth_blobs(const BlobSpec& spec, RngStream stream);

}  // namespace exitguard
