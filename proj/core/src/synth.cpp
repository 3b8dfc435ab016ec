#include "exitguard/synth.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "exitguard/error.hpp"

namespace exitguard {

std::vector<std::vector<double>> blob_means(const BlobSpec& spec) {
  if (spec.classes > 2 * spec.dim) {
    throw ConfigError("cannot place " + std::to_string(spec.classes) + " blob means in " +
                      std::to_string(spec.dim) + " dimensions");
  }
  std::vector<std::vector<double>> means(spec.classes, std::vector<double>(spec.dim, 0.0));
  for (std::size_t c = 0; c < spec.classes; ++c) {
    if (c < spec.dim) {
      means[c][c] = spec.separation;
    } else {
      means[c][c - spec.dim] = -spec.separation;
    }
  }
  return means;
}

std::vector<Sample> synth_blobs(const BlobSpec& spec, RngStream stream) {
  if (spec.classes < 2) throw ConfigError("need at least two classes");
  if (spec.dim < 2) throw ConfigError("blob dimension must be at least 2");
  if (spec.n < spec.classes) throw ConfigError("need at least one sample per class");
  if (!(spec.separation >= 0.0) || !std::isfinite(spec.separation)) {
    throw ConfigError("separation must be non-negative");
  }
  const auto means = blob_means(spec);
  Rng rng(stream);
  std::vector<Sample> samples(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "s%06zu", i);
    auto& s = samples[i];
    s.id = id;
    s.label = i % spec.classes;
    s.features.resize(spec.dim);
    for (std::size_t d = 0; d < spec.dim; ++d) s.features[d] = means[s.label][d] + rng.normal();
  }
  return samples;
}

}  // namespace exitguard
