#include "exitguard/prob.hpp"

#include <algorithm>
#include <cmath>

#include "exitguard/error.hpp"

namespace exitguard {

void softmax_into(std::span<const double> logits, std::span<double> out, double temperature) {
  const double max_z = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    out[c] = std::exp((logits[c] - max_z) / temperature);
    total += out[c];
  }
  for (double& v : out) v /= total;
}

ProbVec softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidInput("softmax of empty vector");
  for (double z : logits) {
    if (!std::isfinite(z)) throw InvalidInput("softmax input is not finite");
  }
  std::vector<double> out(logits.size());
  softmax_into(logits, out);
  return ProbVec(std::move(out));
}

double log_sum_exp(std::span<const double> values) {
  const double max_v = *std::max_element(values.begin(), values.end());
  double total = 0.0;
  for (double v : values) total += std::exp(v - max_v);
  return max_v + std::log(total);
}

std::vector<double> log_softmax(std::span<const double> logits, double temperature) {
  std::vector<double> scaled(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) scaled[c] = logits[c] / temperature;
  const double lse = log_sum_exp(scaled);
  for (double& v : scaled) v -= lse;
  return scaled;
}

std::size_t argmax_class(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t c = 1; c < values.size(); ++c) {
    if (values[c] > values[best]) best = c;
  }
  return best;
}

double safe_log(double p) { return std::log(std::clamp(p, kProbFloor, 1.0)); }

}  // namespace exitguard
