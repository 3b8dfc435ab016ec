#include "exitguard/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "exitguard/error.hpp"
#include "exitguard/prob.hpp"

namespace exitguard {

CostModel::CostModel(std::vector<double> costs) : costs_(std::move(costs)) {
  if (costs_.empty()) throw InvalidInput("cost model needs at least one exit");
  for (std::size_t j = 0; j < costs_.size(); ++j) {
    if (!(costs_[j] > 0.0) || !std::isfinite(costs_[j])) {
      throw InvalidInput("exit costs must be positive and finite");
    }
    if (j > 0 && costs_[j] < costs_[j - 1]) {
      throw InvalidInput("exit costs must be non-decreasing");
    }
  }
}

CostModel CostModel::normalized_depth(std::size_t exits) {
  std::vector<double> costs(exits);
  for (std::size_t j = 0; j < exits; ++j) {
    costs[j] = static_cast<double>(j + 1) / static_cast<double>(exits);
  }
  return CostModel(std::move(costs));
}

double msp(std::span<const double> p) { return *std::max_element(p.begin(), p.end()); }

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return std::max(h, 0.0);
}

double msp(const ProbVec& p) { return msp(p.values()); }
double uncertainty_score(const ProbVec& p) { return 1.0 - msp(p); }
double entropy(const ProbVec& p) { return entropy(p.values()); }

double nll(const ProbVec& p, std::size_t label) {
  if (label >= p.size()) throw InvalidInput("label out of range for NLL");
  return -safe_log(p[label]);
}

EceAccumulator::EceAccumulator(EceConfig cfg)
    : cfg_(cfg),
      counts_(cfg.num_bins, 0),
      confidence_sums_(cfg.num_bins, 0.0),
      correct_counts_(cfg.num_bins, 0) {
  if (cfg_.num_bins == 0) throw ConfigError("ECE needs at least one bin");
}

std::size_t EceAccumulator::bin_index(double confidence, std::size_t num_bins) {
  const double b = static_cast<double>(num_bins);
  auto idx = static_cast<std::size_t>(std::max(0.0, std::ceil(confidence * b) - 1.0));
  idx = std::min(idx, num_bins - 1);
  // Correct for rounding in confidence * b so boundaries stay right-closed.
  while (idx > 0 && confidence <= static_cast<double>(idx) / b) --idx;
  while (idx + 1 < num_bins && confidence > static_cast<double>(idx + 1) / b) ++idx;
  return idx;
}

void EceAccumulator::add(double confidence, bool correct) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw InvalidInput("confidence outside [0,1]: " + std::to_string(confidence));
  }
  const auto idx = bin_index(confidence, cfg_.num_bins);
  ++counts_[idx];
  confidence_sums_[idx] += confidence;
  if (correct) ++correct_counts_[idx];
  ++total_;
}

void EceAccumulator::merge(const EceAccumulator& other) {
  if (other.cfg_.num_bins != cfg_.num_bins) throw InvalidInput("ECE bin counts differ");
  for (std::size_t b = 0; b < counts_.size(); ++b) {
    counts_[b] += other.counts_[b];
    confidence_sums_[b] += other.confidence_sums_[b];
    correct_counts_[b] += other.correct_counts_[b];
  }
  total_ += other.total_;
}

double EceAccumulator::value() const {
  if (total_ == 0) throw InvalidInput("ECE of empty sample");
  double sum = 0.0;
  for (std::size_t b = 0; b < counts_.size(); ++b) {
    if (counts_[b] == 0) continue;
    const double n = static_cast<double>(counts_[b]);
    const double acc = static_cast<double>(correct_counts_[b]) / n;
    const double conf = confidence_sums_[b] / n;
    sum += (n / static_cast<double>(total_)) * std::abs(acc - conf);
  }
  return sum;
}

std::vector<ReliabilityBin> EceAccumulator::bins() const {
  std::vector<ReliabilityBin> out(counts_.size());
  const double b = static_cast<double>(counts_.size());
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    out[i].lower = static_cast<double>(i) / b;
    out[i].upper = static_cast<double>(i + 1) / b;
    out[i].count = counts_[i];
    if (counts_[i] > 0) {
      const double n = static_cast<double>(counts_[i]);
      out[i].mean_confidence = confidence_sums_[i] / n;
      out[i].accuracy = static_cast<double>(correct_counts_[i]) / n;
    }
  }
  return out;
}

double ece(std::span<const double> confidences, const std::vector<bool>& correct,
           const EceConfig& cfg) {
  if (confidences.empty()) throw InvalidInput("ECE of empty sample");
  if (confidences.size() != correct.size()) throw InvalidInput("ECE inputs differ in length");
  EceAccumulator acc(cfg);
  for (std::size_t i = 0; i < confidences.size(); ++i) acc.add(confidences[i], correct[i]);
  return acc.value();
}

std::optional<double> selective_risk(std::size_t errors, std::size_t accepted) {
  if (accepted == 0) return std::nullopt;
  return static_cast<double>(errors) / static_cast<double>(accepted);
}

std::optional<double> selective_risk(const std::vector<bool>& errors) {
  const auto wrong = static_cast<std::size_t>(std::count(errors.begin(), errors.end(), true));
  return selective_risk(wrong, errors.size());
}

double expected_compute(std::span<const double> exit_rates, const CostModel& cost) {
  if (exit_rates.size() != cost.exits()) {
    throw InvalidInput("exit rate vector length does not match cost model");
  }
  double total = 0.0;
  for (double pi : exit_rates) {
    if (!(pi >= 0.0)) throw InvalidInput("exit rates must be non-negative");
    total += pi;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidInput("exit rates must sum to 1");
  double value = 0.0;
  for (std::size_t j = 0; j < exit_rates.size(); ++j) value += exit_rates[j] * cost.costs()[j];
  return value;
}

}  // namespace exitguard
