#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "exitguard/types.hpp"

namespace exitguard {

/// Cumulative cost to reach each exit. Non-decreasing and strictly positive;
/// by convention the final exit costs 1.0 under the normalized-depth proxy.
class CostModel {
 public:
  explicit CostModel(std::vector<double> costs);

  /// c_j = j / K: exit j sits after j of K equally sized stages.
  static CostModel normalized_depth(std::size_t exits);

  std::span<const double> costs() const noexcept { return costs_; }
  std::size_t exits() const noexcept { return costs_.size(); }
  double final_cost() const { return costs_.back(); }

 private:
  std::vector<double> costs_;
};

double msp(const ProbVec& p);
/// 1 - MSP; low means confident.
double uncertainty_score(const ProbVec& p);
/// Shannon entropy in nats with 0 ln 0 = 0.
double entropy(const ProbVec& p);
double nll(const ProbVec& p, std::size_t label);

// Raw-span overloads for hot paths that already hold normalized probabilities.
double msp(std::span<const double> p);
double entropy(std::span<const double> p);

struct EceConfig {
  std::size_t num_bins = 15;
};

struct ReliabilityBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
};

/// Mergeable equal-width binning accumulator over [0, 1]. Bins are
/// right-closed, (lo, hi], except the first which also takes 0.
class EceAccumulator {
 public:
  explicit EceAccumulator(EceConfig cfg = {});

  void add(double confidence, bool correct);
  void merge(const EceAccumulator& other);

  std::size_t count() const noexcept { return total_; }
  double value() const;
  std::vector<ReliabilityBin> bins() const;

  static std::size_t bin_index(double confidence, std::size_t num_bins);

 private:
  EceConfig cfg_;
  std::vector<std::size_t> counts_;
  std::vector<double> confidence_sums_;
  std::vector<std::size_t> correct_counts_;
  std::size_t total_ = 0;
};

/// Expected calibration error. Throws InvalidInput on empty or mismatched input.
double ece(std::span<const double> confidences, const std::vector<bool>& correct,
           const EceConfig& cfg = {});

/// Error fraction among accepted samples; nullopt when nothing was accepted.
std::optional<double> selective_risk(const std::vector<bool>& errors);
std::optional<double> selective_risk(std::size_t errors, std::size_t accepted);

/// Sum_j pi_j c_j.
double expected_compute(std::span<const double> exit_rates, const CostModel& cost);

}  // namespace exitguard
