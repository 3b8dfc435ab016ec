#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "exitguard/calib.hpp"
#include "exitguard/metrics.hpp"
#include "exitguard/rng.hpp"
#include "exitguard/types.hpp"

namespace exitguard {

struct ExitDecision {
  std::size_t exit_index = 0;  // 1-based, in [1, K]
  std::size_t predicted = 0;
  double confidence = 0.0;     // MSP at the chosen exit
  std::vector<double> scores;  // r_j = 1 - MSP_j for every exit
};

/// Earliest exit whose gate accepts; falls through to exit K.
ExitDecision choose_exit(const ExitRecord& record, const ThresholdSchedule& schedule);

struct PolicyReport {
  std::size_t sample_count = 0;
  double accuracy = 0.0;
  std::vector<std::size_t> exit_counts;
  std::vector<double> exit_rates;
  /// Error rate among samples that left at each exit; nullopt when none did.
  std::vector<std::optional<double>> selective_risk;
  /// Pooled over every sample with exit < K.
  std::size_t early_exit_count = 0;
  std::optional<double> early_exit_risk;
  double expected_compute = 0.0;
  // Head-level metrics over the whole test set, independent of the policy.
  std::vector<double> head_accuracy;
  std::vector<double> head_nll;
  std::vector<double> head_ece;
  std::vector<std::vector<ReliabilityBin>> reliability;
};

PolicyReport evaluate_policy(std::span<const ExitRecord> test, const ThresholdSchedule& schedule,
                             const CostModel& cost, const EceConfig& ece_cfg = {});

struct RiskEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t trials_used = 0;
  std::size_t trials_skipped = 0;  // trials where the acceptance set was empty
};

struct ValidityResult {
  double delta = 0.0;
  RiskBudget budget = RiskBudget::kPerExit;
  std::size_t trials = 0;
  std::size_t n_cal = 0;
  std::size_t n_test = 0;
  /// Selective risk on the acceptance set {r_j <= tau_j} of each gated exit.
  std::vector<RiskEstimate> exits;
  /// Pooled risk of the earliest-exit policy over samples leaving before K.
  RiskEstimate policy;

  /// Finite-sample slack 1 / (n_cal + 1).
  double slack() const { return 1.0 / static_cast<double>(n_cal + 1); }
};

/// Monte Carlo check of the finite-sample guarantee. Each trial draws an
/// exchangeable cal/test split from stream.derive(trial), calibrates on the
/// cal part and measures selective risk on the test part.
ValidityResult mc_validity(std::span<const ExitRecord> pool, double delta, std::size_t trials,
                           double cal_fraction, RngStream stream,
                           RiskBudget budget = RiskBudget::kPerExit);

}  // namespace exitguard
