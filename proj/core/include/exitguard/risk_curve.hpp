#pragma once

#include <optional>
#include <span>
#include <vector>

#include "exitguard/calib.hpp"
#include "exitguard/metrics.hpp"
#include "exitguard/rng.hpp"
#include "exitguard/types.hpp"

namespace exitguard {

struct RiskCurveRow {
  double delta = 0.0;
  std::vector<Threshold> thresholds;
  std::vector<std::optional<double>> exit_risk;  // K entries
  std::optional<double> overall_risk;            // pooled early-exit risk
  std::vector<double> exit_rates;                // K entries
  double expected_compute = 0.0;
  double accuracy = 0.0;
};

struct RiskCurve {
  std::vector<RiskCurveRow> rows;
};

struct RiskCurveSpec {
  double cal_fraction = 0.5;
  RiskBudget budget = RiskBudget::kPerExit;
};

/// One cal/test split of `pool`; for each delta, calibrate on cal and run the
/// policy on test. Deltas must be strictly increasing inside (0, 1).
RiskCurve risk_curve(std::span<const ExitRecord> pool, std::span<const double> deltas,
                     const RiskCurveSpec& spec, RngStream stream, const CostModel& cost);

/// Throws ConfigError unless the grid is non-empty, inside (0, 1) and
/// strictly increasing.
void validate_delta_grid(std::span<const double> deltas);

}  // namespace exitguard
