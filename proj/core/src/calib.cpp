#include "exitguard/calib.hpp"

#include <algorithm>
#include <cmath>

#include "exitguard/error.hpp"
#include "exitguard/metrics.hpp"
#include "exitguard/prob.hpp"

namespace exitguard {

std::string_view to_string(GateMethod m) noexcept {
  switch (m) {
    case GateMethod::kCrc: return "crc";
    case GateMethod::kFixedMsp: return "fixed-msp";
    case GateMethod::kEntropy: return "entropy";
  }
  return "unknown";
}

std::string_view to_string(RiskBudget b) noexcept {
  return b == RiskBudget::kUnion ? "union" : "per-exit";
}

GateMethod parse_gate_method(std::string_view s) {
  if (s == "crc") return GateMethod::kCrc;
  if (s == "fixed-msp" || s == "fixed_msp") return GateMethod::kFixedMsp;
  if (s == "entropy") return GateMethod::kEntropy;
  throw ConfigError("unknown gate method '" + std::string(s) + "'");
}

RiskBudget parse_risk_budget(std::string_view s) {
  if (s == "per-exit" || s == "per_exit") return RiskBudget::kPerExit;
  if (s == "union") return RiskBudget::kUnion;
  throw ConfigError("unknown risk budget '" + std::string(s) + "'");
}

Threshold crc_threshold(std::span<const CalibrationPoint> points, double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in (0, 1]");
  if (points.empty()) throw CalibrationError("no calibration points");
  for (const auto& p : points) {
    if (!(p.score >= 0.0 && p.score < 1.0)) {
      throw InvalidInput("calibration score outside [0,1): " + std::to_string(p.score));
    }
  }

  // Vacuous budget: every bound is <= 1, so accept every possible score.
  if (delta >= 1.0) return Threshold::at(1.0);

  std::vector<CalibrationPoint> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.score < b.score; });

  Threshold best = Threshold::never();
  std::size_t accepted = 0;
  std::size_t errors = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double tau = sorted[i].score;
    // Absorb every tie: acceptance is r <= tau.
    while (i < sorted.size() && sorted[i].score == tau) {
      ++accepted;
      if (sorted[i].error) ++errors;
      ++i;
    }
    const double bound =
        static_cast<double>(errors + 1) / static_cast<double>(accepted + 1);
    if (bound <= delta) best = Threshold::at(tau);
  }
  return best;
}

std::vector<CalibrationPoint> calibration_points(std::span<const ExitRecord> records,
                                                 std::size_t exit) {
  std::vector<CalibrationPoint> points;
  points.reserve(records.size());
  for (const auto& r : records) {
    const ProbVec p = softmax(r.logits.row(exit));
    points.push_back({uncertainty_score(p), argmax_class(p) != r.label});
  }
  return points;
}

ThresholdSchedule calibrate_all_exits(std::span<const ExitRecord> records, double delta,
                                      RiskBudget budget) {
  if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in (0, 1]");
  if (records.empty()) throw CalibrationError("empty calibration set");
  validate_batch(records);

  const std::size_t k = records.front().exits();
  const double per_exit_delta =
      budget == RiskBudget::kUnion ? delta / static_cast<double>(k - 1) : delta;

  ThresholdSchedule schedule;
  schedule.method = GateMethod::kCrc;
  schedule.budget = budget;
  schedule.delta = delta;
  for (std::size_t j = 0; j + 1 < k; ++j) {
    const auto points = calibration_points(records, j);
    schedule.thresholds.push_back(crc_threshold(points, per_exit_delta));
    schedule.cal_sizes.push_back(points.size());
  }
  return schedule;
}

ThresholdSchedule heuristic_schedule(GateMethod kind, double value, std::size_t exits) {
  if (exits < 2) throw ConfigError("a schedule needs at least two exits");
  ThresholdSchedule schedule;
  schedule.method = kind;
  schedule.heuristic_value = value;
  Threshold tau = Threshold::never();
  switch (kind) {
    case GateMethod::kFixedMsp:
      if (!(value > 0.0 && value < 1.0)) throw ConfigError("fixed MSP level must lie in (0, 1)");
      tau = Threshold::at(1.0 - value);
      break;
    case GateMethod::kEntropy:
      if (!(value >= 0.0) || !std::isfinite(value)) {
        throw ConfigError("entropy bound must be non-negative");
      }
      tau = Threshold::at(value);
      break;
    case GateMethod::kCrc:
      throw ConfigError("CRC schedules come from calibration, not a fixed value");
  }
  schedule.thresholds.assign(exits - 1, tau);
  schedule.cal_sizes.assign(exits - 1, 0);
  return schedule;
}

}  // namespace exitguard
