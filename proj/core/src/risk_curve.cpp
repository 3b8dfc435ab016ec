#include "exitguard/risk_curve.hpp"

#include <vector>

#include "exitguard/error.hpp"
#include "exitguard/policy.hpp"
#include "exitguard/split.hpp"

namespace exitguard {

void validate_delta_grid(std::span<const double> deltas) {
  if (deltas.empty()) throw ConfigError("delta grid is empty");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0 && deltas[i] < 1.0)) throw ConfigError("deltas must lie in (0, 1)");
    if (i > 0 && !(deltas[i] > deltas[i - 1])) {
      throw ConfigError("delta grid must be strictly increasing");
    }
  }
}

RiskCurve risk_curve(std::span<const ExitRecord> pool, std::span<const double> deltas,
                     const RiskCurveSpec& spec, RngStream stream, const CostModel& cost) {
  validate_delta_grid(deltas);
  std::vector<ExitRecord> records(pool.begin(), pool.end());
  auto [cal, test] = split_two(records, spec.cal_fraction, stream);
  if (cal.empty() || test.empty()) throw InvalidInput("risk curve split leaves an empty side");

  RiskCurve curve;
  for (double delta : deltas) {
    const auto schedule = calibrate_all_exits(cal, delta, spec.budget);
    const auto report = evaluate_policy(test, schedule, cost);
    RiskCurveRow row;
    row.delta = delta;
    row.thresholds = schedule.thresholds;
    row.exit_risk = report.selective_risk;
    row.overall_risk = report.early_exit_risk;
    row.exit_rates = report.exit_rates;
    row.expected_compute = report.expected_compute;
    row.accuracy = report.accuracy;
    curve.rows.push_back(std::move(row));
  }
  return curve;
}

}  // namespace exitguard
