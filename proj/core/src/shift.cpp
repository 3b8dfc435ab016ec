#include "exitguard/shift.hpp"

#include <cmath>

#include "exitguard/error.hpp"
#include "exitguard/policy.hpp"
#include "exitguard/train.hpp"

namespace exitguard {

std::vector<ShiftRow> shift_evaluate(const MultiExitMlp& model, std::span<const Sample> test,
                                     std::span<const double> sigmas,
                                     const ThresholdSchedule& schedule, const CostModel& cost,
                                     RngStream stream) {
  if (test.empty()) throw InvalidInput("shift evaluation needs test samples");
  std::vector<ShiftRow> rows;
  for (std::size_t g = 0; g < sigmas.size(); ++g) {
    const double sigma = sigmas[g];
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("noise sigma must be >= 0");
    std::vector<Sample> noisy(test.begin(), test.end());
    if (sigma > 0.0) {
      Rng rng(stream.derive(g));
      for (auto& s : noisy) {
        for (double& v : s.features) v += sigma * rng.normal();
      }
    }
    const auto records = export_logits(model, noisy);
    const auto report = evaluate_policy(records, schedule, cost);
    rows.push_back(ShiftRow{sigma, report.accuracy, report.early_exit_risk,
                            report.expected_compute, report.exit_rates});
  }
  return rows;
}

}  // namespace exitguard
