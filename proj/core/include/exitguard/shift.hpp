#pragma once

#include <span>
#include <vector>

#include "exitguard/calib.hpp"
#include "exitguard/metrics.hpp"
#include "exitguard/model.hpp"
#include "exitguard/rng.hpp"
#include "exitguard/types.hpp"

namespace exitguard {

struct ShiftRow {
  double sigma = 0.0;
  double accuracy = 0.0;
  std::optional<double> observed_risk;  // pooled early-exit risk
  double expected_compute = 0.0;
  std::vector<double> exit_rates;
};

/// Adds N(0, sigma^2) noise to every input feature, recomputes per-exit
/// logits with `model` and runs the policy. sigma = 0 leaves inputs untouched.
/// Noise for grid point i comes from stream.derive(i).
std::vector<ShiftRow> shift_evaluate(const MultiExitMlp& model, std::span<const Sample> test,
                                     std::span<const double> sigmas,
                                     const ThresholdSchedule& schedule, const CostModel& cost,
                                     RngStream stream);

}  // namespace exitguard
