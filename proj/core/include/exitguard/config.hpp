#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "exitguard/calib.hpp"
#include "exitguard/losses.hpp"
#include "exitguard/model.hpp"
#include "exitguard/split.hpp"
#include "exitguard/synth.hpp"
#include "exitguard/train.hpp"

namespace exitguard {

/// Everything one pipeline run needs. Loaded from JSON; every key is
/// optional and falls back to the defaults below.
struct RunConfig {
  std::uint64_t seed = 0;
  SplitFractions split = kDefaultSplit;
  BlobSpec data;
  std::vector<std::size_t> widths{64, 64, 64};
  Activation activation = Activation::kTanh;
  LossConfig loss;
  TrainConfig train;

  double delta = 0.05;
  RiskBudget budget = RiskBudget::kPerExit;
  GateMethod method = GateMethod::kCrc;
  std::optional<double> heuristic_value;
  /// Cumulative exit costs; empty means normalized depth j / K.
  std::vector<double> costs;
  std::size_t ece_bins = 15;

  std::vector<double> deltas{0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10};
  std::size_t trials = 500;
  double cal_fraction = 0.5;
  std::vector<double> shift_sigmas{0.0, 0.5, 1.0, 2.0, 4.0};
};

/// Throws ConfigError on any out-of-range field.
void validate(const RunConfig& cfg);

/// Parses a JSON document on top of the defaults. Unknown keys are a
/// ConfigError so typos do not pass silently.
RunConfig run_config_from_json(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace exitguard
