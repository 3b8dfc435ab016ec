#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "exitguard/types.hpp"

namespace exitguard {

/// Gate threshold for one exit, or the NeverExit sentinel meaning the exit
/// accepts nothing. NeverExit orders below every real threshold.
class Threshold {
 public:
  static constexpr Threshold never() noexcept { return Threshold(); }
  static constexpr Threshold at(double value) noexcept { return Threshold(value); }

  constexpr bool is_never() const noexcept { return never_; }
  /// Undefined for NeverExit; check is_never() first.
  constexpr double value() const noexcept { return value_; }

  /// Non-strict acceptance, score <= tau.
  constexpr bool accepts(double score) const noexcept { return !never_ && score <= value_; }

  friend constexpr bool operator==(const Threshold& a, const Threshold& b) noexcept {
    return a.never_ == b.never_ && (a.never_ || a.value_ == b.value_);
  }
  friend constexpr std::partial_ordering operator<=>(const Threshold& a,
                                                     const Threshold& b) noexcept {
    if (a.never_ || b.never_) return b.never_ <=> a.never_;
    return a.value_ <=> b.value_;
  }

 private:
  constexpr Threshold() noexcept = default;
  explicit constexpr Threshold(double v) noexcept : value_(v), never_(false) {}

  double value_ = 0.0;
  bool never_ = true;
};

struct CalibrationPoint {
  double score = 0.0;  // uncertainty r in [0, 1)
  bool error = false;  // misclassified at this exit
};

enum class GateMethod { kCrc, kFixedMsp, kEntropy };
enum class RiskBudget { kPerExit, kUnion };

std::string_view to_string(GateMethod m) noexcept;
std::string_view to_string(RiskBudget b) noexcept;
/// Accepts "crc", "fixed-msp"/"fixed_msp", "entropy". Throws ConfigError.
GateMethod parse_gate_method(std::string_view s);
/// Accepts "per-exit"/"per_exit", "union". Throws ConfigError.
RiskBudget parse_risk_budget(std::string_view s);

/// Per-exit stopping thresholds for the first K-1 exits; the final exit
/// always accepts. For kCrc and kFixedMsp the thresholds apply to the
/// uncertainty score 1 - MSP (accept when score <= tau); for kEntropy they
/// apply to the entropy in nats (accept when H < tau).
struct ThresholdSchedule {
  GateMethod method = GateMethod::kCrc;
  RiskBudget budget = RiskBudget::kPerExit;
  /// Target risk; absent for heuristic gates.
  std::optional<double> delta;
  /// Raw heuristic parameter (MSP level or entropy bound); absent for CRC.
  std::optional<double> heuristic_value;
  std::vector<Threshold> thresholds;
  std::vector<std::size_t> cal_sizes;

  std::size_t exits() const noexcept { return thresholds.size() + 1; }

  friend bool operator==(const ThresholdSchedule&, const ThresholdSchedule&) = default;
};

/// Largest candidate score tau whose conformal bound
///   (E(tau) + 1) / (n_acc(tau) + 1) <= delta,
/// where n_acc counts points with score <= tau and E counts the errors among
/// them. Returns NeverExit when no candidate qualifies. delta = 1 is the
/// vacuous budget and yields tau = 1, which accepts every score.
Threshold crc_threshold(std::span<const CalibrationPoint> points, double delta);

/// Scores and 0-1 errors for one exit (0-based) over a batch of records.
std::vector<CalibrationPoint> calibration_points(std::span<const ExitRecord> records,
                                                 std::size_t exit);

/// Runs crc_threshold for every gated exit. With RiskBudget::kUnion each exit
/// gets delta / (K - 1).
ThresholdSchedule calibrate_all_exits(std::span<const ExitRecord> records, double delta,
                                      RiskBudget budget = RiskBudget::kPerExit);

/// Fixed-MSP (accept when MSP >= value) or entropy (accept when H < value)
/// gate at every exit.
ThresholdSchedule heuristic_schedule(GateMethod kind, double value, std::size_t exits);

}  // namespace exitguard
