#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "exitguard/calib.hpp"
#include "exitguard/policy.hpp"
#include "exitguard/risk_curve.hpp"
#include "exitguard/shift.hpp"

namespace exitguard {

// CSV renderers. Column order is fixed; undefined risks are empty cells.

/// policy,accuracy,expected_depth,observed_risk,samples,exit,exit_rate,
/// exit_count,selective_risk,head_accuracy,head_nll,head_ece
std::string policy_report_csv(const PolicyReport& report, std::string_view policy);
/// exit,bin,lower,upper,count,mean_confidence,accuracy
std::string reliability_bins_csv(const PolicyReport& report);
/// delta,exit,exit_rate,observed_risk,expected_compute,overall_risk
std::string risk_curve_csv(const RiskCurve& curve);
/// delta,budget,exit,mean_risk,std_error,trials_used,trials_skipped,n_cal,
/// n_test,bound. Exit "policy" rows carry the pooled early-exit risk.
std::string validity_csv(const std::vector<ValidityResult>& results);
/// sigma,accuracy,observed_risk,expected_compute,exit_rate_1..exit_rate_K
std::string shift_csv(const std::vector<ShiftRow>& rows);

/// Validity bound delta + 1/(n_cal+1) + 3 * SE used by the acceptance checks.
double validity_bound(double delta, std::size_t n_cal, double std_error);

// File emitters. Each writes atomically into out_dir, creating it if needed.
void emit_policy_report(const PolicyReport& report, std::string_view policy,
                        const std::filesystem::path& out_dir);
void emit_risk_curve(const RiskCurve& curve, const std::filesystem::path& out_dir);
void emit_validity(const std::vector<ValidityResult>& results,
                   const std::filesystem::path& out_dir);
void emit_schedule(const ThresholdSchedule& schedule, const std::filesystem::path& out_dir);
void emit_shift(const std::vector<ShiftRow>& rows, const std::filesystem::path& out_dir);

}  // namespace exitguard
