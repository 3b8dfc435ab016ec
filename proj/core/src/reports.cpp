#include "exitguard/reports.hpp"

#include <sstream>

#include "exitguard/error.hpp"
#include "exitguard/io.hpp"

namespace exitguard {

namespace fs = std::filesystem;

namespace {

std::string cell(const std::optional<double>& v) { return v ? format_shortest(*v) : ""; }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void emit(const fs::path& out_dir, const char* name, const std::string& content) {
  ensure_dir(out_dir);
  write_file_atomic(out_dir / name, content);
}

}  // namespace

std::string policy_report_csv(const PolicyReport& r, std::string_view policy) {
  std::ostringstream out;
  out << "policy,accuracy,expected_depth,observed_risk,samples,exit,exit_rate,exit_count,"
         "selective_risk,head_accuracy,head_nll,head_ece\n";
  for (std::size_t j = 0; j < r.exit_rates.size(); ++j) {
    out << policy << ',' << format_shortest(r.accuracy) << ','
        << format_shortest(r.expected_compute) << ',' << cell(r.early_exit_risk) << ','
        << r.sample_count << ',' << (j + 1) << ',' << format_shortest(r.exit_rates[j]) << ','
        << r.exit_counts[j] << ',' << cell(r.selective_risk[j]) << ','
        << format_shortest(r.head_accuracy[j]) << ',' << format_shortest(r.head_nll[j]) << ','
        << format_shortest(r.head_ece[j]) << '\n';
  }
  return out.str();
}

std::string reliability_bins_csv(const PolicyReport& r) {
  std::ostringstream out;
  out << "exit,bin,lower,upper,count,mean_confidence,accuracy\n";
  for (std::size_t j = 0; j < r.reliability.size(); ++j) {
    for (std::size_t b = 0; b < r.reliability[j].size(); ++b) {
      const auto& bin = r.reliability[j][b];
      out << (j + 1) << ',' << (b + 1) << ',' << format_shortest(bin.lower) << ','
          << format_shortest(bin.upper) << ',' << bin.count << ','
          << (bin.count ? format_shortest(bin.mean_confidence) : "") << ','
          << (bin.count ? format_shortest(bin.accuracy) : "") << '\n';
    }
  }
  return out.str();
}

std::string risk_curve_csv(const RiskCurve& curve) {
  std::ostringstream out;
  out << "delta,exit,exit_rate,observed_risk,expected_compute,overall_risk\n";
  for (const auto& row : curve.rows) {
    for (std::size_t j = 0; j < row.exit_rates.size(); ++j) {
      out << format_shortest(row.delta) << ',' << (j + 1) << ','
          << format_shortest(row.exit_rates[j]) << ',' << cell(row.exit_risk[j]) << ','
          << format_shortest(row.expected_compute) << ',' << cell(row.overall_risk) << '\n';
    }
  }
  return out.str();
}

double validity_bound(double delta, std::size_t n_cal, double std_error) {
  return delta + 1.0 / static_cast<double>(n_cal + 1) + 3.0 * std_error;
}

std::string validity_csv(const std::vector<ValidityResult>& results) {
  std::ostringstream out;
  out << "delta,budget,exit,mean_risk,std_error,trials_used,trials_skipped,n_cal,n_test,bound\n";
  auto row = [&](const ValidityResult& v, const std::string& exit, const RiskEstimate& e) {
    const bool used = e.trials_used > 0;
    out << format_shortest(v.delta) << ',' << to_string(v.budget) << ',' << exit << ','
        << (used ? format_shortest(e.mean) : "") << ','
        << (used ? format_shortest(e.std_error) : "") << ',' << e.trials_used << ','
        << e.trials_skipped << ',' << v.n_cal << ',' << v.n_test << ','
        << (used ? format_shortest(validity_bound(v.delta, v.n_cal, e.std_error)) : "") << '\n';
  };
  for (const auto& v : results) {
    for (std::size_t j = 0; j < v.exits.size(); ++j) row(v, std::to_string(j + 1), v.exits[j]);
    row(v, "policy", v.policy);
  }
  return out.str();
}

std::string shift_csv(const std::vector<ShiftRow>& rows) {
  std::ostringstream out;
  out << "sigma,accuracy,observed_risk,expected_compute";
  const std::size_t k = rows.empty() ? 0 : rows.front().exit_rates.size();
  for (std::size_t j = 0; j < k; ++j) out << ",exit_rate_" << (j + 1);
  out << '\n';
  for (const auto& r : rows) {
    out << format_shortest(r.sigma) << ',' << format_shortest(r.accuracy) << ','
        << cell(r.observed_risk) << ',' << format_shortest(r.expected_compute);
    for (double pi : r.exit_rates) out << ',' << format_shortest(pi);
    out << '\n';
  }
  return out.str();
}

void emit_policy_report(const PolicyReport& report, std::string_view policy,
                        const fs::path& out_dir) {
  emit(out_dir, "policy_report.csv", policy_report_csv(report, policy));
  emit(out_dir, "reliability_bins.csv", reliability_bins_csv(report));
}

void emit_risk_curve(const RiskCurve& curve, const fs::path& out_dir) {
  emit(out_dir, "risk_curve.csv", risk_curve_csv(curve));
}

void emit_validity(const std::vector<ValidityResult>& results, const fs::path& out_dir) {
  emit(out_dir, "validity.csv", validity_csv(results));
}

void emit_schedule(const ThresholdSchedule& schedule, const fs::path& out_dir) {
  emit(out_dir, "thresholds.txt", schedule_to_text(schedule));
}

void emit_shift(const std::vector<ShiftRow>& rows, const fs::path& out_dir) {
  emit(out_dir, "shift.csv", shift_csv(rows));
}

}  // namespace exitguard
