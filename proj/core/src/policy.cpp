#include "exitguard/policy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "exitguard/error.hpp"
#include "exitguard/prob.hpp"
#include "exitguard/split.hpp"

namespace exitguard {

ExitDecision choose_exit(const ExitRecord& record, const ThresholdSchedule& schedule) {
  const std::size_t k = record.exits();
  if (schedule.exits() != k) {
    throw InvalidInput("record '" + record.id + "' has " + std::to_string(k) +
                       " exits, schedule expects " + std::to_string(schedule.exits()));
  }
  ExitDecision decision;
  decision.scores.resize(k);
  std::vector<double> p(record.classes());
  std::vector<std::vector<double>> probs(k);
  for (std::size_t j = 0; j < k; ++j) {
    softmax_into(record.logits.row(j), p);
    decision.scores[j] = 1.0 - msp(p);
    probs[j] = p;
  }

  std::size_t chosen = k - 1;
  for (std::size_t j = 0; j + 1 < k; ++j) {
    const Threshold& tau = schedule.thresholds[j];
    bool accept = false;
    if (schedule.method == GateMethod::kEntropy) {
      accept = !tau.is_never() && entropy(probs[j]) < tau.value();
    } else {
      accept = tau.accepts(decision.scores[j]);
    }
    if (accept) {
      chosen = j;
      break;
    }
  }
  decision.exit_index = chosen + 1;
  decision.predicted = argmax_class(probs[chosen]);
  decision.confidence = msp(probs[chosen]);
  return decision;
}

PolicyReport evaluate_policy(std::span<const ExitRecord> test, const ThresholdSchedule& schedule,
                             const CostModel& cost, const EceConfig& ece_cfg) {
  if (test.empty()) throw InvalidInput("cannot evaluate a policy on an empty test set");
  validate_batch(test);
  const std::size_t k = test.front().exits();
  if (cost.exits() != k) throw InvalidInput("cost model length does not match exit count");

  PolicyReport report;
  report.sample_count = test.size();
  report.exit_counts.assign(k, 0);
  std::vector<std::size_t> exit_errors(k, 0);
  std::vector<std::size_t> head_correct(k, 0);
  std::vector<double> head_nll_sum(k, 0.0);
  std::vector<EceAccumulator> head_ece(k, EceAccumulator(ece_cfg));
  std::size_t correct = 0;

  std::vector<double> p(test.front().classes());
  for (const auto& record : test) {
    const auto decision = choose_exit(record, schedule);
    const std::size_t j = decision.exit_index - 1;
    ++report.exit_counts[j];
    if (decision.predicted == record.label) {
      ++correct;
    } else {
      ++exit_errors[j];
    }
    for (std::size_t h = 0; h < k; ++h) {
      softmax_into(record.logits.row(h), p);
      const bool hit = argmax_class(p) == record.label;
      if (hit) ++head_correct[h];
      head_nll_sum[h] -= safe_log(p[record.label]);
      head_ece[h].add(msp(p), hit);
    }
  }

  const double n = static_cast<double>(test.size());
  report.accuracy = static_cast<double>(correct) / n;
  std::size_t early_errors = 0;
  for (std::size_t j = 0; j < k; ++j) {
    report.exit_rates.push_back(static_cast<double>(report.exit_counts[j]) / n);
    report.selective_risk.push_back(selective_risk(exit_errors[j], report.exit_counts[j]));
    report.head_accuracy.push_back(static_cast<double>(head_correct[j]) / n);
    report.head_nll.push_back(head_nll_sum[j] / n);
    report.head_ece.push_back(head_ece[j].value());
    report.reliability.push_back(head_ece[j].bins());
    if (j + 1 < k) {
      report.early_exit_count += report.exit_counts[j];
      early_errors += exit_errors[j];
    }
  }
  report.early_exit_risk = selective_risk(early_errors, report.early_exit_count);
  report.expected_compute = expected_compute(report.exit_rates, cost);
  return report;
}

namespace {

struct TrialOutcome {
  std::vector<std::optional<double>> exit_risk;
  std::optional<double> policy_risk;
};

RiskEstimate summarize(const std::vector<std::optional<double>>& values) {
  RiskEstimate est;
  double sum = 0.0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++est.trials_used;
    } else {
      ++est.trials_skipped;
    }
  }
  if (est.trials_used == 0) {
    est.mean = std::nan("");
    est.std_error = std::nan("");
    return est;
  }
  est.mean = sum / static_cast<double>(est.trials_used);
  if (est.trials_used > 1) {
    double ss = 0.0;
    for (const auto& v : values) {
      if (v) ss += (*v - est.mean) * (*v - est.mean);
    }
    const double used = static_cast<double>(est.trials_used);
    est.std_error = std::sqrt(ss / (used - 1.0)) / std::sqrt(used);
  }
  return est;
}

}  // namespace

ValidityResult mc_validity(std::span<const ExitRecord> pool, double delta, std::size_t trials,
                           double cal_fraction, RngStream stream, RiskBudget budget) {
  if (trials == 0) throw ConfigError("need at least one Monte Carlo trial");
  if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in (0, 1]");
  if (pool.size() < 2) throw InvalidInput("validity pool needs at least two records");
  validate_batch(pool);
  const auto sizes = split_sizes(pool.size(), {cal_fraction, 0.0, 0.0, 1.0 - cal_fraction});
  const std::size_t n_cal = sizes[0];
  const std::size_t n_test = sizes[3];
  if (n_cal == 0 || n_test == 0) throw InvalidInput("cal/test split leaves an empty side");

  const std::size_t k = pool.front().exits();
  const double exit_delta =
      budget == RiskBudget::kUnion ? delta / static_cast<double>(k - 1) : delta;

  // Scores and errors do not depend on the split; compute them once.
  std::vector<std::vector<CalibrationPoint>> points(k - 1);
  for (std::size_t j = 0; j + 1 < k; ++j) points[j] = calibration_points(pool, j);

  std::vector<std::size_t> base_order(pool.size());
  std::iota(base_order.begin(), base_order.end(), std::size_t{0});
  std::stable_sort(base_order.begin(), base_order.end(),
                   [&](std::size_t a, std::size_t b) { return pool[a].id < pool[b].id; });

  auto run_trial = [&](std::size_t t) {
    std::vector<std::size_t> order = base_order;
    Rng rng(stream.derive(t));
    rng.shuffle(std::span<std::size_t>(order));
    std::span<const std::size_t> cal_idx(order.data(), n_cal);
    std::span<const std::size_t> test_idx(order.data() + n_cal, n_test);

    TrialOutcome out;
    std::vector<Threshold> taus;
    std::vector<CalibrationPoint> cal_points(n_cal);
    for (std::size_t j = 0; j + 1 < k; ++j) {
      for (std::size_t i = 0; i < n_cal; ++i) cal_points[i] = points[j][cal_idx[i]];
      const Threshold tau = crc_threshold(cal_points, exit_delta);
      taus.push_back(tau);
      std::size_t accepted = 0, errors = 0;
      for (std::size_t idx : test_idx) {
        if (tau.accepts(points[j][idx].score)) {
          ++accepted;
          if (points[j][idx].error) ++errors;
        }
      }
      out.exit_risk.push_back(selective_risk(errors, accepted));
    }
    std::size_t early = 0, early_errors = 0;
    for (std::size_t idx : test_idx) {
      for (std::size_t j = 0; j + 1 < k; ++j) {
        if (taus[j].accepts(points[j][idx].score)) {
          ++early;
          if (points[j][idx].error) ++early_errors;
          break;
        }
      }
    }
    out.policy_risk = selective_risk(early_errors, early);
    return out;
  };

  // Trials are independent; results land in trial order, so the reduction
  // below is identical for any thread count.
  std::vector<TrialOutcome> outcomes(trials);
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(trials, std::thread::hardware_concurrency()));
  if (workers == 1) {
    for (std::size_t t = 0; t < trials; ++t) outcomes[t] = run_trial(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool_threads;
    for (std::size_t w = 0; w < workers; ++w) {
      pool_threads.emplace_back([&] {
        for (std::size_t t = next++; t < trials; t = next++) outcomes[t] = run_trial(t);
      });
    }
  }

  ValidityResult result;
  result.delta = delta;
  result.budget = budget;
  result.trials = trials;
  result.n_cal = n_cal;
  result.n_test = n_test;
  for (std::size_t j = 0; j + 1 < k; ++j) {
    std::vector<std::optional<double>> values;
    values.reserve(trials);
    for (const auto& o : outcomes) values.push_back(o.exit_risk[j]);
    result.exits.push_back(summarize(values));
  }
  std::vector<std::optional<double>> policy_values;
  for (const auto& o : outcomes) policy_values.push_back(o.policy_risk);
  result.policy = summarize(policy_values);
  return result;
}

}  // namespace exitguard
