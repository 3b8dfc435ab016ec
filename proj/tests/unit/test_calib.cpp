#include <gtest/gtest.h>

#include <cmath>

#include "exitguard/calib.hpp"
#include "exitguard/error.hpp"
#include "exitguard/metrics.hpp"
#include "exitguard/risk_curve.hpp"
#include "exitguard/rng.hpp"
#include "oracles.hpp"

namespace exitguard {
namespace {

using testing::brute_force_crc;
using testing::logits_with_confidence;
using testing::make_record;

std::vector<CalibrationPoint> points(std::vector<double> r, std::vector<int> e) {
  std::vector<CalibrationPoint> out;
  for (std::size_t i = 0; i < r.size(); ++i) out.push_back({r[i], e[i] != 0});
  return out;
}

std::vector<CalibrationPoint> random_points(Rng& rng, std::size_t n) {
  const double error_rate = rng.uniform();
  // Coarse grid so that ties between scores are common.
  const bool coarse = rng.below(2) == 0;
  std::vector<CalibrationPoint> pts(n);
  for (auto& p : pts) {
    p.score = coarse ? static_cast<double>(rng.below(10)) / 10.0 : rng.uniform();
    p.error = rng.uniform() < error_rate;
  }
  return pts;
}

TEST(CrcThreshold, WorkedExamples) {
  const auto pts = points({0.05, 0.1, 0.2, 0.4}, {0, 0, 1, 0});
  const auto accept_all = crc_threshold(pts, 0.5);
  ASSERT_FALSE(accept_all.is_never());
  EXPECT_EQ(accept_all.value(), 0.4);
  EXPECT_TRUE(crc_threshold(pts, 0.2).is_never());

  const auto clean = points({0.3, 0.01, 0.2, 0.15}, {0, 0, 0, 0});
  const auto t = crc_threshold(clean, 0.5);
  ASSERT_FALSE(t.is_never());
  EXPECT_EQ(t.value(), 0.3);
}

TEST(CrcThreshold, Errors) {
  EXPECT_THROW(crc_threshold(std::vector<CalibrationPoint>{}, 0.1), CalibrationError);
  const auto pts = points({0.1}, {0});
  EXPECT_THROW(crc_threshold(pts, 0.0), ConfigError);
  EXPECT_THROW(crc_threshold(pts, 1.5), ConfigError);
  EXPECT_THROW(crc_threshold(points({1.0}, {0}), 0.5), InvalidInput);
  EXPECT_THROW(crc_threshold(points({std::nan("")}, {0}), 0.5), InvalidInput);
}

TEST(CrcThreshold, MatchesBruteForce) {
  Rng rng({100, 0});
  for (int trial = 0; trial < 1000; ++trial) {
    const auto pts = random_points(rng, 1 + rng.below(50));
    const double delta = 0.01 + 0.98 * rng.uniform();
    const auto expected = brute_force_crc(pts, delta);
    const auto got = crc_threshold(pts, delta);
    ASSERT_EQ(got.is_never(), !expected.has_value()) << "trial " << trial;
    if (expected) ASSERT_EQ(got.value(), *expected) << "trial " << trial;
  }
}

TEST(CrcThreshold, MonotoneInDelta) {
  Rng rng({101, 0});
  for (int trial = 0; trial < 300; ++trial) {
    const auto pts = random_points(rng, 1 + rng.below(60));
    double a = rng.uniform(), b = rng.uniform();
    if (a > b) std::swap(a, b);
    if (a == 0.0) continue;
    EXPECT_TRUE(crc_threshold(pts, a) <= crc_threshold(pts, b));
  }
}

TEST(CrcThreshold, AddingLowErrorNeverRaisesThreshold) {
  Rng rng({102, 0});
  for (int trial = 0; trial < 300; ++trial) {
    auto pts = random_points(rng, 1 + rng.below(40));
    const double delta = 0.05 + 0.5 * rng.uniform();
    const auto before = crc_threshold(pts, delta);
    if (before.is_never()) continue;
    pts.push_back({before.value() * rng.uniform(), true});
    EXPECT_TRUE(crc_threshold(pts, delta) <= before);
  }
}

TEST(Threshold, Ordering) {
  EXPECT_TRUE(Threshold::never() < Threshold::at(0.0));
  EXPECT_TRUE(Threshold::at(0.1) < Threshold::at(0.2));
  EXPECT_TRUE(Threshold::never() == Threshold::never());
  EXPECT_FALSE(Threshold::never().accepts(0.0));
  EXPECT_TRUE(Threshold::at(0.2).accepts(0.2));
  EXPECT_FALSE(Threshold::at(0.2).accepts(0.2000001));
}

std::vector<ExitRecord> records_with_confidences(const std::vector<double>& conf,
                                                 const std::vector<bool>& correct,
                                                 std::size_t exits) {
  std::vector<ExitRecord> out;
  for (std::size_t i = 0; i < conf.size(); ++i) {
    const std::size_t label = i % 3;
    const std::size_t top = correct[i] ? label : (label + 1) % 3;
    std::vector<std::vector<double>> rows(exits, logits_with_confidence(3, top, conf[i]));
    rows.back() = logits_with_confidence(3, label, 0.99);
    out.push_back(make_record("r" + std::to_string(i), label, rows));
  }
  return out;
}

TEST(CalibrateAllExits, TwoExitsGiveOneThreshold) {
  const auto recs = records_with_confidences({0.9, 0.8, 0.7}, {true, true, false}, 2);
  const auto s = calibrate_all_exits(recs, 0.5);
  EXPECT_EQ(s.thresholds.size(), 1u);
  EXPECT_EQ(s.exits(), 2u);
  EXPECT_EQ(s.cal_sizes, std::vector<std::size_t>{3});
  EXPECT_EQ(s.delta, 0.5);
}

TEST(CalibrateAllExits, UnionBudgetSplitsDelta) {
  Rng rng({103, 0});
  std::vector<double> conf;
  std::vector<bool> correct;
  for (int i = 0; i < 200; ++i) {
    conf.push_back(0.34 + 0.65 * rng.uniform());
    correct.push_back(rng.uniform() < conf.back());
  }
  const auto recs = records_with_confidences(conf, correct, 3);
  const auto u = calibrate_all_exits(recs, 0.1, RiskBudget::kUnion);
  const auto p = calibrate_all_exits(recs, 0.05, RiskBudget::kPerExit);
  ASSERT_EQ(u.thresholds.size(), 2u);
  EXPECT_EQ(u.thresholds, p.thresholds);
  EXPECT_EQ(u.budget, RiskBudget::kUnion);
  EXPECT_EQ(u.delta, 0.1);
}

TEST(CalibrateAllExits, AlwaysWrongHeadNeverExits) {
  std::vector<double> conf(50, 0.95);
  std::vector<bool> correct(50, false);
  const auto recs = records_with_confidences(conf, correct, 3);
  for (double delta : {0.01, 0.1, 0.3, 0.49}) {
    EXPECT_TRUE(calibrate_all_exits(recs, delta).thresholds[0].is_never());
  }
}

TEST(CalibrateAllExits, Errors) {
  EXPECT_THROW(calibrate_all_exits(std::vector<ExitRecord>{}, 0.1), CalibrationError);
  auto recs = records_with_confidences({0.9, 0.8}, {true, true}, 3);
  recs.push_back(make_record("x", 0, {{0, 1}, {1, 0}}));
  EXPECT_THROW(calibrate_all_exits(recs, 0.1), InvalidInput);
}

TEST(CalibrateAllExits, DeterministicAndMonotone) {
  Rng rng({104, 0});
  std::vector<double> conf;
  std::vector<bool> correct;
  for (int i = 0; i < 300; ++i) {
    conf.push_back(0.34 + 0.65 * rng.uniform());
    correct.push_back(rng.uniform() < conf.back());
  }
  const auto recs = records_with_confidences(conf, correct, 4);
  EXPECT_EQ(calibrate_all_exits(recs, 0.1), calibrate_all_exits(recs, 0.1));
  auto prev = calibrate_all_exits(recs, 0.01);
  for (double d = 0.02; d < 0.5; d += 0.01) {
    const auto cur = calibrate_all_exits(recs, d);
    for (std::size_t j = 0; j < cur.thresholds.size(); ++j) {
      EXPECT_TRUE(prev.thresholds[j] <= cur.thresholds[j]);
    }
    prev = cur;
  }
}

TEST(HeuristicSchedule, Examples) {
  const auto fixed = heuristic_schedule(GateMethod::kFixedMsp, 0.9, 3);
  ASSERT_EQ(fixed.thresholds.size(), 2u);
  for (const auto& t : fixed.thresholds) EXPECT_NEAR(t.value(), 0.1, 1e-15);
  EXPECT_FALSE(fixed.delta.has_value());
  EXPECT_EQ(fixed.heuristic_value, 0.9);

  const auto ent = heuristic_schedule(GateMethod::kEntropy, 0.5, 3);
  for (const auto& t : ent.thresholds) EXPECT_EQ(t.value(), 0.5);
  EXPECT_EQ(ent.method, GateMethod::kEntropy);

  EXPECT_THROW(heuristic_schedule(GateMethod::kFixedMsp, 1.0, 3), ConfigError);
  EXPECT_THROW(heuristic_schedule(GateMethod::kFixedMsp, 0.0, 3), ConfigError);
  EXPECT_THROW(heuristic_schedule(GateMethod::kEntropy, -0.1, 3), ConfigError);
  EXPECT_THROW(heuristic_schedule(GateMethod::kCrc, 0.5, 3), ConfigError);
}

TEST(GateParsing, RoundTrips) {
  for (auto m : {GateMethod::kCrc, GateMethod::kFixedMsp, GateMethod::kEntropy}) {
    EXPECT_EQ(parse_gate_method(to_string(m)), m);
  }
  for (auto b : {RiskBudget::kPerExit, RiskBudget::kUnion}) {
    EXPECT_EQ(parse_risk_budget(to_string(b)), b);
  }
  EXPECT_EQ(parse_gate_method("fixed_msp"), GateMethod::kFixedMsp);
  EXPECT_THROW(parse_gate_method("softmax"), ConfigError);
  EXPECT_THROW(parse_risk_budget("bonferroni"), ConfigError);
}

TEST(RiskCurve, OneRowPerDeltaAndMonotoneThresholds) {
  Rng rng({105, 0});
  std::vector<double> conf;
  std::vector<bool> correct;
  for (int i = 0; i < 400; ++i) {
    conf.push_back(0.34 + 0.65 * rng.uniform());
    correct.push_back(rng.uniform() < conf.back());
  }
  const auto recs = records_with_confidences(conf, correct, 3);
  const std::vector<double> deltas{0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10};
  const auto curve = risk_curve(recs, deltas, {}, {1, 5}, CostModel::normalized_depth(3));
  ASSERT_EQ(curve.rows.size(), deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    EXPECT_EQ(curve.rows[i].delta, deltas[i]);
    double total = 0.0;
    for (double r : curve.rows[i].exit_rates) total += r;
    EXPECT_NEAR(total, 1.0, 1e-12);
    if (i == 0) continue;
    for (std::size_t j = 0; j < 2; ++j) {
      EXPECT_TRUE(curve.rows[i - 1].thresholds[j] <= curve.rows[i].thresholds[j]);
    }
  }
}

TEST(RiskCurve, GridValidation) {
  EXPECT_THROW(validate_delta_grid(std::vector<double>{}), ConfigError);
  EXPECT_THROW(validate_delta_grid(std::vector<double>{0.1, 0.05}), ConfigError);
  EXPECT_THROW(validate_delta_grid(std::vector<double>{0.1, 0.1}), ConfigError);
  EXPECT_THROW(validate_delta_grid(std::vector<double>{0.0, 0.1}), ConfigError);
  EXPECT_THROW(validate_delta_grid(std::vector<double>{0.5, 1.0}), ConfigError);
  EXPECT_NO_THROW(validate_delta_grid(std::vector<double>{0.01, 0.5}));
}

}  // namespace
}  // namespace exitguard
