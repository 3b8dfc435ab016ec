#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "exitguard/config.hpp"
#include "exitguard/error.hpp"
#include "exitguard/io.hpp"
#include "exitguard/reports.hpp"
#include "exitguard/rng.hpp"
#include "exitguard/synth.hpp"
#include "exitguard/train.hpp"
#include "oracles.hpp"

namespace exitguard {
namespace {

namespace fs = std::filesystem;
using testing::make_record;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           (std::string("exitguard_io_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

std::vector<ExitRecord> random_records(Rng& rng, std::size_t n, std::size_t k, std::size_t c,
                                       double scale) {
  std::vector<ExitRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::vector<double>> rows(k, std::vector<double>(c));
    for (auto& row : rows) {
      for (double& v : row) v = scale * (2.0 * rng.uniform() - 1.0);
    }
    out.push_back(make_record("id-" + std::to_string(i), rng.below(c), rows));
  }
  return out;
}

TEST(Doubles, FormatRoundTripsBitExactly) {
  Rng rng({400, 0});
  for (int i = 0; i < 2000; ++i) {
    const double v = std::ldexp(rng.uniform() - 0.5, static_cast<int>(rng.below(200)) - 100);
    EXPECT_EQ(parse_double(format_double(v)), v);
    EXPECT_EQ(parse_double(format_shortest(v)), v);
  }
  EXPECT_EQ(format_shortest(0.75), "0.75");
  EXPECT_THROW(parse_double("1.0x"), ParseError);
  EXPECT_THROW(parse_double(""), ParseError);
  EXPECT_THROW(parse_double(" 1"), ParseError);
}

TEST(Logits, StreamRoundTripPreservesOrderAndBits) {
  Rng rng({401, 0});
  for (int trial = 0; trial < 20; ++trial) {
    const auto records = random_records(rng, 1 + rng.below(30), 2 + rng.below(3),
                                        2 + rng.below(5), trial % 2 ? 1e4 : 5.0);
    std::stringstream buf;
    write_logits(buf, records);
    EXPECT_EQ(read_logits(buf), records);
  }
}

TEST_F(TempDir, LogitsFileRoundTrip) {
  Rng rng({402, 0});
  const auto records = random_records(rng, 25, 3, 4, 10.0);
  const auto path = dir_ / "logits.jsonl";
  write_logits(records, path);
  EXPECT_EQ(read_logits(path), records);
  EXPECT_FALSE(fs::exists(dir_ / "logits.jsonl.tmp"));
}

TEST_F(TempDir, ExportedLogitsRoundTrip) {
  const auto samples = synth_blobs({60, 3, 4, 2.0}, {1, 1});
  const auto model = MultiExitMlp::initialized({4, {8, 8, 8}, 3}, {1, 3});
  const auto records = export_logits(model, samples);
  write_logits(records, dir_ / "x.jsonl");
  EXPECT_EQ(read_logits(dir_ / "x.jsonl"), records);
}

TEST(Logits, RangeLimits) {
  std::stringstream ok;
  write_logits(ok, {make_record("a", 0, {{1e4, -1e4}, {0, 0}})});
  EXPECT_NO_THROW(read_logits(ok));

  std::stringstream out;
  EXPECT_THROW(write_logits(out, {make_record("a", 0, {{1e300, 0}, {0, 0}})}), RangeError);

  std::istringstream in(
      "{\"format\":\"exitguard-logits\",\"version\":1,\"exits\":2,\"classes\":2}\n"
      "{\"id\":\"a\",\"label\":0,\"logits\":[[1e300,0],[0,0]]}\n");
  EXPECT_THROW(read_logits(in), RangeError);
}

std::string header(int k, int c) {
  return "{\"format\":\"exitguard-logits\",\"version\":1,\"exits\":" + std::to_string(k) +
         ",\"classes\":" + std::to_string(c) + "}\n";
}

TEST(Logits, TruncatedLineNamesLine) {
  std::istringstream in(header(2, 2) + "{\"id\":\"a\",\"label\":0,\"logits\":[[1,0],[0,1]]}\n" +
                        "{\"id\":\"b\",\"label\":0,\"logits\":[[1,0],[0\n");
  try {
    read_logits(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Logits, ShapeMismatchIsFormatError) {
  std::istringstream fewer(header(3, 2) + "{\"id\":\"a\",\"label\":0,\"logits\":[[1,0],[0,1]]}\n");
  EXPECT_THROW(read_logits(fewer), FormatError);
  std::istringstream classes(header(2, 3) +
                             "{\"id\":\"a\",\"label\":0,\"logits\":[[1,0],[0,1]]}\n");
  EXPECT_THROW(read_logits(classes), FormatError);
  std::istringstream bad_format("{\"format\":\"other\",\"version\":1,\"exits\":2,\"classes\":2}\n");
  EXPECT_THROW(read_logits(bad_format), ParseError);
  std::istringstream bad_version(
      "{\"format\":\"exitguard-logits\",\"version\":9,\"exits\":2,\"classes\":2}\n");
  EXPECT_THROW(read_logits(bad_version), FormatError);
  std::istringstream bad_label(header(2, 2) +
                               "{\"id\":\"a\",\"label\":5,\"logits\":[[1,0],[0,1]]}\n");
  EXPECT_THROW(read_logits(bad_label), FormatError);
}

TEST(Logits, MissingFileIsIoError) {
  EXPECT_THROW(read_logits(fs::path("/nonexistent/exitguard/x.jsonl")), IoError);
}

TEST(Schedule, TextRoundTrip) {
  ThresholdSchedule s;
  s.method = GateMethod::kCrc;
  s.budget = RiskBudget::kUnion;
  s.delta = 0.05;
  s.thresholds = {Threshold::at(0.123456789012345678), Threshold::never(), Threshold::at(0.0)};
  s.cal_sizes = {450, 450, 450};
  const auto text = schedule_to_text(s);
  EXPECT_NE(text.find("never"), std::string::npos);
  EXPECT_EQ(schedule_from_text(text), s);

  const auto h = heuristic_schedule(GateMethod::kEntropy, 0.5, 3);
  EXPECT_EQ(schedule_from_text(schedule_to_text(h)), h);
  EXPECT_THROW(schedule_from_text("format exitguard-schedule\nversion 2\n"), FormatError);
  EXPECT_THROW(schedule_from_text("garbage"), Error);
}

TEST(Model, TextRoundTrip) {
  const auto model = MultiExitMlp::initialized({3, {5, 4}, 2}, {9, 3}, Activation::kRelu);
  EXPECT_EQ(model_from_text(model_to_text(model)), model);
  auto text = model_to_text(model);
  text.resize(text.size() / 2);
  EXPECT_THROW(model_from_text(text), Error);
}

TEST(Samples, CsvRoundTrip) {
  const auto samples = synth_blobs({30, 3, 5, 2.0}, {4, 1});
  EXPECT_EQ(samples_from_csv(samples_to_csv(samples)), samples);
  EXPECT_THROW(samples_from_csv("id,label,x0\na,1,nope\n"), ParseError);
}

TEST(RunConfig, JsonRoundTripAndValidation) {
  RunConfig cfg;
  cfg.seed = 17;
  cfg.widths = {8, 8};
  cfg.loss.beta = 0.0;
  cfg.delta = 0.1;
  const auto back = run_config_from_json(run_config_to_json(cfg));
  EXPECT_EQ(run_config_to_json(back), run_config_to_json(cfg));
  EXPECT_EQ(back.seed, 17u);
  EXPECT_EQ(back.widths, (std::vector<std::size_t>{8, 8}));
  EXPECT_THROW(run_config_from_json("{\"sead\": 1}"), ConfigError);
  EXPECT_THROW(run_config_from_json("{\"delta\": 2.0}"), ConfigError);
  EXPECT_THROW(run_config_from_json("{not json"), ConfigError);
  EXPECT_THROW(load_run_config("/nonexistent/cfg.json"), Error);
}

PolicyReport sample_report() {
  std::vector<ExitRecord> recs;
  recs.push_back(make_record("a", 0, {{5, 0, 0}, {5, 0, 0}}));
  recs.push_back(make_record("b", 1, {{0, 0, 0}, {0, 5, 0}}));
  recs.push_back(make_record("c", 2, {{0, 0, 0}, {5, 0, 0}}));
  ThresholdSchedule s;
  s.delta = 0.1;
  s.thresholds = {Threshold::at(0.1)};
  s.cal_sizes = {10};
  return evaluate_policy(recs, s, CostModel::normalized_depth(2));
}

TEST(Reports, PolicyCsvSchema) {
  const auto csv = policy_report_csv(sample_report(), "crc-delta-0.1");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "policy,accuracy,expected_depth,observed_risk,samples,exit,exit_rate,exit_count,"
            "selective_risk,head_accuracy,head_nll,head_ece");
  EXPECT_NE(csv.find("crc-delta-0.1,"), std::string::npos);
}

TEST(Reports, UndefinedRiskIsEmptyCell) {
  std::vector<ExitRecord> recs{make_record("a", 0, {{0, 0, 0}, {5, 0, 0}})};
  ThresholdSchedule s;
  s.thresholds = {Threshold::never()};
  s.cal_sizes = {1};
  const auto csv = policy_report_csv(evaluate_policy(recs, s, CostModel::normalized_depth(2)), "p");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  std::getline(lines, line);
  // observed_risk is the 4th column and undefined here.
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) pos = line.find(',', pos) + 1;
  EXPECT_EQ(line[pos], ',');
}

TEST(Reports, RiskCurveAndValiditySchemas) {
  RiskCurve curve;
  RiskCurveRow row;
  row.delta = 0.05;
  row.thresholds = {Threshold::at(0.1)};
  row.exit_risk = {0.02, std::nullopt};
  row.overall_risk = 0.02;
  row.exit_rates = {0.6, 0.4};
  row.expected_compute = 0.7;
  curve.rows.push_back(row);
  const auto rc = risk_curve_csv(curve);
  EXPECT_EQ(rc.substr(0, rc.find('\n')),
            "delta,exit,exit_rate,observed_risk,expected_compute,overall_risk");

  ValidityResult v;
  v.delta = 0.05;
  v.trials = 10;
  v.n_cal = 99;
  v.n_test = 100;
  v.exits = {RiskEstimate{0.03, 0.01, 10, 0}};
  v.policy = RiskEstimate{0.03, 0.01, 10, 0};
  const auto vc = validity_csv({v});
  EXPECT_EQ(vc.substr(0, vc.find('\n')),
            "delta,budget,exit,mean_risk,std_error,trials_used,trials_skipped,n_cal,n_test,bound");
  EXPECT_NE(vc.find(",policy,"), std::string::npos);
  EXPECT_DOUBLE_EQ(validity_bound(0.05, 99, 0.01), 0.05 + 0.01 + 0.03);
}

TEST_F(TempDir, EmittersAreDeterministic) {
  const auto report = sample_report();
  emit_policy_report(report, "p", dir_ / "a");
  emit_policy_report(report, "p", dir_ / "b");
  for (const char* name : {"policy_report.csv", "reliability_bins.csv"}) {
    EXPECT_EQ(read_file(dir_ / "a" / name), read_file(dir_ / "b" / name)) << name;
  }
  const auto bins = read_file(dir_ / "a" / "reliability_bins.csv");
  EXPECT_EQ(bins.substr(0, bins.find('\n')), "exit,bin,lower,upper,count,mean_confidence,accuracy");
}

TEST_F(TempDir, UnwritableDirectoryIsIoError) {
  const auto blocker = dir_ / "file";
  write_file_atomic(blocker, "x");
  EXPECT_THROW(emit_policy_report(sample_report(), "p", blocker / "sub"), IoError);
}

}  // namespace
}  // namespace exitguard
