#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "exitguard/exitguard.hpp"

namespace exitguard::cli {

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string config_path;
};

RunConfig resolve_config(const GlobalOptions& g) {
  RunConfig cfg = g.config_path.empty() ? RunConfig{} : load_run_config(g.config_path);
  if (g.seed) {
    cfg.seed = *g.seed;
  } else if (g.config_path.empty()) {
    if (const char* env = std::getenv("EXITGUARD_SEED"); env && *env) {
      try {
        std::size_t used = 0;
        cfg.seed = std::stoull(env, &used);
        if (env[used] != '\0') throw std::invalid_argument(env);
      } catch (const std::exception&) {
        throw ConfigError(std::string("EXITGUARD_SEED is not an unsigned integer: ") + env);
      }
    }
  }
  cfg.train.seed = cfg.seed;
  return cfg;
}

CostModel cost_model(const RunConfig& cfg, std::size_t exits) {
  if (cfg.costs.empty()) return CostModel::normalized_depth(exits);
  if (cfg.costs.size() != exits) throw ConfigError("cost model length does not match exit count");
  try {
    return CostModel(cfg.costs);
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
}

std::vector<Sample> load_samples(const fs::path& path) { return samples_from_csv(read_file(path)); }

DatasetSplit<Sample> split_samples(const std::vector<Sample>& samples, const RunConfig& cfg) {
  return split_dataset(samples, cfg.split, RngStream{cfg.seed, streams::kSplit});
}

std::vector<Sample> select_part(const DatasetSplit<Sample>& split, const std::string& part,
                                const std::vector<Sample>& all) {
  if (part == "train") return split.train;
  if (part == "val") return split.val;
  if (part == "cal") return split.cal;
  if (part == "test") return split.test;
  if (part == "all") return all;
  throw ConfigError("unknown split '" + part + "'");
}

std::string policy_name(const ThresholdSchedule& s) {
  std::string name(to_string(s.method));
  if (s.heuristic_value) name += "-" + format_shortest(*s.heuristic_value);
  if (s.delta) name += "-delta-" + format_shortest(*s.delta);
  return name;
}

std::string train_log_csv(const TrainResult& result) {
  std::ostringstream out;
  out << "epoch,train_loss,learning_rate";
  const std::size_t k = result.log.empty() ? 0 : result.log.front().val_exit_accuracy.size();
  for (std::size_t j = 0; j < k; ++j) out << ",val_acc_exit_" << (j + 1);
  out << ",selected\n";
  for (const auto& e : result.log) {
    out << e.epoch << ',' << format_shortest(e.train_loss) << ','
        << format_shortest(e.learning_rate);
    for (double a : e.val_exit_accuracy) out << ',' << format_shortest(a);
    out << ',' << (e.epoch == result.best_epoch ? 1 : 0) << '\n';
  }
  return out.str();
}

TrainResult train_model(const RunConfig& cfg, const DatasetSplit<Sample>& split,
                        std::size_t input_dim, std::size_t classes) {
  MlpShape shape{input_dim, cfg.widths, classes};
  auto model = MultiExitMlp::initialized(shape, RngStream{cfg.seed, streams::kInit}, cfg.activation);
  return train_loop(split, std::move(model), cfg.train, cfg.loss);
}

ThresholdSchedule make_schedule(const RunConfig& cfg, const std::vector<ExitRecord>& cal,
                                std::size_t exits) {
  if (cfg.method == GateMethod::kCrc) return calibrate_all_exits(cal, cfg.delta, cfg.budget);
  if (!cfg.heuristic_value) throw ConfigError("--value is required for heuristic gates");
  auto s = heuristic_schedule(cfg.method, *cfg.heuristic_value, exits);
  return s;
}

std::vector<ExitRecord> concat(std::vector<ExitRecord> a, const std::vector<ExitRecord>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Loss/training flags shared by `train` and `run`.
struct TrainFlags {
  std::optional<double> alpha, beta, temp, lr;
  std::optional<std::size_t> epochs, batch_size;
  std::vector<std::size_t> widths;
  bool no_consistency = false;
  bool no_distill = false;
  bool standard_kd = false;

  void attach(CLI::App* app) {
    app->add_option("--alpha", alpha, "Distillation weight");
    app->add_option("--beta", beta, "Deep-to-shallow consistency weight");
    app->add_option("--temp", temp, "Distillation temperature");
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--batch-size", batch_size, "Mini-batch size");
    app->add_option("--lr", lr, "Peak learning rate");
    app->add_option("--widths", widths, "Stage widths, one per exit")->delimiter(',');
    app->add_flag("--no-consistency", no_consistency, "Disable consistency term (beta = 0)");
    app->add_flag("--no-distill", no_distill, "Plain multi-exit CE (alpha = beta = 0)");
    app->add_flag("--standard-kd", standard_kd, "Use plain KD instead of DKD for the teacher term");
  }

  void apply(RunConfig& cfg) const {
    if (alpha) cfg.loss.alpha = *alpha;
    if (beta) cfg.loss.beta = *beta;
    if (temp) cfg.loss.temperature = *temp;
    if (lr) cfg.train.learning_rate = *lr;
    if (epochs) cfg.train.epochs = *epochs;
    if (batch_size) cfg.train.batch_size = *batch_size;
    if (!widths.empty()) cfg.widths = widths;
    if (standard_kd) cfg.loss.distill = DistillKind::kKd;
    if (no_consistency) cfg.loss.beta = 0.0;
    if (no_distill) {
      cfg.loss.alpha = 0.0;
      cfg.loss.beta = 0.0;
    }
  }
};

// Gate flags shared by `calibrate` and `run`.
struct GateFlags {
  std::optional<double> delta, value;
  std::string budget, method;

  void attach(CLI::App* app) {
    app->add_option("--delta", delta, "Target selective risk");
    app->add_option("--budget", budget, "per-exit | union");
    app->add_option("--method", method, "crc | fixed-msp | entropy");
    app->add_option("--value", value, "MSP level (fixed-msp) or entropy bound in nats");
  }

  void apply(RunConfig& cfg) const {
    if (delta) cfg.delta = *delta;
    if (!budget.empty()) cfg.budget = parse_risk_budget(budget);
    if (!method.empty()) cfg.method = parse_gate_method(method);
    if (value) cfg.heuristic_value = *value;
  }
};

void print_report(std::ostream& out, const PolicyReport& r, const std::string& name) {
  out << "policy=" << name << " accuracy=" << format_shortest(r.accuracy)
      << " expected_depth=" << format_shortest(r.expected_compute) << " observed_risk="
      << (r.early_exit_risk ? format_shortest(*r.early_exit_risk) : "undefined") << " exit_rates=";
  for (std::size_t j = 0; j < r.exit_rates.size(); ++j) {
    out << (j ? "," : "") << format_shortest(r.exit_rates[j]);
  }
  out << '\n';
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Risk-controlled early-exit classification toolkit", "exitguard"};
  app.require_subcommand(1);
  GlobalOptions global;
  app.add_option("--seed", global.seed, "Master seed (falls back to EXITGUARD_SEED)");
  app.add_option("--config", global.config_path, "JSON run configuration");

  std::function<void()> action;

  // synth
  auto* synth = app.add_subcommand("synth", "Generate Gaussian blob samples");
  std::optional<std::size_t> n, classes, dim;
  std::optional<double> separation;
  std::string synth_out;
  synth->add_option("--n", n, "Number of samples");
  synth->add_option("--classes", classes, "Number of classes");
  synth->add_option("--dim", dim, "Feature dimension");
  synth->add_option("--separation", separation, "Distance scale between class means");
  synth->add_option("--out", synth_out, "Output samples CSV")->required();
  synth->callback([&] {
    action = [&] {
      auto cfg = resolve_config(global);
      if (n) cfg.data.n = *n;
      if (classes) cfg.data.classes = *classes;
      if (dim) cfg.data.dim = *dim;
      if (separation) cfg.data.separation = *separation;
      const auto samples = synth_blobs(cfg.data, RngStream{cfg.seed, streams::kSynth});
      write_file_atomic(synth_out, samples_to_csv(samples));
      out << "wrote " << samples.size() << " samples to " << synth_out << '\n';
    };
  });

  // train
  auto* train = app.add_subcommand("train", "Train the toy multi-exit network");
  TrainFlags train_flags;
  std::string train_data, train_out, train_log;
  train->add_option("--data", train_data, "Samples CSV")->required();
  train->add_option("--out", train_out, "Output model checkpoint")->required();
  train->add_option("--log", train_log, "Optional per-epoch CSV log");
  train_flags.attach(train);
  train->callback([&] {
    action = [&] {
      auto cfg = resolve_config(global);
      train_flags.apply(cfg);
      validate(cfg.loss, cfg.widths.size());
      const auto samples = load_samples(train_data);
      if (samples.empty()) throw InvalidInput("no samples in " + train_data);
      std::size_t c = 0;
      for (const auto& s : samples) c = std::max(c, s.label + 1);
      const auto split = split_samples(samples, cfg);
      const auto result = train_model(cfg, split, samples.front().features.size(), c);
      write_file_atomic(train_out, model_to_text(result.model));
      if (!train_log.empty()) write_file_atomic(train_log, train_log_csv(result));
      out << "best_epoch=" << result.best_epoch
          << " val_final_accuracy=" << format_shortest(result.best_val_accuracy) << '\n';
    };
  });

  // export
  auto* exp = app.add_subcommand("export", "Write per-exit logits for one data split");
  std::string exp_model, exp_data, exp_out, exp_split = "test";
  exp->add_option("--model", exp_model, "Model checkpoint")->required();
  exp->add_option("--data", exp_data, "Samples CSV")->required();
  exp->add_option("--split", exp_split, "train | val | cal | test | all");
  exp->add_option("--out", exp_out, "Output logits file")->required();
  exp->callback([&] {
    action = [&] {
      const auto cfg = resolve_config(global);
      const auto model = model_from_text(read_file(exp_model));
      const auto samples = load_samples(exp_data);
      const auto part = select_part(split_samples(samples, cfg), exp_split, samples);
      const auto records = export_logits(model, part);
      write_logits(records, exp_out);
      out << "wrote " << records.size() << " records to " << exp_out << '\n';
    };
  });

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "Fit per-exit stopping thresholds");
  GateFlags gate_flags;
  std::string cal_logits, cal_out;
  calibrate->add_option("--logits", cal_logits, "Calibration logits file (required for crc)");
  std::optional<std::size_t> cal_exits;
  calibrate->add_option("--exits", cal_exits, "Exit count for heuristic gates without --logits");
  calibrate->add_option("--out", cal_out, "Output schedule file")->required();
  gate_flags.attach(calibrate);
  calibrate->callback([&] {
    action = [&] {
      auto cfg = resolve_config(global);
      gate_flags.apply(cfg);
      ThresholdSchedule schedule;
      if (cfg.method == GateMethod::kCrc) {
        if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
        if (cal_logits.empty()) throw ConfigError("--logits is required for crc calibration");
        schedule = make_schedule(cfg, read_logits(fs::path(cal_logits)), 0);
      } else {
        std::size_t exits = cal_exits.value_or(0);
        if (!cal_logits.empty()) {
          const auto records = read_logits(fs::path(cal_logits));
          if (records.empty()) throw InvalidInput("calibration file has no records");
          exits = records.front().exits();
        }
        if (exits == 0) throw ConfigError("heuristic gates need --logits or --exits");
        schedule = make_schedule(cfg, {}, exits);
      }
      write_file_atomic(cal_out, schedule_to_text(schedule));
      out << "wrote " << to_string(schedule.method) << " schedule for " << schedule.exits()
          << " exits to " << cal_out << '\n';
    };
  });

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Run the early-exit policy and report");
  std::string ev_schedule, ev_logits, ev_dir, ev_name;
  std::vector<double> costs;
  evaluate->add_option("--schedule", ev_schedule, "Schedule file")->required();
  evaluate->add_option("--logits", ev_logits, "Test logits file")->required();
  evaluate->add_option("--costs", costs, "Cumulative exit costs")->delimiter(',');
  evaluate->add_option("--policy-name", ev_name, "Label for the policy column");
  evaluate->add_option("--out-dir", ev_dir, "Report directory")->required();
  evaluate->callback([&] {
    action = [&] {
      auto cfg = resolve_config(global);
      if (!costs.empty()) cfg.costs = costs;
      const auto schedule = schedule_from_text(read_file(ev_schedule));
      const auto records = read_logits(fs::path(ev_logits));
      if (records.empty()) throw InvalidInput("test logits file has no records");
      const auto report = evaluate_policy(records, schedule,
                                          cost_model(cfg, records.front().exits()),
                                          EceConfig{cfg.ece_bins});
      const auto name = ev_name.empty() ? policy_name(schedule) : ev_name;
      emit_policy_report(report, name, ev_dir);
      print_report(out, report, name);
    };
  });

  // risk-curve
  auto* curve_cmd = app.add_subcommand("risk-curve", "Observed risk versus target delta");
  std::string rc_logits, rc_dir, rc_budget;
  std::vector<double> rc_deltas;
  std::optional<double> rc_cal_fraction;
  curve_cmd->add_option("--logits", rc_logits, "Pooled cal+test logits file")->required();
  curve_cmd->add_option("--deltas", rc_deltas, "Increasing delta grid")->delimiter(',');
  curve_cmd->add_option("--cal-fraction", rc_cal_fraction, "Calibration share of the pool");
  curve_cmd->add_option("--budget", rc_budget, "per-exit | union");
  curve_cmd->add_option("--costs", costs, "Cumulative exit costs")->delimiter(',');
  curve_cmd->add_option("--out-dir", rc_dir, "Report directory")->required();
  curve_cmd->callback([&] {
    action = [&] {
      auto cfg = resolve_config(global);
      if (!rc_deltas.empty()) cfg.deltas = rc_deltas;
      if (rc_cal_fraction) cfg.cal_fraction = *rc_cal_fraction;
      if (!rc_budget.empty()) cfg.budget = parse_risk_budget(rc_budget);
      if (!costs.empty()) cfg.costs = costs;
      validate_delta_grid(cfg.deltas);
      const auto pool = read_logits(fs::path(rc_logits));
      if (pool.empty()) throw InvalidInput("pool logits file has no records");
      const auto curve =
          risk_curve(pool, cfg.deltas, RiskCurveSpec{cfg.cal_fraction, cfg.budget},
                     RngStream{cfg.seed, streams::kSplit}, cost_model(cfg, pool.front().exits()));
      emit_risk_curve(curve, rc_dir);
      out << "wrote " << curve.rows.size() << " risk-curve rows to " << rc_dir << '\n';
    };
  });

  // validity
  auto* validity = app.add_subcommand("validity", "Monte Carlo check of the risk guarantee");
  std::string va_logits, va_dir, va_budget;
  std::vector<double> va_deltas;
  std::optional<std::size_t> va_trials;
  std::optional<double> va_cal_fraction;
  validity->add_option("--logits", va_logits, "Pooled cal+test logits file")->required();
  validity->add_option("--deltas", va_deltas, "Target risks")->delimiter(',');
  validity->add_option("--trials", va_trials, "Exchangeable resplits per delta");
  validity->add_option("--cal-fraction", va_cal_fraction, "Calibration share of the pool");
  validity->add_option("--budget", va_budget, "per-exit | union");
  validity->add_option("--out-dir", va_dir, "Report directory")->required();
  validity->callback([&] {
    action = [&] {
      auto cfg = resolve_config(global);
      if (!va_deltas.empty()) cfg.deltas = va_deltas;
      if (va_trials) cfg.trials = *va_trials;
      if (va_cal_fraction) cfg.cal_fraction = *va_cal_fraction;
      if (!va_budget.empty()) cfg.budget = parse_risk_budget(va_budget);
      validate_delta_grid(cfg.deltas);
      if (cfg.trials == 0) throw ConfigError("--trials must be positive");
      const auto pool = read_logits(fs::path(va_logits));
      std::vector<ValidityResult> results;
      for (std::size_t i = 0; i < cfg.deltas.size(); ++i) {
        results.push_back(mc_validity(pool, cfg.deltas[i], cfg.trials, cfg.cal_fraction,
                                      RngStream{cfg.seed, streams::kMonteCarlo}.derive(i),
                                      cfg.budget));
      }
      emit_validity(results, va_dir);
      out << "wrote validity table for " << results.size() << " deltas to " << va_dir << '\n';
    };
  });

  // shift
  auto* shift = app.add_subcommand("shift", "Policy behaviour under Gaussian input noise");
  std::string sh_model, sh_data, sh_schedule, sh_dir;
  std::vector<double> sigmas;
  shift->add_option("--model", sh_model, "Model checkpoint")->required();
  shift->add_option("--data", sh_data, "Samples CSV (test split is used)")->required();
  shift->add_option("--schedule", sh_schedule, "Schedule file")->required();
  shift->add_option("--sigmas", sigmas, "Noise standard deviations")->delimiter(',');
  shift->add_option("--costs", costs, "Cumulative exit costs")->delimiter(',');
  shift->add_option("--out-dir", sh_dir, "Report directory")->required();
  shift->callback([&] {
    action = [&] {
      auto cfg = resolve_config(global);
      if (!sigmas.empty()) cfg.shift_sigmas = sigmas;
      if (!costs.empty()) cfg.costs = costs;
      const auto model = model_from_text(read_file(sh_model));
      const auto samples = load_samples(sh_data);
      const auto test = split_samples(samples, cfg).test;
      const auto schedule = schedule_from_text(read_file(sh_schedule));
      const auto rows = shift_evaluate(model, test, cfg.shift_sigmas, schedule,
                                       cost_model(cfg, model.exits()),
                                       RngStream{cfg.seed, streams::kShift});
      emit_shift(rows, sh_dir);
      out << "wrote " << rows.size() << " shift rows to " << sh_dir << '\n';
    };
  });

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the objective");
  TrainFlags gc_flags;
  std::optional<std::size_t> gc_dim, gc_classes;
  std::optional<double> gc_tolerance;
  gc_flags.attach(gradcheck);
  gradcheck->add_option("--dim", gc_dim, "Input dimension of the probe model");
  gradcheck->add_option("--classes", gc_classes, "Classes of the probe model");
  gradcheck->add_option("--tolerance", gc_tolerance, "Maximum accepted relative error");
  gradcheck->callback([&] {
    action = [&] {
      auto cfg = resolve_config(global);
      if (gc_flags.widths.empty()) cfg.widths = {16, 16, 16};
      gc_flags.apply(cfg);
      MlpShape shape{gc_dim.value_or(6), cfg.widths, gc_classes.value_or(5)};
      const auto model =
          MultiExitMlp::initialized(shape, RngStream{cfg.seed, streams::kInit}, cfg.activation);
      const auto result =
          grad_check(model, cfg.loss, RngStream{cfg.seed, streams::kGradCheck});
      const double tol = gc_tolerance.value_or(1e-4);
      out << "parameters=" << result.parameters_checked
          << " max_relative_error=" << format_shortest(result.max_relative_error)
          << " worst_parameter=" << result.worst_parameter << '\n';
      if (result.max_relative_error > tol) {
        throw Error("gradient check failed: " + format_shortest(result.max_relative_error) +
                    " > " + format_shortest(tol));
      }
    };
  });

  // run: the whole pipeline into one directory
  auto* run = app.add_subcommand("run", "synth -> train -> export -> calibrate -> reports");
  TrainFlags run_train_flags;
  GateFlags run_gate_flags;
  std::string run_dir;
  std::optional<std::size_t> run_trials;
  run->add_option("--out-dir", run_dir, "Output directory")->required();
  run->add_option("--trials", run_trials, "Monte Carlo trials for validity.csv");
  run_train_flags.attach(run);
  run_gate_flags.attach(run);
  run->callback([&] {
    action = [&] {
      auto cfg = resolve_config(global);
      run_train_flags.apply(cfg);
      run_gate_flags.apply(cfg);
      if (run_trials) cfg.trials = *run_trials;
      validate(cfg);
      const fs::path dir(run_dir);
      fs::create_directories(dir);
      write_file_atomic(dir / "config.json", run_config_to_json(cfg));

      const auto samples = synth_blobs(cfg.data, RngStream{cfg.seed, streams::kSynth});
      write_file_atomic(dir / "samples.csv", samples_to_csv(samples));
      const auto split = split_samples(samples, cfg);
      const auto trained = train_model(cfg, split, cfg.data.dim, cfg.data.classes);
      write_file_atomic(dir / "model.txt", model_to_text(trained.model));
      write_file_atomic(dir / "train_log.csv", train_log_csv(trained));

      const auto cal = export_logits(trained.model, split.cal);
      const auto test = export_logits(trained.model, split.test);
      write_logits(cal, dir / "cal_logits.jsonl");
      write_logits(test, dir / "test_logits.jsonl");

      const std::size_t k = cfg.widths.size();
      const auto cost = cost_model(cfg, k);
      const auto schedule = make_schedule(cfg, cal, k);
      emit_schedule(schedule, dir);
      const auto report = evaluate_policy(test, schedule, cost, EceConfig{cfg.ece_bins});
      emit_policy_report(report, policy_name(schedule), dir);

      const auto pool = concat(cal, test);
      emit_risk_curve(risk_curve(pool, cfg.deltas, RiskCurveSpec{cfg.cal_fraction, cfg.budget},
                                 RngStream{cfg.seed, streams::kSplit}, cost),
                      dir);
      std::vector<ValidityResult> results;
      for (std::size_t i = 0; i < cfg.deltas.size(); ++i) {
        results.push_back(mc_validity(pool, cfg.deltas[i], cfg.trials, cfg.cal_fraction,
                                      RngStream{cfg.seed, streams::kMonteCarlo}.derive(i),
                                      cfg.budget));
      }
      emit_validity(results, dir);
      emit_shift(shift_evaluate(trained.model, split.test, cfg.shift_sigmas, schedule, cost,
                                RngStream{cfg.seed, streams::kShift}),
                 dir);
      print_report(out, report, policy_name(schedule));
    };
  });

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("exitguard");

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "exitguard: error[usage]: " << one_line(e.what())
        << " (run 'exitguard --help' for usage)\n";
    return kExitConfigError;
  }

  try {
    if (action) action();
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "exitguard: error[" << e.kind() << "]: " << one_line(e.what()) << '\n';
    return kExitConfigError;
  } catch (const Error& e) {
    err << "exitguard: error[" << e.kind() << "]: " << one_line(e.what()) << '\n';
    return kExitRuntimeError;
  } catch (const std::exception& e) {
    err << "exitguard: error[runtime]: " << one_line(e.what()) << '\n';
    return kExitRuntimeError;
  }
}

}  // namespace exitguard::cli
