#include "exitguard/config.hpp"

#include <set>

#include "json.hpp"

#include "exitguard/error.hpp"
#include "exitguard/io.hpp"
#include "exitguard/risk_curve.hpp"

namespace exitguard {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key '" + where + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void validate(const RunConfig& cfg) {
  (void)split_sizes(1, cfg.split);
  if (cfg.data.classes < 2 || cfg.data.dim < 2 || cfg.data.n < cfg.data.classes) {
    throw ConfigError("data: need classes >= 2, dim >= 2 and n >= classes");
  }
  if (!(cfg.data.separation >= 0.0)) throw ConfigError("data: separation must be >= 0");
  if (cfg.widths.size() < 2) throw ConfigError("model: need at least two stages");
  validate(cfg.loss, cfg.widths.size());
  validate(cfg.train);
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  if (cfg.ece_bins == 0) throw ConfigError("ece_bins must be positive");
  validate_delta_grid(cfg.deltas);
  if (cfg.trials == 0) throw ConfigError("trials must be positive");
  if (!(cfg.cal_fraction > 0.0 && cfg.cal_fraction < 1.0)) {
    throw ConfigError("cal_fraction must lie in (0, 1)");
  }
  if (!cfg.costs.empty() && cfg.costs.size() != cfg.widths.size()) {
    throw ConfigError("costs must list one value per exit");
  }
}

RunConfig run_config_from_json(std::string_view text) {
  RunConfig cfg;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("config root must be an object");
    reject_unknown(j,
                   {"seed", "split", "data", "model", "loss", "train", "delta", "budget",
                    "method", "value", "costs", "ece_bins", "deltas", "trials", "cal_fraction",
                    "shift_sigmas"},
                   "");
    read(j, "seed", cfg.seed);
    if (j.contains("split")) {
      const auto& s = j["split"];
      reject_unknown(s, {"train", "val", "cal", "test"}, "split.");
      read(s, "train", cfg.split[0]);
      read(s, "val", cfg.split[1]);
      read(s, "cal", cfg.split[2]);
      read(s, "test", cfg.split[3]);
    }
    if (j.contains("data")) {
      const auto& d = j["data"];
      reject_unknown(d, {"n", "classes", "dim", "separation"}, "data.");
      read(d, "n", cfg.data.n);
      read(d, "classes", cfg.data.classes);
      read(d, "dim", cfg.data.dim);
      read(d, "separation", cfg.data.separation);
    }
    if (j.contains("model")) {
      const auto& m = j["model"];
      reject_unknown(m, {"widths", "activation"}, "model.");
      read(m, "widths", cfg.widths);
      if (m.contains("activation")) cfg.activation = parse_activation(m["activation"].get<std::string>());
    }
    if (j.contains("loss")) {
      const auto& l = j["loss"];
      reject_unknown(l,
                     {"exit_weights", "alpha", "beta", "temperature", "tckd_weight",
                      "nckd_weight", "distill", "exit_matched_teacher"},
                     "loss.");
      read(l, "exit_weights", cfg.loss.exit_weights);
      read(l, "alpha", cfg.loss.alpha);
      read(l, "beta", cfg.loss.beta);
      read(l, "temperature", cfg.loss.temperature);
      read(l, "tckd_weight", cfg.loss.tckd_weight);
      read(l, "nckd_weight", cfg.loss.nckd_weight);
      read(l, "exit_matched_teacher", cfg.loss.exit_matched_teacher);
      if (l.contains("distill")) {
        const auto kind = l["distill"].get<std::string>();
        if (kind == "dkd") {
          cfg.loss.distill = DistillKind::kDkd;
        } else if (kind == "kd") {
          cfg.loss.distill = DistillKind::kKd;
        } else {
          throw ConfigError("loss.distill must be 'dkd' or 'kd'");
        }
      }
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      reject_unknown(t,
                     {"epochs", "batch_size", "learning_rate", "warmup_fraction",
                      "weight_decay", "ema_momentum", "ema_warmup"},
                     "train.");
      read(t, "epochs", cfg.train.epochs);
      read(t, "batch_size", cfg.train.batch_size);
      read(t, "learning_rate", cfg.train.learning_rate);
      read(t, "warmup_fraction", cfg.train.warmup_fraction);
      read(t, "weight_decay", cfg.train.weight_decay);
      read(t, "ema_momentum", cfg.train.ema_momentum);
      read(t, "ema_warmup", cfg.train.ema_warmup);
    }
    read(j, "delta", cfg.delta);
    if (j.contains("budget")) cfg.budget = parse_risk_budget(j["budget"].get<std::string>());
    if (j.contains("method")) cfg.method = parse_gate_method(j["method"].get<std::string>());
    if (j.contains("value")) cfg.heuristic_value = j["value"].get<double>();
    read(j, "costs", cfg.costs);
    read(j, "ece_bins", cfg.ece_bins);
    read(j, "deltas", cfg.deltas);
    read(j, "trials", cfg.trials);
    read(j, "cal_fraction", cfg.cal_fraction);
    read(j, "shift_sigmas", cfg.shift_sigmas);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.train.seed = cfg.seed;
  validate(cfg);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from_json(read_file(path));
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["split"] = {{"train", cfg.split[0]}, {"val", cfg.split[1]}, {"cal", cfg.split[2]},
                {"test", cfg.split[3]}};
  j["data"] = {{"n", cfg.data.n}, {"classes", cfg.data.classes}, {"dim", cfg.data.dim},
               {"separation", cfg.data.separation}};
  j["model"] = {{"widths", cfg.widths}, {"activation", std::string(to_string(cfg.activation))}};
  j["loss"] = {{"exit_weights", cfg.loss.exit_weights}, {"alpha", cfg.loss.alpha},
               {"beta", cfg.loss.beta}, {"temperature", cfg.loss.temperature},
               {"tckd_weight", cfg.loss.tckd_weight}, {"nckd_weight", cfg.loss.nckd_weight},
               {"distill", std::string(to_string(cfg.loss.distill))},
               {"exit_matched_teacher", cfg.loss.exit_matched_teacher}};
  j["train"] = {{"epochs", cfg.train.epochs}, {"batch_size", cfg.train.batch_size},
                {"learning_rate", cfg.train.learning_rate},
                {"warmup_fraction", cfg.train.warmup_fraction},
                {"weight_decay", cfg.train.weight_decay},
                {"ema_momentum", cfg.train.ema_momentum}, {"ema_warmup", cfg.train.ema_warmup}};
  j["delta"] = cfg.delta;
  j["budget"] = std::string(to_string(cfg.budget));
  j["method"] = std::string(to_string(cfg.method));
  if (cfg.heuristic_value) j["value"] = *cfg.heuristic_value;
  j["costs"] = cfg.costs;
  j["ece_bins"] = cfg.ece_bins;
  j["deltas"] = cfg.deltas;
  j["trials"] = cfg.trials;
  j["cal_fraction"] = cfg.cal_fraction;
  j["shift_sigmas"] = cfg.shift_sigmas;
  return j.dump(2) + "\n";
}

}  // namespace exitguard
