#include "exitguard/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "exitguard/error.hpp"
#include "exitguard/optim.hpp"
#include "exitguard/prob.hpp"

namespace exitguard {

void validate(const TrainConfig& cfg) {
  if (cfg.batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(cfg.warmup_fraction >= 0.0 && cfg.warmup_fraction < 1.0)) {
    throw ConfigError("warmup fraction must lie in [0, 1)");
  }
  if (!(cfg.weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
  if (!(cfg.ema_momentum >= 0.0 && cfg.ema_momentum <= 1.0)) {
    throw ConfigError("EMA momentum must lie in [0, 1]");
  }
}

void ema_update(MultiExitMlp& teacher, const MultiExitMlp& student, double momentum) {
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw InvalidInput("EMA momentum outside [0, 1]");
  if (!(teacher.shape() == student.shape())) {
    throw InvalidInput("teacher and student shapes differ");
  }
  auto t = teacher.parameters();
  const auto s = student.parameters();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = momentum * t[i] + (1.0 - momentum) * s[i];
}

std::vector<double> exit_accuracy(const MultiExitMlp& model, std::span<const Sample> samples) {
  std::vector<double> acc(model.exits(), 0.0);
  if (samples.empty()) return acc;
  for (const auto& s : samples) {
    const auto logits = model.forward(s.features);
    for (std::size_t j = 0; j < logits.size(); ++j) {
      if (argmax_class(logits[j]) == s.label) acc[j] += 1.0;
    }
  }
  for (double& a : acc) a /= static_cast<double>(samples.size());
  return acc;
}

namespace {

void check_samples(std::span<const Sample> samples, const MultiExitMlp& model,
                   const char* which) {
  for (const auto& s : samples) {
    if (s.features.size() != model.input_dim()) {
      throw InvalidInput(std::string(which) + " sample '" + s.id + "' has wrong dimension");
    }
    if (s.label >= model.classes()) {
      throw InvalidInput(std::string(which) + " sample '" + s.id + "' label out of range");
    }
  }
}

}  // namespace

TrainResult train_loop(const DatasetSplit<Sample>& data, MultiExitMlp model,
                       const TrainConfig& cfg, const LossConfig& loss_cfg) {
  validate(cfg);
  validate(loss_cfg, model.exits());
  if (data.train.empty()) throw InvalidInput("training split is empty");
  if (data.val.empty()) throw InvalidInput("validation split is empty");
  check_samples(data.train, model, "training");
  check_samples(data.val, model, "validation");

  TrainResult result;
  result.model = model;
  result.best_val_accuracy = exit_accuracy(model, data.val).back();
  if (cfg.epochs == 0) return result;

  const std::size_t n = data.train.size();
  const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = batches * cfg.epochs;
  const auto warmup_steps =
      static_cast<std::size_t>(std::floor(cfg.warmup_fraction * static_cast<double>(total_steps)));

  TeacherState teacher{model, cfg.ema_momentum};
  AdamW optimizer(model.parameter_count(), AdamWConfig{.weight_decay = cfg.weight_decay});
  std::vector<double> grad(model.parameter_count());
  std::vector<std::size_t> order(n);
  const bool use_teacher = loss_cfg.alpha > 0.0;
  const std::vector<std::vector<double>> no_teacher;

  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(RngStream{cfg.seed, streams::kShuffle}.derive(epoch));
    rng.shuffle(std::span<std::size_t>(order));

    EpochLog entry;
    entry.epoch = epoch;
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * cfg.batch_size;
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - begin);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const Sample& s = data.train[order[i]];
        const auto cache = model.forward_cached(s.features);
        const auto teacher_logits =
            use_teacher ? teacher.model.forward(s.features) : no_teacher;
        const auto loss = total_loss(cache.logits, teacher_logits, s.label, loss_cfg);
        if (!std::isfinite(loss.value)) {
          throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(b + 1));
        }
        batch_loss += loss.value;
        model.backward(cache, loss.grads, grad, scale);
      }
      const double lr = cosine_warmup_lr(step, total_steps, warmup_steps, cfg.learning_rate);
      optimizer.step(model.parameters(), grad, lr);
      ++step;
      double momentum = cfg.ema_momentum;
      if (cfg.ema_warmup) {
        const double t = static_cast<double>(step);
        momentum = std::min(momentum, (1.0 + t) / (10.0 + t));
      }
      ema_update(teacher.model, model, momentum);
      loss_sum += batch_loss;
      entry.learning_rate = lr;
    }
    entry.train_loss = loss_sum / static_cast<double>(n);
    entry.val_exit_accuracy = exit_accuracy(model, data.val);
    if (entry.val_exit_accuracy.back() >= result.best_val_accuracy) {
      result.best_val_accuracy = entry.val_exit_accuracy.back();
      result.best_epoch = epoch;
      result.model = model;
    }
    result.log.push_back(std::move(entry));
  }
  return result;
}

std::vector<ExitRecord> export_logits(const MultiExitMlp& model, std::span<const Sample> samples) {
  std::vector<ExitRecord> records;
  records.reserve(samples.size());
  for (const auto& s : samples) {
    records.push_back(ExitRecord{s.id, s.label, model.logits(s.features)});
  }
  return records;
}

GradCheckResult grad_check(const MultiExitMlp& model, const LossConfig& loss_cfg,
                           RngStream stream, std::size_t batch) {
  if (model.parameter_count() > kMaxGradCheckParameters) {
    throw ConfigError("model too large for finite-difference checking (" +
                      std::to_string(model.parameter_count()) + " parameters)");
  }
  if (batch == 0) throw ConfigError("gradient check batch must be non-empty");
  validate(loss_cfg, model.exits());

  Rng rng(stream);
  std::vector<Sample> samples(batch);
  for (auto& s : samples) {
    s.features.resize(model.input_dim());
    for (double& v : s.features) v = rng.normal();
    s.label = static_cast<std::size_t>(rng.below(model.classes()));
  }
  MultiExitMlp teacher = model;
  for (double& p : teacher.parameters()) p += 0.5 * rng.normal();

  // Teacher logits and the consistency targets are constants of the objective.
  std::vector<std::vector<std::vector<double>>> teacher_logits;
  std::vector<std::vector<double>> targets;
  for (const auto& s : samples) {
    teacher_logits.push_back(teacher.forward(s.features));
    targets.push_back(model.forward(s.features).back());
  }

  const double scale = 1.0 / static_cast<double>(batch);
  auto objective = [&](const MultiExitMlp& m) {
    double total = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
      const auto z = m.forward(samples[i].features);
      total += total_loss(z, teacher_logits[i], samples[i].label, loss_cfg,
                          std::span<const double>(targets[i]))
                   .value;
    }
    return total * scale;
  };

  std::vector<double> analytic(model.parameter_count(), 0.0);
  for (std::size_t i = 0; i < batch; ++i) {
    const auto cache = model.forward_cached(samples[i].features);
    const auto loss = total_loss(cache.logits, teacher_logits[i], samples[i].label, loss_cfg,
                                 std::span<const double>(targets[i]));
    model.backward(cache, loss.grads, analytic, scale);
  }

  constexpr double kStep = 1e-5;
  GradCheckResult result;
  MultiExitMlp probe = model;
  auto params = probe.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    const double original = params[p];
    params[p] = original + kStep;
    const double up = objective(probe);
    params[p] = original - kStep;
    const double down = objective(probe);
    params[p] = original;
    const double numeric = (up - down) / (2.0 * kStep);
    const double rel =
        std::abs(analytic[p] - numeric) / (std::abs(analytic[p]) + std::abs(numeric) + 1e-12);
    if (rel > result.max_relative_error) {
      result.max_relative_error = rel;
      result.worst_parameter = p;
    }
    ++result.parameters_checked;
  }
  return result;
}

}  // namespace exitguard
