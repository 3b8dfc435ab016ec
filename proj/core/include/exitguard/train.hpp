#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "exitguard/losses.hpp"
#include "exitguard/model.hpp"
#include "exitguard/rng.hpp"
#include "exitguard/split.hpp"
#include "exitguard/types.hpp"

namespace exitguard {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 3e-3;
  double warmup_fraction = 0.05;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  double ema_momentum = 0.999;
  /// Ramp the EMA momentum as min(m, (1 + t) / (10 + t)) at step t so the
  /// teacher leaves its random initialization on short toy schedules.
  bool ema_warmup = true;
};

void validate(const TrainConfig& cfg);

/// EMA teacher: a parameter-for-parameter copy of the student.
struct TeacherState {
  MultiExitMlp model;
  double momentum = 0.999;
};

/// theta_T <- m * theta_T + (1 - m) * theta_S, elementwise.
void ema_update(MultiExitMlp& teacher, const MultiExitMlp& student, double momentum);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double learning_rate = 0.0;  // at the last step of the epoch
  std::vector<double> val_exit_accuracy;
};

struct TrainResult {
  MultiExitMlp model;  // best checkpoint on validation final-exit accuracy
  std::size_t best_epoch = 0;  // 0 means the initial model
  double best_val_accuracy = 0.0;
  std::vector<EpochLog> log;
};

/// Per-exit accuracy of `model` on `samples`.
std::vector<double> exit_accuracy(const MultiExitMlp& model, std::span<const Sample> samples);

/// Trains on data.train, selects the checkpoint on data.val (ties go to the
/// later epoch). Deterministic given cfg.seed. Throws TrainingDiverged on a
/// non-finite loss.
TrainResult train_loop(const DatasetSplit<Sample>& data, MultiExitMlp model,
                       const TrainConfig& cfg, const LossConfig& loss_cfg);

std::vector<ExitRecord> export_logits(const MultiExitMlp& model, std::span<const Sample> samples);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_parameter = 0;
  std::size_t parameters_checked = 0;
};

inline constexpr std::size_t kMaxGradCheckParameters = 5000;

/// Central finite differences (step 1e-5) on every parameter of the batch-mean
/// objective, compared with backpropagation. Uses a random batch and a
/// randomly perturbed teacher drawn from `stream`. Relative error is
/// |g_a - g_n| / (|g_a| + |g_n| + 1e-12).
GradCheckResult grad_check(const MultiExitMlp& model, const LossConfig& loss_cfg,
                           RngStream stream, std::size_t batch = 4);

}  // namespace exitguard
