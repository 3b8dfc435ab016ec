#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace exitguard {

/// A scalar loss and its gradient with respect to the student logits.
struct LossGrad {
  double value = 0.0;
  std::vector<double> grad;
};

/// -ln softmax(z)_y; gradient softmax(z) - onehot(y).
LossGrad ce_loss(std::span<const double> logits, std::size_t label);

/// T^2 * KL(softmax(z_t / T) || softmax(z_s / T)). The teacher side is a
/// constant; the gradient is T * (p_s - p_t).
LossGrad kd_loss(std::span<const double> student, std::span<const double> teacher,
                 double temperature);

/// Unweighted decoupled KD components, each already scaled by T^2.
struct DkdTerms {
  double tckd = 0.0;            // KL between binary (target, rest) distributions
  double nckd = 0.0;            // KL between renormalized non-target distributions
  double teacher_target = 0.0;  // p_t(y) at temperature T
};

DkdTerms dkd_terms(std::span<const double> student, std::span<const double> teacher,
                   std::size_t label, double temperature);

/// tckd_weight * TCKD + nckd_weight * NCKD with its gradient. With C = 2
/// the non-target distribution is a point mass and NCKD is 0.
LossGrad dkd_loss(std::span<const double> student, std::span<const double> teacher,
                  std::size_t label, double temperature, double tckd_weight = 1.0,
                  double nckd_weight = 1.0);

enum class DistillKind { kDkd, kKd };

std::string_view to_string(DistillKind k) noexcept;

struct LossConfig {
  /// Per-exit weights; empty means uniform 1/K. Must sum to 1 otherwise.
  std::vector<double> exit_weights;
  double alpha = 1.0;  // teacher distillation weight
  double beta = 0.5;   // deep-to-shallow consistency weight
  double temperature = 4.0;
  double tckd_weight = 1.0;
  double nckd_weight = 1.0;
  DistillKind distill = DistillKind::kDkd;
  /// Distill exit j from teacher exit j instead of the teacher's final exit.
  bool exit_matched_teacher = false;

  std::vector<double> weights_for(std::size_t exits) const;
};

/// Throws ConfigError on negative weights, non-normalized exit weights or a
/// non-positive temperature.
void validate(const LossConfig& cfg, std::size_t exits);

struct TotalLoss {
  double value = 0.0;
  double ce = 0.0;
  double distill = 0.0;
  double consistency = 0.0;
  std::vector<std::vector<double>> grads;  // d(value)/d(z_j) per exit
};

/// Multi-exit objective:
///   sum_j w_j (CE(z_j, y) + alpha * DKD(z_j, z_T, y))
///   + sum_{j<K} w_j * beta * KD(z_j, z_K)
/// The consistency target z_K is treated as a constant. It defaults to the
/// student's own final logits; pass `consistency_target` to pin it (finite
/// difference checks need a frozen target). `teacher` may be empty when
/// alpha is 0.
TotalLoss total_loss(const std::vector<std::vector<double>>& student,
                     const std::vector<std::vector<double>>& teacher, std::size_t label,
                     const LossConfig& cfg,
                     std::optional<std::span<const double>> consistency_target = std::nullopt);

}  // namespace exitguard
