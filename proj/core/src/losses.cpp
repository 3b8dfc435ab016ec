#include "exitguard/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "exitguard/error.hpp"
#include "exitguard/prob.hpp"

namespace exitguard {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("student and teacher logits differ in length");
  if (a.empty()) throw InvalidInput("empty logit vector");
}

// log-sum-exp of u skipping index `skip`.
double log_sum_exp_except(std::span<const double> u, std::size_t skip) {
  double max_v = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < u.size(); ++c) {
    if (c != skip) max_v = std::max(max_v, u[c]);
  }
  double total = 0.0;
  for (std::size_t c = 0; c < u.size(); ++c) {
    if (c != skip) total += std::exp(u[c] - max_v);
  }
  return max_v + std::log(total);
}

// p log(p / q) with 0 log 0 = 0, in log space.
double kl_term(double log_p, double log_q) {
  const double p = std::exp(log_p);
  return p > 0.0 ? p * (log_p - log_q) : 0.0;
}

struct BinarySplit {
  double log_target = 0.0;  // log p(y)
  double log_rest = 0.0;    // log (1 - p(y)), computed without cancellation
  double lse_rest = 0.0;    // log-sum-exp over non-target scaled logits
  std::vector<double> scaled;
};

BinarySplit binary_split(std::span<const double> logits, std::size_t label, double temperature) {
  BinarySplit s;
  s.scaled.resize(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) s.scaled[c] = logits[c] / temperature;
  const double lse = log_sum_exp(s.scaled);
  s.lse_rest = log_sum_exp_except(s.scaled, label);
  s.log_target = s.scaled[label] - lse;
  s.log_rest = s.lse_rest - lse;
  return s;
}

}  // namespace

std::string_view to_string(DistillKind k) noexcept { return k == DistillKind::kKd ? "kd" : "dkd"; }

LossGrad ce_loss(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) throw InvalidInput("label out of range for cross-entropy");
  const auto log_p = log_softmax(logits);
  LossGrad out;
  out.value = -log_p[label];
  out.grad.resize(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) out.grad[c] = std::exp(log_p[c]);
  out.grad[label] -= 1.0;
  return out;
}

LossGrad kd_loss(std::span<const double> student, std::span<const double> teacher,
                 double temperature) {
  check_pair(student, teacher);
  if (!(temperature > 0.0)) throw InvalidInput("temperature must be positive");
  const auto log_ps = log_softmax(student, temperature);
  const auto log_pt = log_softmax(teacher, temperature);
  LossGrad out;
  out.grad.resize(student.size());
  double kl = 0.0;
  for (std::size_t c = 0; c < student.size(); ++c) {
    kl += kl_term(log_pt[c], log_ps[c]);
    out.grad[c] = temperature * (std::exp(log_ps[c]) - std::exp(log_pt[c]));
  }
  out.value = temperature * temperature * std::max(kl, 0.0);
  return out;
}

DkdTerms dkd_terms(std::span<const double> student, std::span<const double> teacher,
                   std::size_t label, double temperature) {
  check_pair(student, teacher);
  if (label >= student.size()) throw InvalidInput("label out of range for DKD");
  if (!(temperature > 0.0)) throw InvalidInput("temperature must be positive");
  const double t2 = temperature * temperature;
  const auto s = binary_split(student, label, temperature);
  const auto t = binary_split(teacher, label, temperature);

  DkdTerms terms;
  terms.teacher_target = std::exp(t.log_target);
  terms.tckd = t2 * std::max(0.0, kl_term(t.log_target, s.log_target) +
                                      kl_term(t.log_rest, s.log_rest));
  double nckd = 0.0;
  for (std::size_t c = 0; c < student.size(); ++c) {
    if (c == label) continue;
    nckd += kl_term(t.scaled[c] - t.lse_rest, s.scaled[c] - s.lse_rest);
  }
  terms.nckd = t2 * std::max(0.0, nckd);
  return terms;
}

LossGrad dkd_loss(std::span<const double> student, std::span<const double> teacher,
                  std::size_t label, double temperature, double tckd_weight,
                  double nckd_weight) {
  const auto terms = dkd_terms(student, teacher, label, temperature);
  const auto s = binary_split(student, label, temperature);
  const auto t = binary_split(teacher, label, temperature);
  const double b_t_target = std::exp(t.log_target);
  const double b_t_rest = std::exp(t.log_rest);
  const double lse_s = s.log_target - s.scaled[label];  // -log-sum-exp over all classes

  LossGrad out;
  out.value = tckd_weight * terms.tckd + nckd_weight * terms.nckd;
  out.grad.assign(student.size(), 0.0);
  // Gradients below are with respect to u = z / T; the chain rule and the
  // T^2 scaling combine into a single factor T.
  for (std::size_t c = 0; c < student.size(); ++c) {
    const double p_s = std::exp(s.scaled[c] + lse_s);
    double g_tckd = 0.0;
    double g_nckd = 0.0;
    if (c == label) {
      g_tckd = (b_t_target + b_t_rest) * p_s - b_t_target;
    } else {
      const double q_s = std::exp(s.scaled[c] - s.lse_rest);
      const double q_t = std::exp(t.scaled[c] - t.lse_rest);
      g_tckd = (b_t_target + b_t_rest) * p_s - b_t_rest * q_s;
      g_nckd = q_s - q_t;
    }
    out.grad[c] = temperature * (tckd_weight * g_tckd + nckd_weight * g_nckd);
  }
  return out;
}

std::vector<double> LossConfig::weights_for(std::size_t exits) const {
  if (exit_weights.empty()) return std::vector<double>(exits, 1.0 / static_cast<double>(exits));
  return exit_weights;
}

void validate(const LossConfig& cfg, std::size_t exits) {
  if (!(cfg.temperature > 0.0) || !std::isfinite(cfg.temperature)) {
    throw ConfigError("distillation temperature must be positive");
  }
  if (!(cfg.alpha >= 0.0) || !(cfg.beta >= 0.0)) throw ConfigError("alpha and beta must be >= 0");
  if (!(cfg.tckd_weight >= 0.0) || !(cfg.nckd_weight >= 0.0)) {
    throw ConfigError("DKD component weights must be >= 0");
  }
  if (!cfg.exit_weights.empty()) {
    if (cfg.exit_weights.size() != exits) throw ConfigError("need one exit weight per exit");
    double total = 0.0;
    for (double w : cfg.exit_weights) {
      if (!(w >= 0.0)) throw ConfigError("exit weights must be >= 0");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("exit weights must sum to 1");
  }
}

TotalLoss total_loss(const std::vector<std::vector<double>>& student,
                     const std::vector<std::vector<double>>& teacher, std::size_t label,
                     const LossConfig& cfg,
                     std::optional<std::span<const double>> consistency_target) {
  const std::size_t k = student.size();
  if (k == 0) throw InvalidInput("no student logits");
  const bool use_teacher = cfg.alpha > 0.0;
  if (use_teacher && teacher.size() != k) {
    throw InvalidInput("teacher must provide logits for every exit");
  }
  const auto weights = cfg.weights_for(k);
  const std::span<const double> target =
      consistency_target ? *consistency_target : std::span<const double>(student.back());

  TotalLoss out;
  out.grads.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    const double w = weights[j];
    auto ce = ce_loss(student[j], label);
    out.ce += w * ce.value;
    auto& g = out.grads[j];
    g.resize(student[j].size());
    for (std::size_t c = 0; c < g.size(); ++c) g[c] = w * ce.grad[c];

    if (use_teacher) {
      const auto& z_t = cfg.exit_matched_teacher ? teacher[j] : teacher.back();
      const auto d = cfg.distill == DistillKind::kDkd
                         ? dkd_loss(student[j], z_t, label, cfg.temperature, cfg.tckd_weight,
                                    cfg.nckd_weight)
                         : kd_loss(student[j], z_t, cfg.temperature);
      out.distill += w * cfg.alpha * d.value;
      for (std::size_t c = 0; c < g.size(); ++c) g[c] += w * cfg.alpha * d.grad[c];
    }
    if (cfg.beta > 0.0 && j + 1 < k) {
      const auto kd = kd_loss(student[j], target, cfg.temperature);
      out.consistency += w * cfg.beta * kd.value;
      for (std::size_t c = 0; c < g.size(); ++c) g[c] += w * cfg.beta * kd.grad[c];
    }
  }
  out.value = out.ce + out.distill + out.consistency;
  return out;
}

}  // namespace exitguard
