#include "exitguard/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "exitguard/error.hpp"

namespace exitguard {

AdamW::AdamW(std::size_t parameter_count, AdamWConfig cfg)
    : cfg_(cfg), first_moment_(parameter_count, 0.0), second_moment_(parameter_count, 0.0) {}

void AdamW::step(std::span<double> params, std::span<const double> grad, double learning_rate) {
  if (params.size() != first_moment_.size() || grad.size() != params.size()) {
    throw InvalidInput("optimizer state does not match parameter count");
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double bias1 = 1.0 - std::pow(cfg_.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    first_moment_[i] = cfg_.beta1 * first_moment_[i] + (1.0 - cfg_.beta1) * grad[i];
    second_moment_[i] = cfg_.beta2 * second_moment_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    const double m_hat = first_moment_[i] / bias1;
    const double v_hat = second_moment_[i] / bias2;
    params[i] -= learning_rate * (m_hat / (std::sqrt(v_hat) + cfg_.epsilon) +
                                  cfg_.weight_decay * params[i]);
  }
}

double cosine_warmup_lr(std::size_t step, std::size_t total_steps, std::size_t warmup_steps,
                        double peak) {
  if (total_steps == 0) return peak;
  if (step < warmup_steps) {
    return peak * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  }
  const std::size_t decay_steps = total_steps - warmup_steps;
  if (decay_steps == 0) return 0.0;
  const double progress =
      std::min(1.0, static_cast<double>(step - warmup_steps) / static_cast<double>(decay_steps));
  return 0.5 * peak * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace exitguard
