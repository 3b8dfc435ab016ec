#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace exitguard {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;
};

/// Adam with decoupled weight decay: the decay term is applied to the
/// parameters directly, scaled by the current learning rate, instead of being
/// folded into the gradient.
class AdamW {
 public:
  AdamW(std::size_t parameter_count, AdamWConfig cfg);

  void step(std::span<double> params, std::span<const double> grad, double learning_rate);
  std::size_t steps() const noexcept { return step_; }

 private:
  AdamWConfig cfg_;
  std::vector<double> first_moment_;
  std::vector<double> second_moment_;
  std::size_t step_ = 0;
};

/// Linear warmup over the first `warmup_steps`, then cosine decay reaching 0
/// at `total_steps`. `step` is 0-based.
double cosine_warmup_lr(std::size_t step, std::size_t total_steps, std::size_t warmup_steps,
                        double peak);

}  // namespace exitguard
