#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "exitguard/rng.hpp"
#include "exitguard/types.hpp"

namespace exitguard {

enum class Activation { kTanh, kRelu };

std::string_view to_string(Activation a) noexcept;
Activation parse_activation(std::string_view s);

struct MlpShape {
  std::size_t input_dim = 0;
  std::vector<std::size_t> widths;  // one dense stage per exit
  std::size_t classes = 0;

  std::size_t exits() const noexcept { return widths.size(); }
  friend bool operator==(const MlpShape&, const MlpShape&) = default;
};

/// Intermediate activations kept for backpropagation.
struct ForwardCache {
  std::vector<double> input;
  std::vector<std::vector<double>> hidden;  // post-activation output of each stage
  std::vector<std::vector<double>> logits;  // per-exit logits
};

/// Toy multi-exit network: a chain of dense stages, each followed by a linear
/// exit head reading that stage's activation.
///
/// All parameters live in one flat buffer so the optimizer, the EMA teacher,
/// finite differences and serialization can treat them uniformly. Per stage j
/// the layout is W_j (width_j x in_j, row-major), b_j, V_j (C x width_j), c_j.
class MultiExitMlp {
 public:
  MultiExitMlp() = default;
  /// Zero-initialized network.
  MultiExitMlp(MlpShape shape, Activation activation = Activation::kTanh);
  /// Glorot-uniform weights, zero biases.
  static MultiExitMlp initialized(MlpShape shape, RngStream stream,
                                  Activation activation = Activation::kTanh);

  const MlpShape& shape() const noexcept { return shape_; }
  Activation activation() const noexcept { return activation_; }
  std::size_t exits() const noexcept { return shape_.exits(); }
  std::size_t classes() const noexcept { return shape_.classes; }
  std::size_t input_dim() const noexcept { return shape_.input_dim; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }

  /// Per-exit logits z_1..z_K. Throws InvalidInput on a dimension mismatch.
  std::vector<std::vector<double>> forward(std::span<const double> x) const;
  ForwardCache forward_cached(std::span<const double> x) const;
  LogitMatrix logits(std::span<const double> x) const;

  /// Accumulates d(loss)/d(params) * scale into `grad`, given d(loss)/d(z_j)
  /// for every exit.
  void backward(const ForwardCache& cache, const std::vector<std::vector<double>>& dlogits,
                std::span<double> grad, double scale = 1.0) const;

  // Offsets into the flat buffer, exposed for tests and serialization.
  struct StageLayout {
    std::size_t in = 0, out = 0;
    std::size_t weight = 0, bias = 0, head_weight = 0, head_bias = 0;
  };
  const std::vector<StageLayout>& layout() const noexcept { return layout_; }

  friend bool operator==(const MultiExitMlp& a, const MultiExitMlp& b) {
    return a.shape_ == b.shape_ && a.activation_ == b.activation_ && a.params_ == b.params_;
  }

 private:
  double activate(double v) const noexcept;
  double activate_grad(double post) const noexcept;

  MlpShape shape_;
  Activation activation_ = Activation::kTanh;
  std::vector<StageLayout> layout_;
  std::vector<double> params_;
};

}  // namespace exitguard
