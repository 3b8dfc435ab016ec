#include "exitguard/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "exitguard/error.hpp"

namespace exitguard {

std::string_view to_string(Activation a) noexcept {
  return a == Activation::kRelu ? "relu" : "tanh";
}

Activation parse_activation(std::string_view s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

MultiExitMlp::MultiExitMlp(MlpShape shape, Activation activation)
    : shape_(std::move(shape)), activation_(activation) {
  if (shape_.input_dim == 0) throw ConfigError("input dimension must be positive");
  if (shape_.exits() < 2) throw ConfigError("a multi-exit network needs at least two stages");
  if (shape_.classes < 2) throw ConfigError("need at least two classes");
  std::size_t offset = 0;
  std::size_t in = shape_.input_dim;
  for (std::size_t width : shape_.widths) {
    if (width == 0) throw ConfigError("stage widths must be positive");
    StageLayout s;
    s.in = in;
    s.out = width;
    s.weight = offset;
    offset += width * in;
    s.bias = offset;
    offset += width;
    s.head_weight = offset;
    offset += shape_.classes * width;
    s.head_bias = offset;
    offset += shape_.classes;
    layout_.push_back(s);
    in = width;
  }
  params_.assign(offset, 0.0);
}

MultiExitMlp MultiExitMlp::initialized(MlpShape shape, RngStream stream, Activation activation) {
  MultiExitMlp model(std::move(shape), activation);
  Rng rng(stream);
  const std::size_t c = model.classes();
  for (const auto& s : model.layout_) {
    const double stage_limit = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
    for (std::size_t i = 0; i < s.out * s.in; ++i) {
      model.params_[s.weight + i] = rng.uniform(-stage_limit, stage_limit);
    }
    const double head_limit = std::sqrt(6.0 / static_cast<double>(s.out + c));
    for (std::size_t i = 0; i < c * s.out; ++i) {
      model.params_[s.head_weight + i] = rng.uniform(-head_limit, head_limit);
    }
  }
  return model;
}

double MultiExitMlp::activate(double v) const noexcept {
  return activation_ == Activation::kRelu ? std::max(v, 0.0) : std::tanh(v);
}

double MultiExitMlp::activate_grad(double post) const noexcept {
  return activation_ == Activation::kRelu ? (post > 0.0 ? 1.0 : 0.0) : 1.0 - post * post;
}

ForwardCache MultiExitMlp::forward_cached(std::span<const double> x) const {
  if (x.size() != shape_.input_dim) {
    throw InvalidInput("input has dimension " + std::to_string(x.size()) + ", model expects " +
                       std::to_string(shape_.input_dim));
  }
  ForwardCache cache;
  cache.input.assign(x.begin(), x.end());
  const std::size_t c = shape_.classes;
  std::span<const double> prev = cache.input;
  for (const auto& s : layout_) {
    std::vector<double> h(s.out);
    for (std::size_t o = 0; o < s.out; ++o) {
      const double* w = &params_[s.weight + o * s.in];
      double acc = params_[s.bias + o];
      for (std::size_t i = 0; i < s.in; ++i) acc += w[i] * prev[i];
      h[o] = activate(acc);
    }
    std::vector<double> z(c);
    for (std::size_t k = 0; k < c; ++k) {
      const double* v = &params_[s.head_weight + k * s.out];
      double acc = params_[s.head_bias + k];
      for (std::size_t o = 0; o < s.out; ++o) acc += v[o] * h[o];
      z[k] = acc;
    }
    cache.hidden.push_back(std::move(h));
    cache.logits.push_back(std::move(z));
    prev = cache.hidden.back();
  }
  return cache;
}

std::vector<std::vector<double>> MultiExitMlp::forward(std::span<const double> x) const {
  return forward_cached(x).logits;
}

LogitMatrix MultiExitMlp::logits(std::span<const double> x) const {
  return LogitMatrix::from_rows(forward(x));
}

void MultiExitMlp::backward(const ForwardCache& cache,
                            const std::vector<std::vector<double>>& dlogits,
                            std::span<double> grad, double scale) const {
  if (grad.size() != params_.size()) throw InvalidInput("gradient buffer has wrong size");
  if (dlogits.size() != exits()) throw InvalidInput("need one logit gradient per exit");
  const std::size_t c = shape_.classes;
  // Gradient flowing into the output of the stage above, walking downwards.
  std::vector<double> upstream;
  for (std::size_t j = exits(); j-- > 0;) {
    const auto& s = layout_[j];
    const auto& h = cache.hidden[j];
    std::vector<double> dh(s.out, 0.0);
    if (!upstream.empty()) dh = upstream;

    const auto& dz = dlogits[j];
    for (std::size_t k = 0; k < c; ++k) {
      const double g = dz[k] * scale;
      if (dz[k] == 0.0) continue;
      grad[s.head_bias + k] += g;
      const double* v = &params_[s.head_weight + k * s.out];
      double* gv = &grad[s.head_weight + k * s.out];
      for (std::size_t o = 0; o < s.out; ++o) {
        gv[o] += g * h[o];
        dh[o] += dz[k] * v[o];
      }
    }

    const std::vector<double>& prev = j == 0 ? cache.input : cache.hidden[j - 1];
    std::vector<double> dprev(s.in, 0.0);
    for (std::size_t o = 0; o < s.out; ++o) {
      const double da = dh[o] * activate_grad(h[o]);
      if (da == 0.0) continue;
      grad[s.bias + o] += da * scale;
      const double* w = &params_[s.weight + o * s.in];
      double* gw = &grad[s.weight + o * s.in];
      for (std::size_t i = 0; i < s.in; ++i) {
        gw[i] += da * scale * prev[i];
        dprev[i] += da * w[i];
      }
    }
    upstream = std::move(dprev);
  }
}

}  // namespace exitguard
