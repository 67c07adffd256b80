#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "gcrl/error.hpp"

namespace gcrl {

struct HuberResult {
  double loss = 0.0;
  std::vector<double> grad;  // dLoss/dpred
};

/// Mean Huber loss with delta = 1.
inline HuberResult huber_loss(std::span<const double> pred, std::span<const double> target) {
  require(pred.size() == target.size(), "huber_loss: length mismatch");
  require(!pred.empty(), "huber_loss: empty input");
  HuberResult r;
  r.grad.resize(pred.size());
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    const double a = std::abs(d);
    r.loss += a <= 1.0 ? 0.5 * d * d : a - 0.5;
    r.grad[i] = (a <= 1.0 ? d : (d > 0 ? 1.0 : -1.0)) / n;
  }
  r.loss /= n;
  return r;
}

struct AdamState {
  std::vector<float> m;
  std::vector<float> v;
  std::uint64_t t = 0;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t parameter_count, double learning_rate = 0.001)
      : m(parameter_count, 0.0f), v(parameter_count, 0.0f), lr(learning_rate) {}
};

/// Bias-corrected Adam update, in place. Throws TrainingDivergence on a
/// non-finite gradient before touching any state.
template <class T>
void adam_step(AdamState& state, std::span<T> params, std::span<const T> grad) {
  require(params.size() == grad.size() && params.size() == state.m.size(), "adam_step: length mismatch");
  require(state.lr > 0, "adam_step: learning rate must be positive");
  for (T g : grad)
    if (!std::isfinite(static_cast<double>(g))) throw TrainingDivergence("non-finite gradient entry");
  ++state.t;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  const double step = state.lr / c1;
  const double b1 = state.beta1, b2 = state.beta2;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = static_cast<double>(grad[i]);
    const double m = b1 * state.m[i] + (1.0 - b1) * g;
    const double v = b2 * state.v[i] + (1.0 - b2) * g * g;
    state.m[i] = static_cast<float>(m);
    state.v[i] = static_cast<float>(v);
    params[i] = static_cast<T>(static_cast<double>(params[i]) - step * m / (std::sqrt(v / c2) + state.eps));
  }
}

/// Rescales `grad` so its L2 norm is at most `max_norm`; returns the norm
/// before clipping. max_norm <= 0 disables clipping.
template <class T>
double clip_grad_norm(std::span<T> grad, double max_norm) {
  double sq = 0.0;
  for (T g : grad) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double scale = max_norm / (norm + 1e-6);
    for (T& g : grad) g = static_cast<T>(static_cast<double>(g) * scale);
  }
  return norm;
}

}  // namespace gcrl
