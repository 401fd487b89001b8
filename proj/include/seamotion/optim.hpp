#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "seamotion/error.hpp"

namespace seamotion {

/// Adam moment accumulators (Kingma & Ba defaults).
struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n) : first_moment(n, 0.0), second_moment(n, 0.0) {}
};

/// One bias-corrected Adam update in place.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw DomainError("adam_step: learning rate must be positive");
  if (grads.size() != params.size()) throw DomainError("adam_step: gradient size does not match parameters");
  if (state.first_moment.empty() && state.second_moment.empty()) {
    state.first_moment.assign(params.size(), 0.0);
    state.second_moment.assign(params.size(), 0.0);
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size())
    throw DomainError("adam_step: optimizer state size does not match parameters");
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

struct TrainingConfig {
  double initial_lr = 0.01;
  std::size_t warm_epochs = 20;
  double decay_factor = 0.1;
  std::size_t decay_every = 100;
  std::size_t batch_size = 512;
  std::size_t max_epochs = 300;
  std::uint64_t seed = 1;  // shuffle seed
  /// Test-set stride used for the per-epoch test loss (1 = every window).
  std::size_t test_loss_stride = 1;

  void validate() const {
    if (!(initial_lr > 0.0) || !(decay_factor > 0.0) || decay_every == 0 || batch_size == 0)
      throw ConfigError("TrainingConfig: learning rate, decay and batch size must be positive");
    if (test_loss_stride == 0) throw ConfigError("TrainingConfig: test_loss_stride must be >= 1");
  }
};

/// initial_lr before warm_epochs; one decay at warm_epochs and another every
/// decay_every epochs after it (20, 120, 220, ... by default).
inline double lr_schedule(std::size_t epoch, const TrainingConfig& config) {
  if (epoch < config.warm_epochs) return config.initial_lr;
  const std::size_t decays = 1 + (epoch - config.warm_epochs) / config.decay_every;
  return config.initial_lr * std::pow(config.decay_factor, static_cast<double>(decays));
}

}  // namespace seamotion
