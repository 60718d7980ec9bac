#include "bcr/nn/optimizer.hpp"

#include "bcr/errors.hpp"

#include <cmath>
#include <string>

namespace bcr::nn {

void optimizer_step(std::span<double> params, std::span<const double> grads, double lr,
                    OptimizerState& state, const OptimizerConfig& config) {
  if (grads.size() != params.size()) {
    throw ContractError("gradient length " + std::to_string(grads.size()) +
                        " != parameter length " + std::to_string(params.size()));
  }
  if (!(lr > 0.0)) throw ContractError("learning rate must be positive");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw DivergenceError("non-finite gradient at index " + std::to_string(i));
    }
  }

  if (config.plain_gradient) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
    ++state.step;
    return;
  }

  if (state.first_moment.size() != params.size()) {
    state.first_moment.assign(params.size(), 0.0);
    state.second_moment.assign(params.size(), 0.0);
    state.step = 0;
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = config.beta1 * m + (1.0 - config.beta1) * grads[i];
    v = config.beta2 * v + (1.0 - config.beta2) * grads[i] * grads[i];
    params[i] -= lr * (m / c1) / (std::sqrt(v / c2) + config.epsilon);
    if (!std::isfinite(params[i])) {
      throw DivergenceError("parameter became non-finite at index " + std::to_string(i));
    }
  }
}

double clip_global_norm(std::span<double> grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (double& g : grads) g *= f;
  }
  return norm;
}

}  // namespace bcr::nn
