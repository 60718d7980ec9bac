#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace bcr::nn {

struct OptimizerConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Plain gradient descent instead of Adam moments.
  bool plain_gradient = false;
};

// Adam first/second moment estimates for one parameter vector.
struct OptimizerState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step = 0;
};

// In-place descent step on `params`. Throws DivergenceError if `grads`
// contains NaN/Inf or the update produces non-finite parameters.
void optimizer_step(std::span<double> params, std::span<const double> grads, double lr,
                    OptimizerState& state, const OptimizerConfig& config = {});

// Rescales `grads` so its L2 norm is at most `max_norm`; returns the norm before.
double clip_global_norm(std::span<double> grads, double max_norm);

}  // namespace bcr::nn
