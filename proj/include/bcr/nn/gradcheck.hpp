#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace bcr::nn {

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

using DifferentiableFn = std::function<LossAndGradient(std::span<const double>)>;

// Compares the analytic gradient of `fn` at `params` against central
// differences on `samples` randomly chosen coordinates (all coordinates when
// samples >= params.size()). Returns
//   max |analytic - numeric| / max(|analytic|, 1e-8).
double finite_diff_check(std::span<const double> params, const DifferentiableFn& fn,
                         std::size_t samples, std::uint64_t seed = 0, double step = 1e-5);

}  // namespace bcr::nn
