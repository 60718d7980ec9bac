#include "bcr/nn/gradcheck.hpp"

#include "bcr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace bcr::nn {

double finite_diff_check(std::span<const double> params, const DifferentiableFn& fn,
                         std::size_t samples, std::uint64_t seed, double step) {
  std::vector<double> point(params.begin(), params.end());
  const LossAndGradient analytic = fn(point);
  if (analytic.gradient.size() != point.size()) {
    throw ContractError("gradient length does not match parameter length");
  }

  std::vector<std::size_t> coords(point.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (samples < coords.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(samples);
  }

  double worst = 0.0;
  for (std::size_t i : coords) {
    const double saved = point[i];
    point[i] = saved + step;
    const double up = fn(point).loss;
    point[i] = saved - step;
    const double down = fn(point).loss;
    point[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.gradient[i];
    worst = std::max(worst, std::abs(a - numeric) / std::max(std::abs(a), 1e-8));
  }
  return worst;
}

}  // namespace bcr::nn
