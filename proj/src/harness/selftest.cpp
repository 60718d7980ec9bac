#include "bcr/harness/selftest.hpp"

#include "bcr/reward/reward.hpp"

#include <cmath>
#include <cstdio>
#include <random>

namespace bcr::harness {

namespace {

std::string fmt3(double a, double b, double c) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.3f %.3f %.3f", a, b, c);
  return buf;
}

}  // namespace

std::vector<SelftestCheck> example_checks() {
  const double p[3] = {0.7, 0.2, 0.1};
  const double want_log[3] = {0.357, 1.609, 2.303};
  const double want_ent[3] = {0.250, 0.322, 0.230};
  double got_log[3], got_ent[3];
  bool log_ok = true, ent_ok = true;
  for (int i = 0; i < 3; ++i) {
    got_log[i] = reward::log_intrinsic(p[i], 1.0, 0);
    got_ent[i] = reward::entropy_term(p[i]);
    log_ok = log_ok && std::abs(got_log[i] - want_log[i]) < 1e-3;
    ent_ok = ent_ok && std::abs(got_ent[i] - want_ent[i]) < 1e-3;
  }
  const double amp = got_log[2] / got_log[0];
  char amp_buf[32];
  std::snprintf(amp_buf, sizeof(amp_buf), "%.3f", amp);
  return {
      {"example log-intrinsic", log_ok, fmt3(got_log[0], got_log[1], got_log[2])},
      {"example entropy", ent_ok, fmt3(got_ent[0], got_ent[1], got_ent[2])},
      {"example amplification", amp >= 6.4 && amp <= 6.5, amp_buf},
  };
}

std::vector<SelftestCheck> amplification_checks(int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> p_dist(0.01, 0.99);
  std::uniform_real_distribution<double> log_eps(std::log(1e-6), std::log(0.999));

  double worst = 0.0;
  double worst_cf = 0.0;
  bool ordered = true;
  for (int i = 0; i < samples; ++i) {
    const double p1 = p_dist(rng);
    const double eps = std::exp(log_eps(rng));
    const double p2 = eps * p1;
    const double expected = 1.0 + std::log(1.0 / eps) / std::log(1.0 / p1);
    const double ratio = reward::log_intrinsic(p2, 1.0, 0) / reward::log_intrinsic(p1, 1.0, 0);
    const double ratio_cf = reward::log_intrinsic(p2, 1.0, 1) / reward::log_intrinsic(p1, 1.0, 1);
    worst = std::max(worst, std::abs(ratio - expected));
    worst_cf = std::max(worst_cf, std::abs(ratio_cf - expected));
    ordered = ordered && ratio > 1.0;
  }

  bool monotone = true;
  std::uniform_real_distribution<double> p_mono(0.05, 0.95);
  for (int i = 0; i < samples && monotone; ++i) {
    const double p1 = p_mono(rng);
    double prev = INFINITY;
    for (int k = 1; k <= 6; ++k) {
      const double eps = std::pow(10.0, -k);
      const double r = reward::entropy_term(eps * p1) / reward::entropy_term(p1);
      if (!(r < prev)) monotone = false;
      prev = r;
    }
  }

  char a[64], b[64];
  std::snprintf(a, sizeof(a), "max abs error %.3e over %d pairs", worst, samples);
  std::snprintf(b, sizeof(b), "max abs error %.3e over %d pairs", worst_cf, samples);
  return {
      {"log ratio closed form", worst <= 1e-9 && ordered, a},
      {"log ratio closed form (counterfactual form)", worst_cf <= 1e-9, b},
      {"entropy ratio decreasing in eps", monotone, "eps = 1e-1 ... 1e-6"},
  };
}

std::vector<SelftestCheck> run_selftest() {
  auto out = example_checks();
  auto more = amplification_checks();
  out.insert(out.end(), more.begin(), more.end());
  return out;
}

}  // namespace bcr::harness
