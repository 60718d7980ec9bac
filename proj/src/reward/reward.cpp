#include "bcr/reward/reward.hpp"

#include "bcr/errors.hpp"

#include <algorithm>
#include <cmath>

namespace bcr::reward {

std::string to_string(FadeMode mode) {
  switch (mode) {
    case FadeMode::kLinear: return "linear";
    case FadeMode::kExponential: return "exponential";
    case FadeMode::kConstant: return "constant";
  }
  return "unknown";
}

FadeMode fade_mode_from_string(const std::string& name) {
  if (name == "linear") return FadeMode::kLinear;
  if (name == "exponential") return FadeMode::kExponential;
  if (name == "constant") return FadeMode::kConstant;
  throw ConfigError("unknown fade mode '" + name + "'");
}

double FadeSchedule::value(std::int64_t t) const {
  const double x = static_cast<double>(std::max<std::int64_t>(t, 0));
  switch (mode) {
    case FadeMode::kLinear: return std::max(0.0, 1.0 - x / horizon_steps);
    case FadeMode::kExponential: return std::exp(-x / decay_steps);
    case FadeMode::kConstant: return 1.0;
  }
  return 1.0;
}

void BcrConfig::validate() const {
  if (lambda_sparse < 0 || lambda_ai < 0 || lambda_human < 0 || lambda_softmax < 0) {
    throw ConfigError("reward coefficients must be non-negative");
  }
  if (n_threshold < 0) throw ConfigError("n_threshold must be non-negative");
  if (delta_mode != 0 && delta_mode != 1) throw ConfigError("delta_mode must be 0 or 1");
  if (!(ratio_cap > 1.0)) throw ConfigError("ratio_cap must exceed 1");
  if (!(prob_floor > 0.0 && prob_floor <= 1e-3)) throw ConfigError("prob_floor must lie in (0, 1e-3]");
  if (!(denominator_floor > 0.0)) throw ConfigError("denominator_floor must be positive");
  if (fade.mode == FadeMode::kLinear && !(fade.horizon_steps > 0.0)) {
    throw ConfigError("linear fade needs a positive horizon");
  }
  if (fade.mode == FadeMode::kExponential && !(fade.decay_steps > 0.0)) {
    throw ConfigError("exponential fade needs a positive decay");
  }
}

ExtrinsicReward extrinsic_reward(std::span<const env::RewardEvent> events, std::int64_t t,
                                 const BcrConfig& config) {
  ExtrinsicReward r;
  r.r_sparse = config.lambda_sparse * env::count_sparse(events);
  r.r_stage_raw = env::stage_sum(events, env::Attribution::kAi);
  r.r_ext = r.r_sparse + r.r_stage_raw * config.fade.value(t);
  r.r_ext_undiscounted = r.r_sparse + r.r_stage_raw;
  return r;
}

namespace {

double floored(double p, double floor, ClampCounter* counter) {
  if (!(p >= floor)) {
    if (counter) ++counter->clamped;
    return floor;
  }
  return std::min(p, 1.0);
}

}  // namespace

double log_intrinsic(double p, double cf_p, int delta, double floor, ClampCounter* counter) {
  const double a = std::log(floored(p, floor, counter));
  if (delta == 0) return std::abs(a);
  if (delta != 1) throw ContractError("delta must be 0 or 1");
  return std::abs(a - std::log(floored(cf_p, floor, counter)));
}

double entropy_term(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ContractError("entropy_term needs p in (0, 1]");
  return -p * std::log(p);
}

double ai_self_reward(double prob_taken, const BcrConfig& config, ClampCounter* counter) {
  if (config.lambda_ai == 0.0) return 0.0;
  return config.lambda_ai * log_intrinsic(prob_taken, 1.0, 0, config.prob_floor, counter);
}

double human_motivated_reward(double p_real, double p_counterfactual, const BcrConfig& config,
                              ClampCounter* counter) {
  if (config.lambda_human == 0.0) return 0.0;
  return config.lambda_human *
         log_intrinsic(p_real, p_counterfactual, config.delta_mode, config.prob_floor, counter);
}

EpochRewardStats epoch_stats(std::span<const RewardBreakdown> breakdowns, int epoch) {
  if (breakdowns.empty()) throw ContractError("epoch_stats over an empty epoch");
  EpochRewardStats s;
  s.epoch = epoch;
  s.timestep_count = static_cast<std::int64_t>(breakdowns.size());
  double ext = 0.0, ai = 0.0, human = 0.0;
  for (const auto& b : breakdowns) {
    ext += b.r_ext_undiscounted;
    ai += b.r_ai;
    human += b.r_human;
  }
  const double n = static_cast<double>(breakdowns.size());
  s.mean_ext = ext / n;
  s.mean_ai = ai / n;
  s.mean_human = human / n;
  return s;
}

std::array<double, 3> guarded_ratios(const EpochRewardStats& prev, const EpochRewardStats& cur,
                                     const BcrConfig& config) {
  auto ratio = [&](double num, double den) {
    if (std::abs(den) < config.denominator_floor) {
      den = std::signbit(den) ? -config.denominator_floor : config.denominator_floor;
    }
    return std::clamp(num / den, 1.0 / config.ratio_cap, config.ratio_cap);
  };
  return {ratio(prev.mean_ext, cur.mean_ext), ratio(prev.mean_ai, cur.mean_ai),
          ratio(prev.mean_human, cur.mean_human)};
}

WeightVector context_weights(const std::optional<EpochRewardStats>& prev,
                             const EpochRewardStats& cur, int n, const BcrConfig& config) {
  if (n < 0) throw ContractError("epoch index must be non-negative");
  WeightVector w;
  w.epoch = n;
  if (n >= config.n_threshold) return w;  // (1, 0, 0)
  if (!prev) {
    w.k_ext = w.k_ai = w.k_human = config.lambda_softmax / 3.0;
    return w;
  }
  const auto r = guarded_ratios(*prev, cur, config);
  const double m = std::max({r[0], r[1], r[2]});
  const double e0 = std::exp(r[0] - m), e1 = std::exp(r[1] - m), e2 = std::exp(r[2] - m);
  const double z = e0 + e1 + e2;
  w.k_ext = config.lambda_softmax * e0 / z;
  w.k_ai = config.lambda_softmax * e1 / z;
  w.k_human = config.lambda_softmax * e2 / z;
  return w;
}

double combine(const RewardBreakdown& b, const WeightVector& w) {
  return w.k_ext * b.r_ext + w.k_ai * b.r_ai + w.k_human * b.r_human;
}

double causal_influence_reward(std::span<const nn::ActionDistribution> human_given_ai,
                               int ai_action) {
  if (human_given_ai.empty()) throw ContractError("need at least one AI action");
  if (ai_action < 0 || ai_action >= static_cast<int>(human_given_ai.size())) {
    throw ContractError("ai_action out of range");
  }
  const std::size_t k = human_given_ai.front().size();
  std::vector<double> marginal(k, 0.0);
  for (const auto& d : human_given_ai) {
    if (d.size() != k) throw ContractError("human distributions differ in length");
    for (std::size_t i = 0; i < k; ++i) marginal[i] += d[i];
  }
  for (double& m : marginal) m /= static_cast<double>(human_given_ai.size());
  const auto& actual = human_given_ai[ai_action];
  double kl = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (actual[i] > 0.0) kl += actual[i] * std::log(actual[i] / marginal[i]);
  }
  return std::max(0.0, kl);
}

}  // namespace bcr::reward
