#pragma once

// Behavior- and context-aware reward:
//
//   r_t = k_ext(n) * r_ext + k_ai(n) * r_ai + k_human(n) * r_human,  n = floor(t / T)
//
// r_ext  = lambda_sparse * [task completed] + stage * fade(t)
// r_ai   = lambda_ai    * |log pi(a | o)|
// r_human= lambda_human * |log pi(a | o) - log pi(a~ | o~)|
//
// where o~ is the AI observation had only the human acted. The weights are a
// scaled softmax over epoch-to-epoch ratios of mean rewards and collapse to
// (1, 0, 0) from epoch n_threshold on.

#include "bcr/env/environment.hpp"
#include "bcr/nn/network.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace bcr::reward {

enum class FadeMode { kLinear, kExponential, kConstant };

std::string to_string(FadeMode mode);
FadeMode fade_mode_from_string(const std::string& name);

// Stage-reward fading f(t) over the global training timestep.
struct FadeSchedule {
  FadeMode mode = FadeMode::kLinear;
  // Linear: reaches 0 at this many steps (normally the full training budget).
  double horizon_steps = 1.0;
  // Exponential: f(t) = exp(-t / decay_steps).
  double decay_steps = 1.0;

  double value(std::int64_t t) const;
};

// How a~ in the human-motivated reward is chosen.
enum class CounterfactualAction { kSameAction, kSampled };

struct BcrConfig {
  double lambda_sparse = 20.0;
  double lambda_ai = 1.0;
  double lambda_human = 0.02;
  double lambda_softmax = 3.0;
  int n_threshold = 100;
  FadeSchedule fade;
  // Form of the human-motivated term: 1 compares against the counterfactual
  // likelihood, 0 drops it (|log p| only).
  int delta_mode = 1;
  double ratio_cap = 10.0;
  double prob_floor = 1e-8;
  double denominator_floor = 1e-6;
  CounterfactualAction counterfactual_action = CounterfactualAction::kSameAction;

  // Throws ConfigError.
  void validate() const;
};

struct RewardBreakdown {
  double r_ext = 0.0;
  double r_sparse = 0.0;
  double r_stage_raw = 0.0;
  double r_ai = 0.0;
  double r_human = 0.0;
  double r_combined = 0.0;
  // Sparse plus unfaded stage reward; feeds the extrinsic epoch statistic.
  double r_ext_undiscounted = 0.0;
  bool operator==(const RewardBreakdown&) const = default;
};

struct WeightVector {
  double k_ext = 1.0;
  double k_ai = 0.0;
  double k_human = 0.0;
  int epoch = 0;
  bool operator==(const WeightVector&) const = default;
};

struct EpochRewardStats {
  double mean_ext = 0.0;
  double mean_ai = 0.0;
  double mean_human = 0.0;
  int epoch = 0;
  std::int64_t timestep_count = 0;
};

struct ExtrinsicReward {
  double r_ext = 0.0;
  double r_sparse = 0.0;
  double r_stage_raw = 0.0;
  double r_ext_undiscounted = 0.0;
};

// Counts probabilities that had to be lifted to the floor before a log.
struct ClampCounter {
  std::int64_t clamped = 0;
};

// Uses AI-attributed stage events and every sparse event (one lambda_sparse
// per completion).
ExtrinsicReward extrinsic_reward(std::span<const env::RewardEvent> events, std::int64_t t,
                                 const BcrConfig& config);

// delta 0: |log p|; delta 1: |log p - log cf_p|. Natural log, inputs
// clamped to [floor, 1].
double log_intrinsic(double p, double cf_p, int delta, double floor = 1e-8,
                     ClampCounter* counter = nullptr);

// -p ln p.
double entropy_term(double p);

double ai_self_reward(double prob_taken, const BcrConfig& config, ClampCounter* counter = nullptr);
double human_motivated_reward(double p_real, double p_counterfactual, const BcrConfig& config,
                              ClampCounter* counter = nullptr);

// Exact arithmetic means over one epoch. Throws ContractError when empty.
EpochRewardStats epoch_stats(std::span<const RewardBreakdown> breakdowns, int epoch);

// Guarded previous/current ratios (ext, ai, human): denominators with
// magnitude below the floor become +-floor, results clamped to
// [1/ratio_cap, ratio_cap].
std::array<double, 3> guarded_ratios(const EpochRewardStats& prev, const EpochRewardStats& cur,
                                     const BcrConfig& config);

// Epoch-n weights. Without a previous epoch the pre-truncation weights are
// uniform (lambda_softmax / 3 each). n >= n_threshold gives (1, 0, 0).
WeightVector context_weights(const std::optional<EpochRewardStats>& prev,
                             const EpochRewardStats& cur, int n, const BcrConfig& config);

double combine(const RewardBreakdown& breakdown, const WeightVector& weights);

// KL(p(. | actual AI action) || mean over AI actions of p(. | a')) for the
// human's next-step action distribution. `human_given_ai[a]` is the
// distribution when the AI takes a.
double causal_influence_reward(std::span<const nn::ActionDistribution> human_given_ai,
                               int ai_action);

}  // namespace bcr::reward
