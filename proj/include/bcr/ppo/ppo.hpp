#pragma once

// PPO actor-critic training with behavior- and context-aware rewards.
//
// One epoch: collect E episodes of up to K steps (querying the counterfactual
// observation at every step), compute this epoch's reward statistics and
// weights, fold the weights into the per-step reward, then GAE advantages,
// reward-to-go critic targets and clipped-surrogate updates.

#include "bcr/env/environment.hpp"
#include "bcr/human/human_model.hpp"
#include "bcr/nn/network.hpp"
#include "bcr/nn/optimizer.hpp"
#include "bcr/reward/reward.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace bcr::ppo {

enum class Algorithm { kBcr, kPpoBaseline, kCausal, kBcrNoIntrinsic, kBcrNoWeights };

std::string to_string(Algorithm algorithm);
Algorithm algorithm_from_string(const std::string& name);

struct TrainingConfig {
  int episodes_per_epoch = 1;      // E
  int max_steps_per_episode = 400; // K
  int epochs = 300;                // N
  double discount = 0.99;          // gamma
  double gae_smoothing = 0.95;     // alpha
  double clip = 0.2;               // omega
  int minibatch_size = 256;
  int sgd_passes = 4;
  double learning_rate = 3e-4;
  double value_coef = 0.5;
  // Applied separately to actor and critic gradients; <= 0 disables.
  double max_grad_norm = 0.5;
  std::vector<int> hidden = {64, 64};
  std::uint64_t seed = 1;
  // Write a checkpoint every this many epochs (0: final only).
  int checkpoint_interval = 0;

  std::int64_t steps_per_epoch() const {
    return static_cast<std::int64_t>(episodes_per_epoch) * max_steps_per_episode;
  }
  void validate() const;
};

// Which reward the learner optimizes.
struct RewardPlan {
  Algorithm algorithm = Algorithm::kBcr;
  reward::BcrConfig bcr;
  double causal_coefficient = 1.0;

  bool uses_intrinsic() const;
  bool uses_context_weights() const;
};

struct TransitionRecord {
  std::vector<double> obs_ai;
  std::vector<double> cf_obs_ai;
  int action_ai = 0;
  int action_human = 0;
  double log_prob_taken = 0.0;
  double value_estimate = 0.0;
  reward::RewardBreakdown reward;
  double r_causal = 0.0;
  // Last step of its episode.
  bool done = false;
  std::int64_t t = 0;  // global training timestep
  int env_t = 0;       // timestep inside the episode
  int episode = 0;
};

struct AdvantageBatch {
  std::vector<double> advantages;
  std::vector<double> returns;
};

struct UpdateDiagnostics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  int minibatches = 0;
};

struct OptimizerStates {
  nn::OptimizerState actor;
  nn::OptimizerState critic;
};

// Per-episode environment seed used by collection.
std::uint64_t episode_seed(std::uint64_t run_seed, int epoch, int episode);

// Samples an index from `probs` with one uniform draw.
int sample_index(std::span<const double> probs, std::mt19937_64& rng);

// Rolls out E episodes under `policy`. r_combined is filled with `weights`
// (see apply_weights). Does not learn.
std::vector<TransitionRecord> collect_epoch(env::Environment& environment,
                                            const nn::PolicyParameters& policy,
                                            human::HumanModel& human, int epoch,
                                            const reward::WeightVector& weights,
                                            const TrainingConfig& config, const RewardPlan& plan,
                                            std::mt19937_64& rng,
                                            reward::ClampCounter* clamps = nullptr);

// Weights an algorithm applies at epoch n given the epoch statistics.
reward::WeightVector plan_weights(const RewardPlan& plan,
                                  const std::optional<reward::EpochRewardStats>& prev,
                                  const reward::EpochRewardStats& cur, int n);

// Recomputes r_combined of every record for `weights` under `plan`.
void apply_weights(std::vector<TransitionRecord>& records, const reward::WeightVector& weights,
                   const RewardPlan& plan);

// GAE over r_combined; episodes split at done flags (end of input is terminal).
// returns = reward_to_go(records, gamma).
AdvantageBatch compute_gae(const std::vector<TransitionRecord>& records, double gamma, double alpha);
std::vector<double> reward_to_go(const std::vector<TransitionRecord>& records, double gamma);

// Minibatch loss pieces, exposed for gradient checks.
struct SurrogateBatch {
  nn::Matrix obs;
  std::vector<int> actions;
  Eigen::VectorXd old_log_probs;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

struct LossTerms {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  std::vector<double> actor_grad;
  std::vector<double> critic_grad;
};

// total = -mean(min(rho A, clip(rho, 1-w, 1+w) A)) + value_coef * mean((V - R)^2)
LossTerms ppo_loss(const nn::PolicyParameters& params, const SurrogateBatch& batch, double clip,
                   double value_coef);

// Normalizes advantages over the whole batch (zero mean, unit variance,
// sigma >= 1e-8), then runs sgd_passes of shuffled minibatch steps.
// Throws DivergenceError on a non-finite loss.
UpdateDiagnostics ppo_update(const std::vector<TransitionRecord>& records,
                             const AdvantageBatch& advantages, nn::PolicyParameters& params,
                             OptimizerStates& optimizer, const TrainingConfig& config,
                             std::mt19937_64& rng);

struct EpochMetrics {
  int epoch = 0;
  double mean_sparse = 0.0;  // sparse reward per episode
  double mean_stage = 0.0;   // unfaded stage reward per episode
  double mean_ext = 0.0;     // per-step mean of sparse + stage
  double mean_r_ai = 0.0;
  double mean_r_human = 0.0;
  double mean_r_causal = 0.0;
  double k_ext = 1.0;
  double k_ai = 0.0;
  double k_human = 0.0;
  // Guarded previous/current ratios and their inverses (1 at epoch 0).
  double ratio_ext = 1.0, ratio_ai = 1.0, ratio_human = 1.0;
  double inv_ratio_ext = 1.0, inv_ratio_ai = 1.0, inv_ratio_human = 1.0;
  double clip_fraction = 0.0;
  double kl = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  std::int64_t steps = 0;
  int episodes = 0;
  std::int64_t prob_clamps = 0;
  double wall_ms = 0.0;
};

// One JSON object per line; key order is fixed.
std::string metrics_to_json_line(const EpochMetrics& m);
EpochMetrics metrics_from_json_line(const std::string& line);

struct TrainOptions {
  // Empty: keep everything in memory.
  std::filesystem::path output_dir;
  std::function<void(const EpochMetrics&)> on_epoch;
  // Checked between epochs; set by signal handlers.
  const std::atomic<bool>* stop = nullptr;
};

struct TrainResult {
  nn::PolicyParameters params;
  std::vector<EpochMetrics> metrics;
  bool interrupted = false;
};

// N epochs of collect -> weights -> advantages -> update. With an output dir
// it appends metrics.jsonl every epoch and writes checkpoints/final.ckpt.
// On divergence the partial artifact is kept (diverged.ckpt holds the last
// finite parameters) and DivergenceError propagates.
TrainResult train(env::Environment& environment, human::HumanModel& human,
                  const TrainingConfig& config, const RewardPlan& plan,
                  const TrainOptions& options = {});

struct EvalResult {
  int episodes = 0;
  double mean_sparse = 0.0;
  double std_sparse = 0.0;
  std::vector<double> per_episode;
};

// Runs the frozen policy (sampling actions) and reports sparse reward per
// episode only.
EvalResult evaluate(env::Environment& environment, human::HumanModel& human,
                    const nn::PolicyParameters& params, int episodes, std::uint64_t seed,
                    double lambda_sparse);

}  // namespace bcr::ppo
