#include "bcr/ppo/ppo.hpp"

#include "bcr/errors.hpp"
#include "bcr/nn/autodiff.hpp"
#include "bcr/nn/checkpoint.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

namespace bcr::ppo {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kHumanStream = 0x68756d616eULL;
constexpr std::uint64_t kPolicyStream = 0x706f6c696379ULL;
constexpr std::uint64_t kInitStream = 0x696e6974ULL;

}  // namespace

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kBcr: return "bcr";
    case Algorithm::kPpoBaseline: return "ppo-baseline";
    case Algorithm::kCausal: return "causal";
    case Algorithm::kBcrNoIntrinsic: return "bcr-no-intrinsic";
    case Algorithm::kBcrNoWeights: return "bcr-no-weights";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& name) {
  for (auto a : {Algorithm::kBcr, Algorithm::kPpoBaseline, Algorithm::kCausal,
                 Algorithm::kBcrNoIntrinsic, Algorithm::kBcrNoWeights}) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("unknown algorithm: " + name);
}

void TrainingConfig::validate() const {
  if (episodes_per_epoch < 1) throw ConfigError("episodes_per_epoch must be >= 1");
  if (max_steps_per_episode < 1) throw ConfigError("max_steps_per_episode must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(discount >= 0.0 && discount <= 1.0)) throw ConfigError("discount must be in [0, 1]");
  if (!(gae_smoothing >= 0.0 && gae_smoothing <= 1.0))
    throw ConfigError("gae_smoothing must be in [0, 1]");
  if (!(clip >= 0.0)) throw ConfigError("clip must be >= 0");
  if (minibatch_size < 1) throw ConfigError("minibatch_size must be >= 1");
  if (sgd_passes < 1) throw ConfigError("sgd_passes must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(value_coef >= 0.0)) throw ConfigError("value_coef must be >= 0");
  if (hidden.empty()) throw ConfigError("hidden must list at least one layer");
  for (int h : hidden)
    if (h < 1) throw ConfigError("hidden layer sizes must be >= 1");
  if (checkpoint_interval < 0) throw ConfigError("checkpoint_interval must be >= 0");
}

bool RewardPlan::uses_intrinsic() const {
  return algorithm == Algorithm::kBcr || algorithm == Algorithm::kBcrNoIntrinsic ||
         algorithm == Algorithm::kBcrNoWeights;
}

bool RewardPlan::uses_context_weights() const {
  return algorithm == Algorithm::kBcr || algorithm == Algorithm::kBcrNoIntrinsic;
}

std::uint64_t episode_seed(std::uint64_t run_seed, int epoch, int episode) {
  std::uint64_t s = splitmix(run_seed);
  s = splitmix(s ^ static_cast<std::uint64_t>(epoch));
  return splitmix(s ^ (static_cast<std::uint64_t>(episode) << 32));
}

int sample_index(std::span<const double> probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = u(rng);
  double acc = 0.0;
  int last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = static_cast<int>(i);
    if (x < acc) return last;
  }
  return last;
}

std::vector<TransitionRecord> collect_epoch(env::Environment& environment,
                                            const nn::PolicyParameters& policy,
                                            human::HumanModel& human, int epoch,
                                            const reward::WeightVector& weights,
                                            const TrainingConfig& config, const RewardPlan& plan,
                                            std::mt19937_64& rng, reward::ClampCounter* clamps) {
  if (static_cast<std::size_t>(policy.observation_size()) != environment.observation_size() ||
      policy.action_count() != environment.action_count())
    throw ShapeError("policy does not match the environment");
  const bool intrinsic = plan.uses_intrinsic();
  const bool causal = plan.algorithm == Algorithm::kCausal;
  const int actions = environment.action_count();
  const std::int64_t epoch_start = static_cast<std::int64_t>(epoch) * config.steps_per_epoch();

  std::vector<TransitionRecord> records;
  records.reserve(static_cast<std::size_t>(config.steps_per_epoch()));
  std::vector<nn::ActionDistribution> human_given_ai(static_cast<std::size_t>(actions));

  for (int e = 0; e < config.episodes_per_epoch; ++e) {
    auto start = environment.reset(episode_seed(config.seed, epoch, e));
    std::vector<double> obs_ai = std::move(start.obs_ai.channels);
    std::vector<double> obs_human = std::move(start.obs_human.channels);

    for (int k = 0; k < config.max_steps_per_episode && !environment.done(); ++k) {
      TransitionRecord rec;
      rec.env_t = environment.time();
      rec.t = epoch_start + static_cast<std::int64_t>(e) * config.max_steps_per_episode + k;
      rec.episode = e;

      rec.action_human = human.sample(obs_human, rec.env_t);
      rec.cf_obs_ai = environment.counterfactual_observe_current(rec.action_human).channels;

      nn::Matrix both(2, static_cast<Eigen::Index>(obs_ai.size()));
      for (std::size_t i = 0; i < obs_ai.size(); ++i) {
        both(0, static_cast<Eigen::Index>(i)) = obs_ai[i];
        both(1, static_cast<Eigen::Index>(i)) = rec.cf_obs_ai[i];
      }
      nn::Matrix probs = nn::policy_probs(policy, both);
      std::span<const double> p_real(probs.row(0).data(), static_cast<std::size_t>(actions));
      std::span<const double> p_cf(probs.row(1).data(), static_cast<std::size_t>(actions));
      rec.value_estimate = nn::network_forward(policy.critic_arch, policy.critic_weights,
                                               both.topRows(1))(0, 0);
      rec.action_ai = sample_index(p_real, rng);
      rec.log_prob_taken = std::log(std::max(p_real[static_cast<std::size_t>(rec.action_ai)],
                                             plan.bcr.prob_floor));

      if (causal && (rec.env_t + 1) % human.spec().period == 0) {
        for (int a = 0; a < actions; ++a) {
          auto sim = environment.clone();
          auto out = sim->step({a, rec.action_human});
          human_given_ai[static_cast<std::size_t>(a)] =
              human.distribution(out.obs_human.channels, sim->time());
        }
        rec.r_causal = reward::causal_influence_reward(human_given_ai, rec.action_ai);
      }

      auto outcome = environment.step({rec.action_ai, rec.action_human});
      auto ext = reward::extrinsic_reward(outcome.events, rec.t, plan.bcr);
      rec.reward.r_ext = ext.r_ext;
      rec.reward.r_sparse = ext.r_sparse;
      rec.reward.r_stage_raw = ext.r_stage_raw;
      rec.reward.r_ext_undiscounted = ext.r_ext_undiscounted;
      if (intrinsic) {
        double p_a = p_real[static_cast<std::size_t>(rec.action_ai)];
        int cf_action = rec.action_ai;
        if (plan.bcr.counterfactual_action == reward::CounterfactualAction::kSampled)
          cf_action = sample_index(p_cf, rng);
        rec.reward.r_ai = reward::ai_self_reward(p_a, plan.bcr, clamps);
        rec.reward.r_human = reward::human_motivated_reward(
            p_a, p_cf[static_cast<std::size_t>(cf_action)], plan.bcr, clamps);
      }

      rec.obs_ai = std::move(obs_ai);
      obs_ai = std::move(outcome.obs_ai.channels);
      obs_human = std::move(outcome.obs_human.channels);
      rec.done = outcome.done || k + 1 == config.max_steps_per_episode;
      records.push_back(std::move(rec));
    }
    if (!records.empty()) records.back().done = true;
  }
  apply_weights(records, weights, plan);
  return records;
}

reward::WeightVector plan_weights(const RewardPlan& plan,
                                  const std::optional<reward::EpochRewardStats>& prev,
                                  const reward::EpochRewardStats& cur, int n) {
  if (plan.uses_context_weights()) return reward::context_weights(prev, cur, n, plan.bcr);
  reward::WeightVector w;
  w.epoch = n;
  if (plan.algorithm == Algorithm::kBcrNoWeights) {
    w.k_ai = 1.0;
    w.k_human = 1.0;
  }
  return w;
}

void apply_weights(std::vector<TransitionRecord>& records, const reward::WeightVector& weights,
                   const RewardPlan& plan) {
  for (auto& rec : records) {
    switch (plan.algorithm) {
      case Algorithm::kPpoBaseline:
        rec.reward.r_combined = rec.reward.r_ext;
        break;
      case Algorithm::kCausal:
        rec.reward.r_combined = rec.reward.r_ext + plan.causal_coefficient * rec.r_causal;
        break;
      default:
        rec.reward.r_combined = reward::combine(rec.reward, weights);
    }
  }
}

AdvantageBatch compute_gae(const std::vector<TransitionRecord>& records, double gamma,
                           double alpha) {
  if (records.empty()) throw ContractError("no transitions for advantage estimation");
  AdvantageBatch out;
  const std::size_t n = records.size();
  out.advantages.assign(n, 0.0);
  double next_adv = 0.0;
  double next_value = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const auto& r = records[i];
    bool terminal = r.done || i + 1 == n;
    double carry_v = terminal ? 0.0 : next_value;
    double carry_a = terminal ? 0.0 : next_adv;
    double delta = r.reward.r_combined + gamma * carry_v - r.value_estimate;
    out.advantages[i] = delta + gamma * alpha * carry_a;
    next_adv = out.advantages[i];
    next_value = r.value_estimate;
  }
  out.returns = reward_to_go(records, gamma);
  return out;
}

std::vector<double> reward_to_go(const std::vector<TransitionRecord>& records, double gamma) {
  const std::size_t n = records.size();
  std::vector<double> g(n, 0.0);
  double next = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    bool terminal = records[i].done || i + 1 == n;
    g[i] = records[i].reward.r_combined + (terminal ? 0.0 : gamma * next);
    next = g[i];
  }
  return g;
}

LossTerms ppo_loss(const nn::PolicyParameters& params, const SurrogateBatch& batch, double clip,
                   double value_coef) {
  const auto rows = batch.obs.rows();
  if (rows == 0 || static_cast<Eigen::Index>(batch.actions.size()) != rows ||
      batch.old_log_probs.size() != rows || batch.advantages.size() != rows ||
      batch.returns.size() != rows)
    throw ShapeError("inconsistent surrogate batch");

  nn::Tape tape;
  auto actor = nn::bind_network(tape, params.actor_arch, params.actor_weights);
  auto critic = nn::bind_network(tape, params.critic_arch, params.critic_weights);
  nn::Var x = tape.constant(batch.obs);

  nn::Var logp =
      nn::gather_rows(nn::log_softmax_rows(nn::network_forward(tape, params.actor_arch, actor, x)),
                      batch.actions);
  nn::Matrix old_lp = batch.old_log_probs;
  nn::Matrix adv_m = batch.advantages;
  nn::Matrix ret_m = batch.returns;
  nn::Var ratio = nn::exp(nn::sub(logp, tape.constant(old_lp)));
  nn::Var adv = tape.constant(adv_m);
  nn::Var unclipped = nn::mul(ratio, adv);
  nn::Var clipped = nn::mul(nn::clamp(ratio, 1.0 - clip, 1.0 + clip), adv);
  nn::Var policy = nn::scale(nn::mean(nn::minimum(unclipped, clipped)), -1.0);

  nn::Var v = nn::network_forward(tape, params.critic_arch, critic, x);
  nn::Var vloss = nn::mean(nn::square(nn::sub(v, tape.constant(ret_m))));
  nn::Var total = nn::add(policy, nn::scale(vloss, value_coef));

  LossTerms out;
  out.total = total.scalar();
  out.policy = policy.scalar();
  out.value = vloss.scalar();
  if (!std::isfinite(out.total)) throw DivergenceError("non-finite PPO loss");

  const nn::Matrix& rho = ratio.value();
  int clipped_count = 0;
  double kl = 0.0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (std::abs(rho(i, 0) - 1.0) > clip) ++clipped_count;
    kl += batch.old_log_probs(i) - logp.value()(i, 0);
  }
  out.clip_fraction = static_cast<double>(clipped_count) / static_cast<double>(rows);
  out.approx_kl = kl / static_cast<double>(rows);

  tape.backward(total);
  out.actor_grad.assign(params.actor_weights.size(), 0.0);
  out.critic_grad.assign(params.critic_weights.size(), 0.0);
  nn::collect_gradients(params.actor_arch, actor, out.actor_grad);
  nn::collect_gradients(params.critic_arch, critic, out.critic_grad);
  return out;
}

UpdateDiagnostics ppo_update(const std::vector<TransitionRecord>& records,
                             const AdvantageBatch& advantages, nn::PolicyParameters& params,
                             OptimizerStates& optimizer, const TrainingConfig& config,
                             std::mt19937_64& rng) {
  const std::size_t n = records.size();
  if (n == 0) throw ContractError("no transitions to learn from");
  if (advantages.advantages.size() != n || advantages.returns.size() != n)
    throw ShapeError("advantage batch does not match the records");

  double mean = std::accumulate(advantages.advantages.begin(), advantages.advantages.end(), 0.0) /
                static_cast<double>(n);
  double var = 0.0;
  for (double a : advantages.advantages) var += (a - mean) * (a - mean);
  double sigma = std::max(std::sqrt(var / static_cast<double>(n)), 1e-8);

  const Eigen::Index obs_size = static_cast<Eigen::Index>(records.front().obs_ai.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t mb = static_cast<std::size_t>(config.minibatch_size);

  UpdateDiagnostics diag;
  for (int pass = 0; pass < config.sgd_passes; ++pass) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < n; begin += mb) {
      std::size_t end = std::min(n, begin + mb);
      auto rows = static_cast<Eigen::Index>(end - begin);
      SurrogateBatch batch;
      batch.obs.resize(rows, obs_size);
      batch.actions.resize(static_cast<std::size_t>(rows));
      batch.old_log_probs.resize(rows);
      batch.advantages.resize(rows);
      batch.returns.resize(rows);
      for (Eigen::Index r = 0; r < rows; ++r) {
        std::size_t idx = order[begin + static_cast<std::size_t>(r)];
        const auto& rec = records[idx];
        for (Eigen::Index c = 0; c < obs_size; ++c)
          batch.obs(r, c) = rec.obs_ai[static_cast<std::size_t>(c)];
        batch.actions[static_cast<std::size_t>(r)] = rec.action_ai;
        batch.old_log_probs(r) = rec.log_prob_taken;
        batch.advantages(r) = (advantages.advantages[idx] - mean) / sigma;
        batch.returns(r) = advantages.returns[idx];
      }
      LossTerms terms = ppo_loss(params, batch, config.clip, config.value_coef);
      if (config.max_grad_norm > 0.0) {
        nn::clip_global_norm(terms.actor_grad, config.max_grad_norm);
        nn::clip_global_norm(terms.critic_grad, config.max_grad_norm);
      }
      nn::optimizer_step(params.actor_weights, terms.actor_grad, config.learning_rate,
                         optimizer.actor);
      nn::optimizer_step(params.critic_weights, terms.critic_grad, config.learning_rate,
                         optimizer.critic);
      diag.policy_loss += terms.policy;
      diag.value_loss += terms.value;
      diag.clip_fraction += terms.clip_fraction;
      diag.approx_kl += terms.approx_kl;
      ++diag.minibatches;
    }
  }
  double m = static_cast<double>(diag.minibatches);
  diag.policy_loss /= m;
  diag.value_loss /= m;
  diag.clip_fraction /= m;
  diag.approx_kl /= m;
  return diag;
}

std::string metrics_to_json_line(const EpochMetrics& m) {
  nlohmann::ordered_json j;
  j["epoch"] = m.epoch;
  j["mean_sparse"] = m.mean_sparse;
  j["mean_stage"] = m.mean_stage;
  j["mean_ext"] = m.mean_ext;
  j["mean_r_ai"] = m.mean_r_ai;
  j["mean_r_human"] = m.mean_r_human;
  j["mean_r_causal"] = m.mean_r_causal;
  j["k_ext"] = m.k_ext;
  j["k_ai"] = m.k_ai;
  j["k_human"] = m.k_human;
  j["ratio_ext"] = m.ratio_ext;
  j["ratio_ai"] = m.ratio_ai;
  j["ratio_human"] = m.ratio_human;
  j["inv_ratio_ext"] = m.inv_ratio_ext;
  j["inv_ratio_ai"] = m.inv_ratio_ai;
  j["inv_ratio_human"] = m.inv_ratio_human;
  j["clip_fraction"] = m.clip_fraction;
  j["kl"] = m.kl;
  j["policy_loss"] = m.policy_loss;
  j["value_loss"] = m.value_loss;
  j["steps"] = m.steps;
  j["episodes"] = m.episodes;
  j["prob_clamps"] = m.prob_clamps;
  j["wall_ms"] = m.wall_ms;
  return j.dump();
}

EpochMetrics metrics_from_json_line(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad metrics line: ") + e.what());
  }
  EpochMetrics m;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("epoch", m.epoch);
  get("mean_sparse", m.mean_sparse);
  get("mean_stage", m.mean_stage);
  get("mean_ext", m.mean_ext);
  get("mean_r_ai", m.mean_r_ai);
  get("mean_r_human", m.mean_r_human);
  get("mean_r_causal", m.mean_r_causal);
  get("k_ext", m.k_ext);
  get("k_ai", m.k_ai);
  get("k_human", m.k_human);
  get("ratio_ext", m.ratio_ext);
  get("ratio_ai", m.ratio_ai);
  get("ratio_human", m.ratio_human);
  get("inv_ratio_ext", m.inv_ratio_ext);
  get("inv_ratio_ai", m.inv_ratio_ai);
  get("inv_ratio_human", m.inv_ratio_human);
  get("clip_fraction", m.clip_fraction);
  get("kl", m.kl);
  get("policy_loss", m.policy_loss);
  get("value_loss", m.value_loss);
  get("steps", m.steps);
  get("episodes", m.episodes);
  get("prob_clamps", m.prob_clamps);
  get("wall_ms", m.wall_ms);
  return m;
}

TrainResult train(env::Environment& environment, human::HumanModel& human,
                  const TrainingConfig& config, const RewardPlan& plan,
                  const TrainOptions& options) {
  config.validate();
  plan.bcr.validate();

  TrainResult result;
  result.params = nn::init_parameters(static_cast<int>(environment.observation_size()),
                                      environment.action_count(), config.hidden,
                                      nn::Activation::kTanh, splitmix(config.seed ^ kInitStream));
  human.reseed(splitmix(config.seed ^ kHumanStream));
  std::mt19937_64 rng(splitmix(config.seed ^ kPolicyStream));
  OptimizerStates optimizer;

  std::ofstream metrics_out;
  std::filesystem::path ckpt_dir;
  if (!options.output_dir.empty()) {
    ckpt_dir = options.output_dir / "checkpoints";
    std::filesystem::create_directories(ckpt_dir);
    metrics_out.open(options.output_dir / "metrics.jsonl", std::ios::trunc);
    if (!metrics_out) throw FormatError("cannot write metrics under " + options.output_dir.string());
  }

  std::optional<reward::EpochRewardStats> prev;
  reward::WeightVector weights = plan_weights(plan, std::nullopt, {}, 0);
  for (int n = 0; n < config.epochs; ++n) {
    if (options.stop && options.stop->load()) {
      result.interrupted = true;
      break;
    }
    auto started = std::chrono::steady_clock::now();
    reward::ClampCounter clamps;
    auto records = collect_epoch(environment, result.params, human, n, weights, config, plan, rng,
                                 &clamps);

    std::vector<reward::RewardBreakdown> breakdowns;
    breakdowns.reserve(records.size());
    for (const auto& r : records) breakdowns.push_back(r.reward);
    auto stats = reward::epoch_stats(breakdowns, n);
    weights = plan_weights(plan, prev, stats, n);
    apply_weights(records, weights, plan);

    EpochMetrics m;
    m.epoch = n;
    m.steps = static_cast<std::int64_t>(records.size());
    m.episodes = config.episodes_per_epoch;
    for (const auto& r : records) {
      m.mean_sparse += r.reward.r_sparse;
      m.mean_stage += r.reward.r_stage_raw;
      m.mean_r_causal += r.r_causal;
    }
    m.mean_sparse /= m.episodes;
    m.mean_stage /= m.episodes;
    m.mean_r_causal /= static_cast<double>(m.steps);
    m.mean_ext = stats.mean_ext;
    m.mean_r_ai = stats.mean_ai;
    m.mean_r_human = stats.mean_human;
    m.k_ext = weights.k_ext;
    m.k_ai = weights.k_ai;
    m.k_human = weights.k_human;
    if (prev) {
      auto ratios = reward::guarded_ratios(*prev, stats, plan.bcr);
      m.ratio_ext = ratios[0];
      m.ratio_ai = ratios[1];
      m.ratio_human = ratios[2];
      m.inv_ratio_ext = 1.0 / ratios[0];
      m.inv_ratio_ai = 1.0 / ratios[1];
      m.inv_ratio_human = 1.0 / ratios[2];
    }
    m.prob_clamps = clamps.clamped;

    auto adv = compute_gae(records, config.discount, config.gae_smoothing);
    nn::PolicyParameters before = result.params;
    try {
      auto diag = ppo_update(records, adv, result.params, optimizer, config, rng);
      m.clip_fraction = diag.clip_fraction;
      m.kl = diag.approx_kl;
      m.policy_loss = diag.policy_loss;
      m.value_loss = diag.value_loss;
    } catch (const DivergenceError&) {
      result.params = before;
      if (!ckpt_dir.empty()) nn::write_checkpoint(ckpt_dir / "diverged.ckpt", before);
      throw;
    }
    m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                          started).count();
    result.params.version = n + 1;
    prev = stats;
    result.metrics.push_back(m);

    if (metrics_out.is_open()) {
      metrics_out << metrics_to_json_line(m) << '\n';
      metrics_out.flush();
    }
    if (!ckpt_dir.empty() && config.checkpoint_interval > 0 &&
        (n + 1) % config.checkpoint_interval == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%04d.ckpt", n + 1);
      nn::write_checkpoint(ckpt_dir / name, result.params);
    }
    if (options.on_epoch) options.on_epoch(m);
  }
  if (!ckpt_dir.empty()) nn::write_checkpoint(ckpt_dir / "final.ckpt", result.params);
  return result;
}

EvalResult evaluate(env::Environment& environment, human::HumanModel& human,
                    const nn::PolicyParameters& params, int episodes, std::uint64_t seed,
                    double lambda_sparse) {
  if (episodes < 1) throw ConfigError("evaluation needs at least one episode");
  EvalResult out;
  out.episodes = episodes;
  human.reseed(splitmix(seed ^ kHumanStream));
  std::mt19937_64 rng(splitmix(seed ^ kPolicyStream));
  for (int e = 0; e < episodes; ++e) {
    auto start = environment.reset(episode_seed(seed, -1, e));
    auto obs_ai = std::move(start.obs_ai.channels);
    auto obs_human = std::move(start.obs_human.channels);
    double total = 0.0;
    while (!environment.done()) {
      int h = human.sample(obs_human, environment.time());
      auto probs = nn::forward_policy(params, obs_ai);
      int a = sample_index(probs.probs, rng);
      auto outcome = environment.step({a, h});
      total += lambda_sparse * env::count_sparse(outcome.events);
      obs_ai = std::move(outcome.obs_ai.channels);
      obs_human = std::move(outcome.obs_human.channels);
    }
    out.per_episode.push_back(total);
  }
  out.mean_sparse =
      std::accumulate(out.per_episode.begin(), out.per_episode.end(), 0.0) / episodes;
  if (episodes > 1) {
    double ss = 0.0;
    for (double v : out.per_episode) ss += (v - out.mean_sparse) * (v - out.mean_sparse);
    out.std_sparse = std::sqrt(ss / (episodes - 1));
  }
  return out;
}

}  // namespace bcr::ppo
