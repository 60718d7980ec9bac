#include "doctest.h"

#include "ppo_oracles.hpp"

#include "bcr/env/exploration.hpp"
#include "bcr/errors.hpp"
#include "bcr/ppo/ppo.hpp"

#include <filesystem>
#include <fstream>

using namespace bcr;
using doctest::Approx;

namespace {

// One-step, two-armed bandit: arm 1 completes the task.
class Bandit final : public env::Environment {
 public:
  std::string id() const override { return "bandit"; }
  int action_count() const override { return 2; }
  int stay_action() const override { return 0; }
  std::size_t observation_size() const override { return 1; }
  int horizon() const override { return 1; }
  int time() const override { return t_; }
  bool done() const override { return t_ >= 1; }
  env::ResetResult reset(std::uint64_t) override {
    t_ = 0;
    return {observe(env::Role::kAi), observe(env::Role::kHuman), snapshot()};
  }
  env::StepOutcome step(const env::JointAction& a) override {
    check_joint(a);
    if (done()) throw EpisodeOverError("bandit episode over");
    ++t_;
    env::StepOutcome out{observe(env::Role::kAi), observe(env::Role::kHuman), {}, true};
    if (a.ai_action == 1) out.events.push_back({env::EventKind::kSparse, env::Attribution::kShared, 20.0, ""});
    return out;
  }
  env::Observation observe(env::Role) const override { return {{1.0}, t_}; }
  env::Observation counterfactual_observe(const env::EnvSnapshot&, int) const override {
    return observe(env::Role::kAi);
  }
  env::Observation counterfactual_observe_current(int) const override {
    return observe(env::Role::kAi);
  }
  env::EnvSnapshot snapshot() const override { return {{static_cast<std::uint8_t>(t_)}}; }
  void restore(const env::EnvSnapshot& s) override { t_ = s.bytes.at(0); }
  std::unique_ptr<env::Environment> clone() const override { return std::make_unique<Bandit>(*this); }

 private:
  int t_ = 0;
};

human::HumanModel uniform_human(const env::Environment& e, int period = 1) {
  return human::HumanModel({human::HumanKind::kUniformRandom, period, 1.0, 0.2, 0},
                           {e.id(), 1, 1, e.action_count(), e.stay_action(), e.observation_size()});
}

ppo::TransitionRecord rec(double r, double v, bool done) {
  ppo::TransitionRecord x;
  x.reward.r_combined = r;
  x.value_estimate = v;
  x.done = done;
  return x;
}

}  // namespace

TEST_SUITE("ppo") {

TEST_CASE("gae examples") {
  auto two = ppo::compute_gae({rec(1, 0, false), rec(1, 0, true)}, 0.99, 0.95);
  CHECK(two.advantages[0] == Approx(1.9405).epsilon(1e-12));
  CHECK(two.advantages[1] == Approx(1.0));
  CHECK(two.returns[0] == Approx(1.99));
  auto one = ppo::compute_gae({rec(3, 1, true)}, 0.99, 0.95);
  CHECK(one.advantages[0] == Approx(2.0));
  CHECK(one.returns[0] == 3.0);
  auto rtg = ppo::reward_to_go({rec(0, 0, false), rec(0, 0, false), rec(20, 0, true)}, 0.5);
  CHECK(rtg == std::vector<double>{5.0, 10.0, 20.0});
  CHECK(ppo::reward_to_go({rec(1, 0, false), rec(1, 0, false), rec(1, 0, true)}, 1.0) ==
        std::vector<double>{3.0, 2.0, 1.0});
  CHECK(ppo::reward_to_go({rec(1, 0, false), rec(0, 0, false), rec(0, 0, true)}, 0.5) ==
        std::vector<double>{1.0, 0.0, 0.0});
  CHECK_THROWS_AS(ppo::compute_gae({}, 0.99, 0.95), ContractError);
  auto split = ppo::reward_to_go({rec(1, 0, true), rec(1, 0, true)}, 0.9);
  CHECK(split == std::vector<double>{1.0, 1.0});
}

TEST_CASE("gae and reward-to-go match the double sums") {
  CHECK(oracles::gae_oracle_max_error(200, 64, 1) < 1e-10);
}

TEST_CASE("surrogate gradient check over a three-step trajectory") {
  CHECK(oracles::surrogate_gradcheck(1500, 2) < 1e-4);
}

TEST_CASE("clip zero at ratio one is the vanilla policy gradient") {
  std::vector<int> hidden = {16};
  auto p = nn::init_parameters(6, 3, hidden, nn::Activation::kTanh, 4);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0, 0.3);
  for (double& w : p.actor_weights) w += nd(rng);
  ppo::SurrogateBatch b;
  b.obs.resize(4, 6);
  for (Eigen::Index i = 0; i < b.obs.size(); ++i) b.obs.data()[i] = nd(rng);
  b.actions = {0, 2, 1, 2};
  b.advantages.resize(4);
  b.advantages << 1.0, -2.0, 0.5, 0.25;
  b.returns = Eigen::VectorXd::Zero(4);
  // Old log-probs evaluated exactly as the loss does, so every ratio is 1.
  nn::Tape tape;
  auto bound = nn::bind_network(tape, p.actor_arch, p.actor_weights);
  auto lp = nn::gather_rows(
      nn::log_softmax_rows(nn::network_forward(tape, p.actor_arch, bound, tape.constant(b.obs))),
      b.actions);
  b.old_log_probs = lp.value().col(0);
  auto terms = ppo::ppo_loss(p, b, 0.0, 0.5);

  // -mean(log pi(a|o) A) differentiated numerically.
  auto pg = [&](std::span<const double> actor) {
    nn::PolicyParameters q = p;
    q.actor_weights.assign(actor.begin(), actor.end());
    auto pr = nn::policy_probs(q, b.obs);
    double s = 0;
    for (int i = 0; i < 4; ++i) s += std::log(pr(i, b.actions[i])) * b.advantages(i);
    return -s / 4;
  };
  std::vector<double> w = p.actor_weights;
  double worst = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    auto up = w, dn = w;
    up[i] += 1e-6;
    dn[i] -= 1e-6;
    double num = (pg(up) - pg(dn)) / 2e-6;
    worst = std::max(worst, std::abs(num - terms.actor_grad[i]));
  }
  CHECK(worst < 1e-7);
  CHECK(terms.clip_fraction == 0.0);
}

TEST_CASE("ppo update: zero advantages leave the actor unchanged; a pass lowers the loss") {
  std::vector<int> hidden = {8};
  auto p = nn::init_parameters(3, 2, hidden, nn::Activation::kTanh, 1);
  std::vector<ppo::TransitionRecord> recs(4);
  for (int i = 0; i < 4; ++i) {
    recs[i].obs_ai = {0.1 * i, -0.2, 1.0};
    recs[i].action_ai = i % 2;
    recs[i].log_prob_taken = std::log(nn::forward_policy(p, recs[i].obs_ai).probs[i % 2]);
  }
  ppo::AdvantageBatch flat{{0, 0, 0, 0}, {1, 2, 3, 4}};
  ppo::TrainingConfig cfg;
  cfg.minibatch_size = 4;
  cfg.sgd_passes = 1;
  cfg.learning_rate = 1e-2;
  ppo::OptimizerStates opt;
  std::mt19937_64 rng(0);
  auto q = p;
  ppo::ppo_update(recs, flat, q, opt, cfg, rng);
  CHECK(q.actor_weights == p.actor_weights);
  CHECK(q.critic_weights != p.critic_weights);

  ppo::AdvantageBatch adv{{1, -1, 2, -0.5}, {1, 2, 3, 4}};
  ppo::SurrogateBatch b;
  b.obs.resize(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int c = 0; c < 3; ++c) b.obs(i, c) = recs[i].obs_ai[c];
  b.actions = {0, 1, 0, 1};
  b.old_log_probs.resize(4);
  for (int i = 0; i < 4; ++i) b.old_log_probs(i) = recs[i].log_prob_taken;
  double mean = 0.375, sd = 0;
  for (double a : adv.advantages) sd += (a - mean) * (a - mean);
  sd = std::sqrt(sd / 4);
  b.advantages.resize(4);
  b.returns.resize(4);
  for (int i = 0; i < 4; ++i) {
    b.advantages(i) = (adv.advantages[i] - mean) / sd;
    b.returns(i) = adv.returns[i];
  }
  double before = ppo::ppo_loss(p, b, 0.2, 0.5).total;
  auto r = p;
  ppo::OptimizerStates fresh;
  cfg.learning_rate = 1e-3;
  ppo::ppo_update(recs, adv, r, fresh, cfg, rng);
  CHECK(ppo::ppo_loss(r, b, 0.2, 0.5).total < before);
}

TEST_CASE("collect_epoch records") {
  env::ExplorationConfig ec;
  ec.layout_seed = 1;
  env::ExplorationEnv e(ec);
  human::HumanModel h({human::HumanKind::kExplorationStochastic, 2, 1.0, 0.2, 3}, oracles::geometry(e));
  std::vector<int> hidden = {64, 64};
  auto p = nn::init_parameters(static_cast<int>(e.observation_size()), 5, hidden, nn::Activation::kTanh, 1);
  ppo::TrainingConfig cfg;
  cfg.max_steps_per_episode = 5;
  cfg.seed = 9;
  ppo::RewardPlan plan;
  reward::WeightVector w{1.0, 1.0, 1.0, 0};
  std::mt19937_64 rng(5);
  auto recs = ppo::collect_epoch(e, p, h, 3, w, cfg, plan, rng);
  REQUIRE(recs.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(recs[i].t == 15 + i);
    CHECK(recs[i].env_t == i);
    CHECK(recs[i].done == (i == 4));
    CHECK(recs[i].reward.r_ai >= 0.0);
    CHECK(recs[i].reward.r_human >= 0.0);
    CHECK(recs[i].reward.r_combined ==
          Approx(recs[i].reward.r_ext + recs[i].reward.r_ai + recs[i].reward.r_human));
    CHECK(recs[i].log_prob_taken == Approx(std::log(nn::forward_policy(p, recs[i].obs_ai).probs[recs[i].action_ai])));
    if (i % 2 == 1) CHECK(recs[i].action_human == env::kExploreStay);
  }

  // Replaying the joint actions reproduces the observations and the
  // counterfactual queries.
  env::ExplorationEnv replay(ec);
  auto start = replay.reset(ppo::episode_seed(cfg.seed, 3, 0));
  CHECK(start.obs_ai.channels == recs[0].obs_ai);
  for (const auto& r : recs) {
    CHECK(replay.observe(env::Role::kAi).channels == r.obs_ai);
    CHECK(replay.counterfactual_observe_current(r.action_human).channels == r.cf_obs_ai);
    replay.step({r.action_ai, r.action_human});
  }

  human::HumanModel h2({human::HumanKind::kExplorationStochastic, 2, 1.0, 0.2, 3}, oracles::geometry(e));
  std::mt19937_64 rng2(5);
  auto again = ppo::collect_epoch(e, p, h2, 3, w, cfg, plan, rng2);
  for (int i = 0; i < 5; ++i) {
    CHECK(again[i].action_ai == recs[i].action_ai);
    CHECK(again[i].reward == recs[i].reward);
  }
}

TEST_CASE("baseline and causal plans ignore the intrinsic channels") {
  env::ExplorationConfig ec;
  ec.layout_seed = 2;
  env::ExplorationEnv e(ec);
  human::HumanModel h({human::HumanKind::kExplorationStochastic, 3, 1.0, 0.2, 3}, oracles::geometry(e));
  std::vector<int> hidden = {16};
  auto p = nn::init_parameters(static_cast<int>(e.observation_size()), 5, hidden, nn::Activation::kTanh, 1);
  ppo::TrainingConfig cfg;
  cfg.max_steps_per_episode = 12;
  ppo::RewardPlan plan;
  plan.algorithm = ppo::Algorithm::kPpoBaseline;
  std::mt19937_64 rng(1);
  for (const auto& r : ppo::collect_epoch(e, p, h, 0, {1, 1, 1, 0}, cfg, plan, rng)) {
    CHECK(r.reward.r_ai == 0.0);
    CHECK(r.reward.r_combined == r.reward.r_ext);
  }
  plan.algorithm = ppo::Algorithm::kCausal;
  plan.causal_coefficient = 2.0;
  for (const auto& r : ppo::collect_epoch(e, p, h, 0, {1, 1, 1, 0}, cfg, plan, rng)) {
    CHECK(r.r_causal >= 0.0);
    if ((r.env_t + 1) % 3 != 0) CHECK(r.r_causal == 0.0);
    CHECK(r.reward.r_combined == Approx(r.reward.r_ext + 2.0 * r.r_causal));
  }
  CHECK(ppo::plan_weights(ppo::RewardPlan{ppo::Algorithm::kBcrNoWeights, {}, 1.0}, std::nullopt, {}, 500) ==
        reward::WeightVector{1, 1, 1, 500});
}

TEST_CASE("zero intrinsic with no weighting phase reproduces the baseline log") {
  CHECK(oracles::zero_intrinsic_matches_baseline(3, 4) == "");
}

TEST_CASE("training with zero epochs and with an output directory") {
  Bandit b;
  auto h = uniform_human(b);
  ppo::TrainingConfig cfg;
  cfg.epochs = 0;
  cfg.max_steps_per_episode = 1;
  ppo::RewardPlan plan;
  auto r = ppo::train(b, h, cfg, plan);
  CHECK(r.metrics.empty());
  CHECK(r.params.observation_size() == 1);
  CHECK(r.params.action_count() == 2);
  CHECK(r.params.version == nn::PolicyParameters::kFormatVersion);

  auto dir = std::filesystem::temp_directory_path() / "bcr_ppo_train_test";
  std::filesystem::remove_all(dir);
  cfg.epochs = 7;
  cfg.episodes_per_epoch = 4;
  cfg.checkpoint_interval = 3;
  ppo::TrainOptions opts;
  opts.output_dir = dir;
  int seen = 0;
  opts.on_epoch = [&](const ppo::EpochMetrics&) { ++seen; };
  auto t = ppo::train(b, h, cfg, plan, opts);
  CHECK(t.metrics.size() == 7);
  CHECK(seen == 7);
  std::ifstream in(dir / "metrics.jsonl");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    CHECK(ppo::metrics_from_json_line(line).epoch == rows);
    ++rows;
  }
  CHECK(rows == 7);
  CHECK(std::filesystem::exists(dir / "checkpoints/final.ckpt"));
  CHECK(std::filesystem::exists(dir / "checkpoints/epoch_0003.ckpt"));
  CHECK(std::filesystem::exists(dir / "checkpoints/epoch_0006.ckpt"));
  std::filesystem::remove_all(dir);

  std::atomic<bool> stop{true};
  ppo::TrainOptions halted;
  halted.stop = &stop;
  auto s = ppo::train(b, h, cfg, plan, halted);
  CHECK(s.interrupted);
  CHECK(s.metrics.empty());
}

TEST_CASE("a two-armed bandit is learned") {
  Bandit b;
  auto h = uniform_human(b);
  ppo::TrainingConfig cfg;
  cfg.epochs = 200;
  cfg.episodes_per_epoch = 16;
  cfg.max_steps_per_episode = 1;
  cfg.minibatch_size = 16;
  cfg.learning_rate = 3e-3;
  cfg.hidden = {16};
  ppo::RewardPlan plan;
  plan.algorithm = ppo::Algorithm::kPpoBaseline;
  auto r = ppo::train(b, h, cfg, plan);
  std::vector<double> obs = {1.0};
  CHECK(nn::forward_policy(r.params, obs).probs[1] > 0.95);
  CHECK(r.metrics.back().mean_sparse > 15.0);

  auto ev = ppo::evaluate(b, h, r.params, 50, 1, 20.0);
  CHECK(ev.episodes == 50);
  CHECK(ev.per_episode.size() == 50);
  CHECK(ev.mean_sparse > 15.0);
  CHECK(ppo::evaluate(b, h, r.params, 50, 1, 20.0).per_episode == ev.per_episode);
  CHECK_THROWS_AS(ppo::evaluate(b, h, r.params, 0, 1, 20.0), ConfigError);
}

TEST_CASE("metrics line round trip") {
  ppo::EpochMetrics m;
  m.epoch = 12;
  m.mean_sparse = 40.0;
  m.k_ext = 1.25;
  m.ratio_ai = 0.1;
  m.steps = 400;
  m.prob_clamps = 3;
  m.wall_ms = 51.5;
  auto line = ppo::metrics_to_json_line(m);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(line.rfind("{\"epoch\":12", 0) == 0);
  CHECK(ppo::metrics_to_json_line(ppo::metrics_from_json_line(line)) == line);
  CHECK_THROWS(ppo::metrics_from_json_line("{\"epoch\":"));
}

TEST_CASE("training config validation and names") {
  ppo::TrainingConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.clip = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  for (auto a : {ppo::Algorithm::kBcr, ppo::Algorithm::kPpoBaseline, ppo::Algorithm::kCausal,
                 ppo::Algorithm::kBcrNoIntrinsic, ppo::Algorithm::kBcrNoWeights})
    CHECK(ppo::algorithm_from_string(ppo::to_string(a)) == a);
  CHECK_THROWS_AS(ppo::algorithm_from_string("dqn"), ConfigError);
}

}  // TEST_SUITE
