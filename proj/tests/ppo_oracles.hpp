#pragma once

// Independent reference computations for the learner, shared by the unit
// tests and the acceptance runner.

#include "bcr/env/exploration.hpp"
#include "bcr/human/human_model.hpp"
#include "bcr/nn/autodiff.hpp"
#include "bcr/nn/gradcheck.hpp"
#include "bcr/nn/network.hpp"
#include "bcr/ppo/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace oracles {

using namespace bcr;

// A_t = sum_l (gamma alpha)^l delta_{t+l} inside one episode, written as the
// plain double sum.
inline std::vector<double> gae_double_sum(const std::vector<double>& r, const std::vector<double>& v,
                                          double gamma, double alpha) {
  const std::size_t n = r.size();
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) delta[t] = r[t] + (t + 1 < n ? gamma * v[t + 1] : 0.0) - v[t];
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t l = 0; t + l < n; ++l) adv[t] += std::pow(gamma * alpha, double(l)) * delta[t + l];
  return adv;
}

inline std::vector<double> rtg_double_sum(const std::vector<double>& r, double gamma) {
  std::vector<double> g(r.size(), 0.0);
  for (std::size_t t = 0; t < r.size(); ++t)
    for (std::size_t k = t; k < r.size(); ++k) g[t] += std::pow(gamma, double(k - t)) * r[k];
  return g;
}

// Max absolute error of compute_gae / reward_to_go against the double sums
// over `episodes` random episodes of 1..max_len steps (several per batch).
inline double gae_oracle_max_error(int episodes, int max_len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len(1, max_len);
  std::uniform_real_distribution<double> u(-5.0, 5.0), g(0.8, 1.0), a(0.0, 1.0);
  double worst = 0.0;
  int done = 0;
  while (done < episodes) {
    const int in_batch = std::min(episodes - done, 1 + static_cast<int>(rng() % 4));
    const double gamma = g(rng), alpha = a(rng);
    std::vector<ppo::TransitionRecord> recs;
    std::vector<double> want_adv, want_ret;
    for (int e = 0; e < in_batch; ++e) {
      const int n = len(rng);
      std::vector<double> r(n), v(n);
      for (int t = 0; t < n; ++t) {
        r[t] = u(rng);
        v[t] = u(rng);
        ppo::TransitionRecord rec;
        rec.reward.r_combined = r[t];
        rec.value_estimate = v[t];
        rec.done = t + 1 == n;
        rec.episode = e;
        recs.push_back(rec);
      }
      auto ad = gae_double_sum(r, v, gamma, alpha);
      auto rt = rtg_double_sum(r, gamma);
      want_adv.insert(want_adv.end(), ad.begin(), ad.end());
      want_ret.insert(want_ret.end(), rt.begin(), rt.end());
    }
    auto got = ppo::compute_gae(recs, gamma, alpha);
    auto rtg = ppo::reward_to_go(recs, gamma);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      worst = std::max(worst, std::abs(got.advantages[i] - want_adv[i]));
      worst = std::max(worst, std::abs(got.returns[i] - want_ret[i]));
      worst = std::max(worst, std::abs(rtg[i] - want_ret[i]));
    }
    done += in_batch;
  }
  return worst;
}

inline std::vector<double> flatten(const nn::PolicyParameters& p) {
  std::vector<double> flat = p.actor_weights;
  flat.insert(flat.end(), p.critic_weights.begin(), p.critic_weights.end());
  return flat;
}

struct GradProblem {
  std::vector<double> point;
  nn::DifferentiableFn fn;
};

// The default 64x64 tanh actor-critic under a cross-entropy plus
// squared-error loss.
inline GradProblem actor_critic_problem(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> hidden = {64, 64};
  const int obs_size = 20;
  auto p = nn::init_parameters(obs_size, 5, hidden, nn::Activation::kTanh, seed + 1);
  nn::Matrix obs(6, obs_size);
  std::uniform_real_distribution<double> u(-1, 1);
  for (Eigen::Index i = 0; i < obs.size(); ++i) obs.data()[i] = u(rng);
  std::vector<int> actions = {0, 3, 1, 4, 2, 2};
  nn::Matrix targets(6, 1);
  for (int i = 0; i < 6; ++i) targets(i, 0) = 2 * u(rng);
  const std::size_t na = p.actor_weights.size();
  auto fn = [=](std::span<const double> flat) {
    nn::Tape tape;
    auto a = nn::bind_network(tape, p.actor_arch, flat.subspan(0, na));
    auto c = nn::bind_network(tape, p.critic_arch, flat.subspan(na));
    nn::Var x = tape.constant(obs);
    nn::Var lp = nn::gather_rows(nn::log_softmax_rows(nn::network_forward(tape, p.actor_arch, a, x)), actions);
    nn::Var v = nn::network_forward(tape, p.critic_arch, c, x);
    nn::Var loss = nn::add(nn::scale(nn::mean(lp), -1.0), nn::mean(nn::square(nn::sub(v, tape.constant(targets)))));
    tape.backward(loss);
    nn::LossAndGradient r;
    r.loss = loss.scalar();
    r.gradient.assign(flat.size(), 0.0);
    nn::collect_gradients(p.actor_arch, a, std::span<double>(r.gradient).subspan(0, na));
    nn::collect_gradients(p.critic_arch, c, std::span<double>(r.gradient).subspan(na));
    return r;
  };
  return {flatten(p), fn};
}

inline double actor_critic_gradcheck(std::size_t samples, std::uint64_t seed) {
  auto g = actor_critic_problem(seed);
  return nn::finite_diff_check(g.point, g.fn, samples, seed);
}

// Three-step surrogate batch whose probability ratios sit well inside and
// well outside the clip band.
inline ppo::SurrogateBatch surrogate_batch(const nn::PolicyParameters& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  ppo::SurrogateBatch b;
  b.obs.resize(3, p.observation_size());
  for (Eigen::Index i = 0; i < b.obs.size(); ++i) b.obs.data()[i] = u(rng);
  b.actions = {1, 4, 0};
  nn::Matrix probs = nn::policy_probs(p, b.obs);
  const double shift[3] = {std::log(1.6), std::log(0.95), std::log(0.6)};
  b.old_log_probs.resize(3);
  b.advantages.resize(3);
  b.returns.resize(3);
  for (int i = 0; i < 3; ++i) {
    b.old_log_probs(i) = std::log(probs(i, b.actions[i])) + shift[i];
    b.advantages(i) = i == 1 ? -0.8 : 1.3 - i;
    b.returns(i) = 2 * u(rng);
  }
  return b;
}

// The full PPO loss (clipped surrogate plus value term) on a three-step batch.
inline GradProblem surrogate_problem(std::uint64_t seed) {
  std::vector<int> hidden = {64, 64};
  auto p = nn::init_parameters(20, 5, hidden, nn::Activation::kTanh, seed + 3);
  // A non-trivial head so the ratios respond to the actor weights.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 0.05);
  for (double& w : p.actor_weights) w += nd(rng);
  auto batch = surrogate_batch(p, seed);
  const std::size_t na = p.actor_weights.size();
  auto fn = [=](std::span<const double> flat) {
    nn::PolicyParameters q = p;
    std::copy(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(na), q.actor_weights.begin());
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(na), flat.end(), q.critic_weights.begin());
    auto terms = ppo::ppo_loss(q, batch, 0.2, 0.5);
    nn::LossAndGradient r;
    r.loss = terms.total;
    r.gradient = terms.actor_grad;
    r.gradient.insert(r.gradient.end(), terms.critic_grad.begin(), terms.critic_grad.end());
    return r;
  };
  return {flatten(p), fn};
}

inline double surrogate_gradcheck(std::size_t samples, std::uint64_t seed) {
  auto g = surrogate_problem(seed);
  return nn::finite_diff_check(g.point, g.fn, samples, seed);
}

struct GradScan {
  double max_rel = 0.0;
  // Coordinates whose relative error exceeds the tolerance, and the largest
  // analytic magnitude / absolute discrepancy among them.
  int over = 0;
  double max_abs_grad_over = 0.0;
  double max_abs_diff_over = 0.0;
  std::size_t coords = 0;
};

// Every coordinate, central differences with step 1e-5.
inline GradScan full_scan(const GradProblem& g, double tol) {
  GradScan out;
  auto point = g.point;
  auto analytic = g.fn(point).gradient;
  out.coords = point.size();
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + 1e-5;
    const double up = g.fn(point).loss;
    point[i] = saved - 1e-5;
    const double down = g.fn(point).loss;
    point[i] = saved;
    const double diff = std::abs(analytic[i] - (up - down) / 2e-5);
    const double rel = diff / std::max(std::abs(analytic[i]), 1e-8);
    out.max_rel = std::max(out.max_rel, rel);
    if (rel > tol) {
      ++out.over;
      out.max_abs_grad_over = std::max(out.max_abs_grad_over, std::abs(analytic[i]));
      out.max_abs_diff_over = std::max(out.max_abs_diff_over, diff);
    }
  }
  return out;
}

inline human::EnvGeometry geometry(const env::ExplorationEnv& e) {
  const auto& c = e.config();
  return {e.id(), c.layout ? c.layout->width : c.width, c.layout ? c.layout->height : c.height,
          e.action_count(), e.stay_action(), e.observation_size()};
}

// Trains BCR with zero intrinsic coefficients and N_th = 0 next to the PPO
// baseline; returns a description of the first differing metric, or "".
inline std::string zero_intrinsic_matches_baseline(int epochs, std::uint64_t seed) {
  ppo::TrainingConfig cfg;
  cfg.epochs = epochs;
  cfg.max_steps_per_episode = 200;
  cfg.minibatch_size = 64;
  cfg.seed = seed;
  auto run = [&](ppo::Algorithm algo) {
    env::ExplorationConfig ec;
    ec.layout_seed = seed;
    env::ExplorationEnv e(ec);
    human::HumanModel h({human::HumanKind::kExplorationStochastic, 10, 1.0, 0.2, 0}, geometry(e));
    ppo::RewardPlan plan;
    plan.algorithm = algo;
    plan.bcr.lambda_ai = 0.0;
    plan.bcr.lambda_human = 0.0;
    plan.bcr.n_threshold = 0;
    plan.bcr.fade.horizon_steps = double(cfg.steps_per_epoch() * epochs);
    return ppo::train(e, h, cfg, plan);
  };
  auto a = run(ppo::Algorithm::kBcr);
  auto b = run(ppo::Algorithm::kPpoBaseline);
  if (a.metrics.size() != b.metrics.size()) return "row count differs";
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    auto x = a.metrics[i], y = b.metrics[i];
    x.wall_ms = y.wall_ms = 0.0;
    if (ppo::metrics_to_json_line(x) != ppo::metrics_to_json_line(y))
      return "epoch " + std::to_string(i) + ": " + ppo::metrics_to_json_line(x) + " vs " +
             ppo::metrics_to_json_line(y);
  }
  if (!(a.params == b.params)) return "final parameters differ";
  return "";
}

}  // namespace oracles
