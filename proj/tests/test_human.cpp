#include "doctest.h"

#include "bcr/env/exploration.hpp"
#include "bcr/env/kitchen.hpp"
#include "bcr/errors.hpp"
#include "bcr/human/human_model.hpp"

#include <array>
#include <cmath>

using namespace bcr;
using namespace bcr::human;

namespace {

EnvGeometry geometry_of(const env::ExplorationEnv& e) {
  const auto& c = e.config();
  return {e.id(), c.layout ? c.layout->width : c.width, c.layout ? c.layout->height : c.height,
          e.action_count(), e.stay_action(), e.observation_size()};
}

EnvGeometry geometry_of(const env::KitchenEnv& k) {
  return {k.id(), k.config().layout.width, k.config().layout.height, k.action_count(),
          k.stay_action(), k.observation_size()};
}

}  // namespace

TEST_SUITE("human") {

TEST_CASE("off-period steps are a point mass on stay") {
  env::ExplorationEnv e;
  auto obs = e.reset(1).obs_human.channels;
  HumanModel m({HumanKind::kExplorationStochastic, 10, 1.0, 0.2, 5}, geometry_of(e));
  auto d = m.distribution(obs, 7);
  for (int a = 0; a < 5; ++a) CHECK(d.probs[a] == (a == env::kExploreStay ? 1.0 : 0.0));
  for (int i = 0; i < 20; ++i) CHECK(m.sample(obs, 13) == env::kExploreStay);
}

TEST_CASE("uniform model") {
  env::ExplorationEnv e;
  auto obs = e.reset(1).obs_human.channels;
  HumanModel m({HumanKind::kUniformRandom, 10, 1.0, 0.2, 3}, geometry_of(e));
  for (double p : m.distribution(obs, 10).probs) CHECK(p == doctest::Approx(0.2).epsilon(1e-15));

  std::array<int, 5> counts{};
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++counts[m.sample(obs, 10)];
  double chi2 = 0.0;
  for (int c : counts) {
    CHECK(std::abs(c / double(n) - 0.2) < 0.02);
    chi2 += (c - 2000.0) * (c - 2000.0) / 2000.0;
  }
  CHECK(chi2 < 18.47);  // 4 dof, p = 0.001
}

TEST_CASE("exploration policy support avoids blocked moves") {
  env::ExplorationConfig cfg;
  cfg.layout_seed = 3;
  cfg.obstacle_density = 0.2;
  env::ExplorationEnv e(cfg);
  HumanModel m({HumanKind::kExplorationStochastic, 1, 0.5, 0.2, 9}, geometry_of(e));
  std::mt19937_64 rng(2);
  e.reset(4);
  for (int step = 0; step < 200; ++step) {
    auto obs = e.observe(env::Role::kHuman).channels;
    auto d = m.distribution(obs, step);
    double sum = 0;
    for (double p : d.probs) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    const auto s = e.state();
    for (int a = 0; a < 4; ++a) {
      env::Cell target = env::step_cell(s.human_pos, a);
      bool bad = !s.grid.in_bounds(target) || s.grid.blocked[s.index(target)] ||
                 target == s.ai_pos;
      if (bad) CHECK(d.probs[a] == 0.0);
    }
    CHECK(d.probs[env::kExploreStay] > 0.0);
    e.step({static_cast<int>(rng() % 5), m.sample(obs, step)});
  }
}

TEST_CASE("exploration policy prefers moves toward unexplored cells") {
  env::ExplorationConfig cfg;
  cfg.layout = env::parse_layout(".....\n");
  env::ExplorationEnv e(cfg);
  e.reset(1);
  auto s = e.state();
  s.human_pos = {0, 2};
  s.ai_pos = {0, 4};
  std::fill(s.explored.begin(), s.explored.end(), 0);
  s.explored[2] = s.explored[3] = s.explored[4] = 1;
  HumanModel m({HumanKind::kExplorationStochastic, 1, 1.0, 0.2, 1}, geometry_of(e));
  auto d = m.distribution(env::encode_exploration(s, env::Role::kHuman).channels, 0);
  CHECK(d.probs[env::kLeft] > d.probs[env::kRight]);
  CHECK(d.probs[env::kLeft] > d.probs[env::kExploreStay]);
  CHECK(d.probs[env::kUp] == 0.0);
}

TEST_CASE("kitchen script without noise is deterministic") {
  env::KitchenEnv k;
  auto obs = k.reset(1).obs_human.channels;
  HumanModel m({HumanKind::kKitchenScripted, 1, 1.0, 0.0, 1}, geometry_of(k));
  auto d = m.distribution(obs, 0);
  const int a = kitchen_script_action(obs, k.config().layout.width, k.config().layout.height);
  CHECK(d.probs[a] == 1.0);
  HumanModel noisy({HumanKind::kKitchenScripted, 1, 1.0, 0.2, 1}, geometry_of(k));
  auto dn = noisy.distribution(obs, 0);
  CHECK(dn.probs[a] == doctest::Approx(0.8 + 0.2 / k.action_count()));
}

TEST_CASE("mismatched environments are contract errors") {
  env::ExplorationEnv e;
  env::KitchenEnv k;
  CHECK_THROWS_AS(HumanModel({HumanKind::kKitchenScripted, 1, 1.0, 0.2, 1}, geometry_of(e)),
                  ContractError);
  HumanModel m({HumanKind::kExplorationStochastic, 10, 1.0, 0.2, 1}, geometry_of(e));
  auto kobs = k.reset(1).obs_human.channels;
  CHECK_THROWS_AS(m.distribution(kobs, 0), ContractError);
  CHECK_THROWS_AS(HumanModel({HumanKind::kUniformRandom, 0, 1.0, 0.2, 1}, geometry_of(e)),
                  ConfigError);
}

TEST_CASE("sampling is reproducible from the seed") {
  env::ExplorationEnv e;
  auto obs = e.reset(2).obs_human.channels;
  HumanModel a({HumanKind::kExplorationStochastic, 1, 2.0, 0.2, 42}, geometry_of(e));
  HumanModel b({HumanKind::kExplorationStochastic, 1, 2.0, 0.2, 42}, geometry_of(e));
  for (int i = 0; i < 100; ++i) CHECK(a.sample(obs, i) == b.sample(obs, i));
  auto before = a.distribution(obs, 0);
  a.sample(obs, 0);
  CHECK(a.distribution(obs, 0).probs == before.probs);
}

}  // TEST_SUITE
