#include "bcr/human/human_model.hpp"

#include "bcr/env/exploration.hpp"
#include "bcr/env/kitchen.hpp"
#include "bcr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace bcr::human {

std::string to_string(HumanKind kind) {
  switch (kind) {
    case HumanKind::kExplorationStochastic: return "exploration-stochastic";
    case HumanKind::kKitchenScripted: return "kitchen-scripted";
    case HumanKind::kUniformRandom: return "uniform-random";
  }
  return "unknown";
}

HumanKind human_kind_from_string(const std::string& name) {
  if (name == "exploration-stochastic") return HumanKind::kExplorationStochastic;
  if (name == "kitchen-scripted") return HumanKind::kKitchenScripted;
  if (name == "uniform-random") return HumanKind::kUniformRandom;
  throw ConfigError("unknown human model kind '" + name + "'");
}

HumanModel::HumanModel(HumanModelSpec spec, EnvGeometry geometry)
    : spec_(spec), geometry_(std::move(geometry)), rng_(spec.seed) {
  if (spec_.period < 1) throw ConfigError("human period must be >= 1");
  if (!(spec_.temperature > 0.0)) throw ConfigError("human temperature must be > 0");
  if (!(spec_.epsilon >= 0.0 && spec_.epsilon <= 1.0)) throw ConfigError("human epsilon must lie in [0, 1]");
  if (spec_.kind == HumanKind::kExplorationStochastic && geometry_.env_id != "exploration") {
    throw ContractError("exploration-stochastic human needs the exploration environment");
  }
  if (spec_.kind == HumanKind::kKitchenScripted && geometry_.env_id != "mini-kitchen") {
    throw ContractError("kitchen-scripted human needs the mini-kitchen environment");
  }
  if (geometry_.action_count <= 0) throw ContractError("environment has no actions");
}

nn::ActionDistribution HumanModel::distribution(std::span<const double> obs, int t) const {
  if (obs.size() != geometry_.observation_size) {
    throw ContractError("observation of length " + std::to_string(obs.size()) +
                        " does not match " + geometry_.env_id + " (" +
                        std::to_string(geometry_.observation_size) + ")");
  }
  const int n = geometry_.action_count;
  if (t % spec_.period != 0) {
    nn::ActionDistribution stay{std::vector<double>(n, 0.0)};
    stay.probs[geometry_.stay_action] = 1.0;
    return stay;
  }
  switch (spec_.kind) {
    case HumanKind::kUniformRandom:
      return nn::ActionDistribution{std::vector<double>(n, 1.0 / n)};
    case HumanKind::kExplorationStochastic:
      return exploration_policy(obs);
    case HumanKind::kKitchenScripted:
      return kitchen_policy(obs);
  }
  throw ContractError("unhandled human model kind");
}

int HumanModel::sample(std::span<const double> obs, int t) {
  const nn::ActionDistribution d = distribution(obs, t);
  std::discrete_distribution<int> pick(d.probs.begin(), d.probs.end());
  return pick(rng_);
}

nn::ActionDistribution HumanModel::exploration_policy(std::span<const double> obs) const {
  using env::Cell;
  const int w = geometry_.width;
  const int h = geometry_.height;
  const int plane = w * h;
  Cell self{}, partner{};
  for (int i = 0; i < plane; ++i) {
    if (obs[i] > 0.5) self = Cell{i / w, i % w};
    if (obs[plane + i] > 0.5) partner = Cell{i / w, i % w};
  }
  auto blocked = [&](Cell c) { return obs[2 * plane + c.row * w + c.col] > 0.5; };
  auto in_bounds = [&](Cell c) { return c.row >= 0 && c.row < h && c.col >= 0 && c.col < w; };

  // Multi-source BFS distance to the nearest unexplored free cell.
  constexpr int kFar = std::numeric_limits<int>::max();
  std::vector<int> dist(plane, kFar);
  std::deque<Cell> queue;
  for (int i = 0; i < plane; ++i) {
    if (obs[2 * plane + i] < 0.5 && obs[3 * plane + i] < 0.5) {
      dist[i] = 0;
      queue.push_back(Cell{i / w, i % w});
    }
  }
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    for (int m = 0; m < 4; ++m) {
      const Cell nb = env::step_cell(c, m);
      if (!in_bounds(nb) || blocked(nb)) continue;
      int& d = dist[nb.row * w + nb.col];
      if (d != kFar) continue;
      d = dist[c.row * w + c.col] + 1;
      queue.push_back(nb);
    }
  }

  const int n = geometry_.action_count;
  std::vector<double> score(n, 0.0);
  std::vector<bool> allowed(n, false);
  auto score_of = [&](Cell c) {
    const int d = dist[c.row * w + c.col];
    return d == kFar ? 0.0 : -static_cast<double>(d);
  };
  for (int m = 0; m < 4; ++m) {
    const Cell target = env::step_cell(self, m);
    if (!in_bounds(target) || blocked(target) || target == partner) continue;
    allowed[m] = true;
    score[m] = score_of(target);
  }
  allowed[geometry_.stay_action] = true;
  score[geometry_.stay_action] = score_of(self) - 1.0;

  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < n; ++a) {
    if (allowed[a]) best = std::max(best, score[a]);
  }
  std::vector<double> probs(n, 0.0);
  double total = 0.0;
  for (int a = 0; a < n; ++a) {
    if (!allowed[a]) continue;
    probs[a] = std::exp((score[a] - best) / spec_.temperature);
    total += probs[a];
  }
  for (double& p : probs) p /= total;
  return nn::ActionDistribution{std::move(probs)};
}

namespace {

using env::Cell;
using env::Item;
using env::KitchenView;
using env::Tile;

// First action on a shortest floor path from `from` to a floor cell adjacent
// to any tile of kind `goal`, followed by facing and interacting. Returns
// stay when unreachable.
int navigate(const KitchenView& v, Tile goal, bool interact_when_there) {
  const int w = v.layout.width;
  const int h = v.layout.height;
  auto in_bounds = [&](Cell c) { return c.row >= 0 && c.row < h && c.col >= 0 && c.col < w; };
  auto tile = [&](Cell c) { return v.layout.tiles[c.row * w + c.col]; };

  // Facing direction toward an adjacent goal tile from `c`, or -1.
  auto goal_dir = [&](Cell c) {
    for (int m = 0; m < 4; ++m) {
      const Cell nb = env::step_cell(c, m);
      if (in_bounds(nb) && tile(nb) == goal) return m;
    }
    return -1;
  };

  const int here = goal_dir(v.self.pos);
  if (here >= 0) {
    if (v.self.facing != here) return here;  // turns in place: the goal is not floor
    return interact_when_there ? env::kKitchenInteract : env::kKitchenStay;
  }

  std::vector<int> first(w * h, -1);
  std::vector<bool> seen(w * h, false);
  std::deque<Cell> queue;
  seen[v.self.pos.row * w + v.self.pos.col] = true;
  for (int m = 0; m < 4; ++m) {
    const Cell nb = env::step_cell(v.self.pos, m);
    if (!in_bounds(nb) || tile(nb) != Tile::kFloor || nb == v.partner.pos) continue;
    const int i = nb.row * w + nb.col;
    seen[i] = true;
    first[i] = m;
    queue.push_back(nb);
  }
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    const int ci = c.row * w + c.col;
    if (goal_dir(c) >= 0) return first[ci];
    for (int m = 0; m < 4; ++m) {
      const Cell nb = env::step_cell(c, m);
      if (!in_bounds(nb) || tile(nb) != Tile::kFloor || nb == v.partner.pos) continue;
      const int i = nb.row * w + nb.col;
      if (seen[i]) continue;
      seen[i] = true;
      first[i] = first[ci];
      queue.push_back(nb);
    }
  }
  return env::kKitchenStay;
}

}  // namespace

int kitchen_script_action(std::span<const double> obs, int width, int height) {
  const KitchenView v = env::decode_kitchen_observation(obs, width, height);
  switch (v.self.held) {
    case Item::kSoup:
      return navigate(v, Tile::kServe, true);
    case Item::kDish:
      return navigate(v, Tile::kPot, v.soup_ready);
    case Item::kOnion:
      return navigate(v, Tile::kPot, v.pot_onions < env::kSoupOnions);
    case Item::kNone:
      if (v.pot_onions == env::kSoupOnions && v.partner.held != Item::kDish) {
        return navigate(v, Tile::kDishDispenser, true);
      }
      if (v.pot_onions < env::kSoupOnions) return navigate(v, Tile::kOnionDispenser, true);
      return env::kKitchenStay;
  }
  return env::kKitchenStay;
}

nn::ActionDistribution HumanModel::kitchen_policy(std::span<const double> obs) const {
  const int n = geometry_.action_count;
  const int scripted = kitchen_script_action(obs, geometry_.width, geometry_.height);
  std::vector<double> probs(n, spec_.epsilon / n);
  probs[scripted] += 1.0 - spec_.epsilon;
  return nn::ActionDistribution{std::move(probs)};
}

nn::ActionDistribution human_action_distribution(const HumanModel& model,
                                                 std::span<const double> obs, int t) {
  return model.distribution(obs, t);
}

int sample_human_action(HumanModel& model, std::span<const double> obs, int t) {
  return model.sample(obs, t);
}

}  // namespace bcr::human
