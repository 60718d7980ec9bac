#include "bcr/env/exploration.hpp"

#include "bcr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

namespace bcr::env {

int ObstacleGrid::free_count() const {
  return static_cast<int>(std::count(blocked.begin(), blocked.end(), std::uint8_t{0}));
}

bool is_connected(const ObstacleGrid& grid) {
  const int n = grid.width * grid.height;
  int start = -1;
  for (int i = 0; i < n; ++i) {
    if (!grid.blocked[i]) {
      start = i;
      break;
    }
  }
  if (start < 0) return false;
  std::vector<std::uint8_t> seen(n, 0);
  std::deque<int> queue{start};
  seen[start] = 1;
  int reached = 1;
  while (!queue.empty()) {
    const int i = queue.front();
    queue.pop_front();
    const Cell c{i / grid.width, i % grid.width};
    for (int m = 0; m < 4; ++m) {
      const Cell nb = step_cell(c, m);
      if (!grid.in_bounds(nb) || grid.is_blocked(nb)) continue;
      const int j = nb.row * grid.width + nb.col;
      if (seen[j]) continue;
      seen[j] = 1;
      ++reached;
      queue.push_back(j);
    }
  }
  return reached == grid.free_count();
}

ObstacleGrid generate_layout(std::uint64_t seed, int width, int height, double obstacle_density) {
  if (width <= 0 || height <= 0) throw GenerationError("grid dimensions must be positive");
  if (width * height < 2) throw GenerationError("grid needs at least two cells");
  if (!(obstacle_density >= 0.0 && obstacle_density <= 0.3)) {
    throw GenerationError("obstacle density must lie in [0, 0.3]");
  }
  const int cells = width * height;
  const int obstacles = static_cast<int>(std::lround(obstacle_density * cells));
  std::mt19937_64 rng(seed);
  std::vector<int> order(cells);
  for (int attempt = 0; attempt < 200; ++attempt) {
    for (int i = 0; i < cells; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    ObstacleGrid grid{width, height, std::vector<std::uint8_t>(cells, 0)};
    for (int k = 0; k < obstacles; ++k) grid.blocked[order[k]] = 1;
    if (grid.free_count() >= 2 && is_connected(grid)) return grid;
  }
  throw GenerationError("no connected layout found for density " + std::to_string(obstacle_density));
}

ObstacleGrid parse_layout(const std::string& text) {
  ObstacleGrid grid;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (grid.width == 0) grid.width = static_cast<int>(line.size());
    if (static_cast<int>(line.size()) != grid.width) throw FormatError("ragged layout row");
    for (char ch : line) {
      if (ch == '#') {
        grid.blocked.push_back(1);
      } else if (ch == '.') {
        grid.blocked.push_back(0);
      } else {
        throw FormatError(std::string("unknown layout character '") + ch + "'");
      }
    }
    ++grid.height;
  }
  if (grid.height == 0) throw FormatError("empty layout");
  if (grid.free_count() < 2) throw FormatError("layout needs at least two free cells");
  if (!is_connected(grid)) throw FormatError("layout free region is not connected");
  return grid;
}

std::string format_layout(const ObstacleGrid& grid) {
  std::string out;
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) out += grid.blocked[r * grid.width + c] ? '#' : '.';
    out += '\n';
  }
  return out;
}

ObstacleGrid load_layout(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open layout " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_layout(ss.str());
}

int ExplorationState::explored_count() const {
  return static_cast<int>(std::count(explored.begin(), explored.end(), std::uint8_t{1}));
}

namespace {

struct Intent {
  Cell target;
  bool valid;
};

Intent resolve_intent(const ExplorationState& s, Cell self, Cell other, int action) {
  if (action == kExploreStay) return {self, false};
  const Cell target = step_cell(self, action);
  if (!s.grid.in_bounds(target) || s.grid.is_blocked(target) || target == other) {
    return {self, false};
  }
  return {target, true};
}

void enter(ExplorationState& s, Cell& pos, Cell target, Attribution who,
           const ExplorationRewards& rewards, std::vector<RewardEvent>& events) {
  pos = target;
  if (s.is_explored(target)) {
    events.push_back({EventKind::kRevisit, who, rewards.revisit, ""});
  } else {
    s.explored[s.index(target)] = 1;
    events.push_back({EventKind::kNewCell, who, rewards.new_cell, ""});
  }
}

}  // namespace

std::vector<RewardEvent> apply_joint_move(ExplorationState& state, const JointAction& action,
                                          const ExplorationRewards& rewards) {
  Intent ai = resolve_intent(state, state.ai_pos, state.human_pos, action.ai_action);
  Intent human = resolve_intent(state, state.human_pos, state.ai_pos, action.human_action);
  if (ai.valid && human.valid && ai.target == human.target) {
    ai.valid = false;
    human.valid = false;
  }
  std::vector<RewardEvent> events;
  if (ai.valid) {
    enter(state, state.ai_pos, ai.target, Attribution::kAi, rewards, events);
  } else {
    events.push_back({EventKind::kInvalid, Attribution::kAi, rewards.invalid, ""});
  }
  if (human.valid) {
    enter(state, state.human_pos, human.target, Attribution::kHuman, rewards, events);
  } else {
    events.push_back({EventKind::kInvalid, Attribution::kHuman, rewards.invalid, ""});
  }
  return events;
}

void place_agents(ExplorationState& state, std::mt19937_64& rng) {
  std::vector<int> free_cells;
  for (int i = 0; i < state.grid.width * state.grid.height; ++i) {
    if (!state.grid.blocked[i]) free_cells.push_back(i);
  }
  if (free_cells.size() < 2) throw ContractError("need two free cells to place agents");
  std::uniform_int_distribution<std::size_t> pick(0, free_cells.size() - 1);
  const std::size_t a = pick(rng);
  std::size_t h = pick(rng);
  while (h == a) h = pick(rng);
  const int w = state.grid.width;
  state.ai_pos = Cell{free_cells[a] / w, free_cells[a] % w};
  state.human_pos = Cell{free_cells[h] / w, free_cells[h] % w};
  state.explored[state.index(state.ai_pos)] = 1;
  state.explored[state.index(state.human_pos)] = 1;
}

bool completion_check(ExplorationState& state, std::mt19937_64& rng,
                      std::vector<RewardEvent>& events, const ExplorationRewards& rewards) {
  if (state.explored_count() < state.accessible_count()) return false;
  events.push_back({EventKind::kSparse, Attribution::kShared, rewards.sparse, ""});
  std::fill(state.explored.begin(), state.explored.end(), std::uint8_t{0});
  place_agents(state, rng);
  ++state.rounds_completed;
  return true;
}

Observation encode_exploration(const ExplorationState& state, Role role) {
  const int plane = state.grid.width * state.grid.height;
  Observation obs;
  obs.t = state.t;
  obs.channels.assign(exploration_observation_size(state.grid.width, state.grid.height), 0.0);
  const Cell self = role == Role::kAi ? state.ai_pos : state.human_pos;
  const Cell other = role == Role::kAi ? state.human_pos : state.ai_pos;
  obs.channels[state.index(self)] = 1.0;
  obs.channels[plane + state.index(other)] = 1.0;
  for (int i = 0; i < plane; ++i) {
    obs.channels[2 * plane + i] = state.grid.blocked[i];
    obs.channels[3 * plane + i] = state.explored[i];
  }
  constexpr int side = 2 * kExplorationWindowRadius + 1;
  double* window = obs.channels.data() + static_cast<std::size_t>(kExplorationChannels) * plane;
  for (int dr = -kExplorationWindowRadius; dr <= kExplorationWindowRadius; ++dr) {
    for (int dc = -kExplorationWindowRadius; dc <= kExplorationWindowRadius; ++dc) {
      const int w = (dr + kExplorationWindowRadius) * side + dc + kExplorationWindowRadius;
      const Cell c{self.row + dr, self.col + dc};
      if (!state.grid.in_bounds(c) || state.grid.is_blocked(c)) {
        window[w] = 1.0;
        continue;
      }
      if (!state.is_explored(c)) window[side * side + w] = 1.0;
      if (c == other) window[2 * side * side + w] = 1.0;
    }
  }
  return obs;
}

std::size_t exploration_observation_size(int width, int height) {
  constexpr int side = 2 * kExplorationWindowRadius + 1;
  return static_cast<std::size_t>(kExplorationChannels) * width * height +
         static_cast<std::size_t>(kExplorationWindowLayers) * side * side;
}

ExplorationEnv::ExplorationEnv(ExplorationConfig config) : config_(std::move(config)) {
  if (config_.layout) {
    config_.width = config_.layout->width;
    config_.height = config_.layout->height;
  }
  if (config_.width <= 0 || config_.height <= 0) throw ConfigError("grid dimensions must be positive");
  if (config_.horizon <= 0) throw ConfigError("horizon must be positive");
}

std::size_t ExplorationEnv::observation_size() const {
  return exploration_observation_size(config_.width, config_.height);
}

ResetResult ExplorationEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  ExplorationState s;
  if (config_.layout) {
    s.grid = *config_.layout;
  } else {
    s.grid = generate_layout(config_.layout_seed.value_or(seed), config_.width, config_.height,
                             config_.obstacle_density);
  }
  s.explored.assign(s.grid.blocked.size(), 0);
  place_agents(s, rng_);
  state_ = std::move(s);
  started_ = true;
  return ResetResult{observe(Role::kAi), observe(Role::kHuman), snapshot()};
}

StepOutcome ExplorationEnv::step(const JointAction& action) {
  if (!started_) throw ContractError("step before reset");
  if (done()) throw EpisodeOverError("exploration episode already finished");
  check_joint(action);
  StepOutcome out;
  out.events = apply_joint_move(state_, action, config_.rewards);
  completion_check(state_, rng_, out.events, config_.rewards);
  ++state_.t;
  out.done = done();
  out.obs_ai = observe(Role::kAi);
  out.obs_human = observe(Role::kHuman);
  return out;
}

Observation ExplorationEnv::observe(Role role) const {
  if (!started_) throw ContractError("observe before reset");
  return encode_exploration(state_, role);
}

Observation ExplorationEnv::counterfactual_from(ExplorationState s, int human_action) const {
  check_action(human_action, "human");
  const Intent human = resolve_intent(s, s.human_pos, s.ai_pos, human_action);
  if (human.valid) {
    s.human_pos = human.target;
    s.explored[s.index(human.target)] = 1;
  }
  return encode_exploration(s, Role::kAi);
}

Observation ExplorationEnv::counterfactual_observe(const EnvSnapshot& snapshot,
                                                   int human_action) const {
  return counterfactual_from(decode(snapshot, nullptr), human_action);
}

Observation ExplorationEnv::counterfactual_observe_current(int human_action) const {
  if (!started_) throw ContractError("counterfactual before reset");
  return counterfactual_from(state_, human_action);
}

EnvSnapshot ExplorationEnv::snapshot() const {
  ByteWriter w = begin_snapshot(id());
  w.i32(state_.grid.width);
  w.i32(state_.grid.height);
  for (std::size_t i = 0; i < state_.grid.blocked.size(); ++i) {
    w.u8(state_.grid.blocked[i]);
    w.u8(state_.explored[i]);
  }
  w.i32(state_.ai_pos.row);
  w.i32(state_.ai_pos.col);
  w.i32(state_.human_pos.row);
  w.i32(state_.human_pos.col);
  w.i32(state_.t);
  w.i32(state_.rounds_completed);
  w.str(rng_state(rng_));
  return EnvSnapshot{w.take()};
}

ExplorationState ExplorationEnv::decode(const EnvSnapshot& snapshot, std::mt19937_64* rng) const {
  ByteReader r = open_snapshot(snapshot, id());
  ExplorationState s;
  s.grid.width = r.i32();
  s.grid.height = r.i32();
  if (s.grid.width <= 0 || s.grid.height <= 0 || s.grid.width > 4096 || s.grid.height > 4096) {
    throw FormatError("implausible grid size in snapshot");
  }
  const std::size_t cells = static_cast<std::size_t>(s.grid.width) * s.grid.height;
  s.grid.blocked.resize(cells);
  s.explored.resize(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    s.grid.blocked[i] = r.u8();
    s.explored[i] = r.u8();
  }
  s.ai_pos = Cell{r.i32(), r.i32()};
  s.human_pos = Cell{r.i32(), r.i32()};
  s.t = r.i32();
  s.rounds_completed = r.i32();
  const std::string rng_text = r.str();
  if (!r.done()) throw FormatError("trailing bytes in exploration snapshot");
  if (!s.grid.in_bounds(s.ai_pos) || !s.grid.in_bounds(s.human_pos)) {
    throw FormatError("agent position outside grid in snapshot");
  }
  if (rng) set_rng_state(*rng, rng_text);
  return s;
}

void ExplorationEnv::restore(const EnvSnapshot& snapshot) {
  std::mt19937_64 rng;
  ExplorationState s = decode(snapshot, &rng);
  if (s.grid.width != config_.width || s.grid.height != config_.height) {
    throw FormatError("snapshot grid size differs from environment configuration");
  }
  state_ = std::move(s);
  rng_ = rng;
  started_ = true;
}

std::unique_ptr<Environment> ExplorationEnv::clone() const {
  return std::make_unique<ExplorationEnv>(*this);
}

}  // namespace bcr::env
