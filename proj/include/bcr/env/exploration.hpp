#pragma once

// Cooperative coverage gridworld. Two agents move (up, down, left, right,
// stay) and jointly try to visit every accessible cell. Covering the board
// pays a shared sparse reward and starts a new round on the same obstacle
// layout; the episode clock keeps running across rounds.

#include "bcr/env/environment.hpp"
#include "bcr/env/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace bcr::env {

enum ExplorationAction : int { kExploreStay = 4 };
inline constexpr int kExplorationActionCount = 5;
// Observation: four row-major planes (self, partner, obstacles, explored)
// followed by a (2r+1)^2 window centred on the observer with three layers
// (blocked or off-board, unexplored free cell, partner).
inline constexpr int kExplorationChannels = 4;
inline constexpr int kExplorationWindowRadius = 2;
inline constexpr int kExplorationWindowLayers = 3;
std::size_t exploration_observation_size(int width, int height);

struct ObstacleGrid {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> blocked;  // row-major, 1 = obstacle

  bool is_blocked(Cell c) const { return blocked[c.row * width + c.col] != 0; }
  bool in_bounds(Cell c) const { return c.row >= 0 && c.row < height && c.col >= 0 && c.col < width; }
  int free_count() const;
  bool operator==(const ObstacleGrid&) const = default;
};

// Random obstacle placement with a connected free region of at least two
// cells. density in [0, 0.3]. Throws GenerationError after bounded retries.
ObstacleGrid generate_layout(std::uint64_t seed, int width, int height, double obstacle_density);

// Flood fill from the first free cell.
bool is_connected(const ObstacleGrid& grid);

// Layout text: one line per row, '#' obstacle, '.' free.
ObstacleGrid parse_layout(const std::string& text);
std::string format_layout(const ObstacleGrid& grid);
ObstacleGrid load_layout(const std::filesystem::path& path);

struct ExplorationRewards {
  double new_cell = 2.0;
  double revisit = -0.5;
  double invalid = -1.0;
  double sparse = 20.0;
};

struct ExplorationState {
  ObstacleGrid grid;
  std::vector<std::uint8_t> explored;  // row-major
  Cell ai_pos;
  Cell human_pos;
  int t = 0;
  int rounds_completed = 0;

  int index(Cell c) const { return c.row * grid.width + c.col; }
  bool is_explored(Cell c) const { return explored[index(c)] != 0; }
  int accessible_count() const { return grid.free_count(); }
  int explored_count() const;
  bool operator==(const ExplorationState&) const = default;
};

// Resolves one simultaneous move. Events are attributed per agent:
// new-cell, revisit, or invalid (boundary, obstacle, other agent, both
// agents targeting the same cell, or "stay"). Does not advance t.
std::vector<RewardEvent> apply_joint_move(ExplorationState& state, const JointAction& action,
                                          const ExplorationRewards& rewards);

// If every accessible cell is explored: appends a shared sparse event, clears
// the explored mask, re-places both agents on distinct random free cells
// (marking them explored) and bumps rounds_completed. Returns whether it fired.
bool completion_check(ExplorationState& state, std::mt19937_64& rng,
                      std::vector<RewardEvent>& events, const ExplorationRewards& rewards);

// Places the agents uniformly at random on two distinct free cells.
void place_agents(ExplorationState& state, std::mt19937_64& rng);

// Encodes `state` from the viewpoint of `role`.
Observation encode_exploration(const ExplorationState& state, Role role);

struct ExplorationConfig {
  int width = 8;
  int height = 8;
  double obstacle_density = 0.1;
  int horizon = 400;
  // When set, every reset uses this layout seed; otherwise the reset seed
  // also seeds the layout.
  std::optional<std::uint64_t> layout_seed;
  // A fixed layout takes precedence over generation.
  std::optional<ObstacleGrid> layout;
  ExplorationRewards rewards;
};

class ExplorationEnv final : public Environment {
 public:
  explicit ExplorationEnv(ExplorationConfig config = {});

  std::string id() const override { return "exploration"; }
  int action_count() const override { return kExplorationActionCount; }
  int stay_action() const override { return kExploreStay; }
  std::size_t observation_size() const override;
  int horizon() const override { return config_.horizon; }
  int time() const override { return state_.t; }
  bool done() const override { return state_.t >= config_.horizon; }

  ResetResult reset(std::uint64_t seed) override;
  StepOutcome step(const JointAction& action) override;
  Observation observe(Role role) const override;
  Observation counterfactual_observe(const EnvSnapshot& snapshot, int human_action) const override;
  Observation counterfactual_observe_current(int human_action) const override;
  EnvSnapshot snapshot() const override;
  void restore(const EnvSnapshot& snapshot) override;
  std::unique_ptr<Environment> clone() const override;

  const ExplorationState& state() const { return state_; }
  const ExplorationConfig& config() const { return config_; }

 private:
  ExplorationState decode(const EnvSnapshot& snapshot, std::mt19937_64* rng) const;
  Observation counterfactual_from(ExplorationState state, int human_action) const;

  ExplorationConfig config_;
  ExplorationState state_;
  std::mt19937_64 rng_;
  bool started_ = false;
};

}  // namespace bcr::env
