#pragma once

// Cramped cooperative kitchen: fetch onions, fill the pot with three, wait
// for it to cook, scoop the soup onto a dish and deliver it to the serve
// window. Every served soup pays a shared sparse reward.
//
// Layout legend:
//   '.' floor   'X' counter   'O' onion dispenser   'D' dish dispenser
//   'P' pot     'S' serve window
//
// Agents only stand on floor. A move toward a non-floor cell turns the agent
// to face it without moving; "interact" acts on the faced cell.

#include "bcr/env/environment.hpp"
#include "bcr/env/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace bcr::env {

enum KitchenAction : int { kKitchenInteract = 4, kKitchenStay = 5 };
inline constexpr int kKitchenActionCount = 6;
inline constexpr int kSoupOnions = 3;
inline constexpr int kCookSteps = 20;
inline constexpr int kKitchenGridChannels = 7;
inline constexpr int kKitchenExtras = 22;

enum class Tile : std::uint8_t { kFloor, kCounter, kOnionDispenser, kDishDispenser, kPot, kServe };
enum class Item : std::uint8_t { kNone = 0, kOnion = 1, kDish = 2, kSoup = 3 };

struct KitchenLayout {
  int width = 0;
  int height = 0;
  std::vector<Tile> tiles;  // row-major
  Cell pot;

  Tile at(Cell c) const { return tiles[c.row * width + c.col]; }
  bool in_bounds(Cell c) const { return c.row >= 0 && c.row < height && c.col >= 0 && c.col < width; }
  bool operator==(const KitchenLayout&) const = default;
};

// Default 5x4 room with one pot, one onion and one dish dispenser and one
// serve window.
const char* default_kitchen_layout_text();
// Requires exactly one pot, at least one of each dispenser and serve window,
// and at least two floor cells.
KitchenLayout parse_kitchen_layout(const std::string& text);
std::string format_kitchen_layout(const KitchenLayout& layout);
KitchenLayout load_kitchen_layout(const std::filesystem::path& path);

struct KitchenAgent {
  Cell pos;
  int facing = kUp;
  Item held = Item::kNone;
  bool operator==(const KitchenAgent&) const = default;
};

struct KitchenState {
  KitchenLayout layout;
  KitchenAgent ai;
  KitchenAgent human;
  int pot_onions = 0;
  int pot_timer = 0;
  int t = 0;
  // Bookkeeping for conservation checks.
  int onions_dispensed = 0;
  int soups_served = 0;

  bool soup_ready() const { return pot_onions == kSoupOnions && pot_timer >= kCookSteps; }
  bool operator==(const KitchenState&) const = default;
};

struct StageRewards {
  double onion_into_pot = 3.0;
  double dish_pickup = 3.0;
  double soup_pickup = 5.0;
};

struct KitchenRewards {
  StageRewards stage;
  double sparse = 20.0;
};

// Advances one joint step: movement, then interactions (AI first), then the
// pot clock. Emits stage events per acting agent and a shared sparse event
// per served soup. Advances t.
std::vector<RewardEvent> kitchen_step(KitchenState& state, const JointAction& action,
                                      const KitchenRewards& rewards);

Observation encode_kitchen(const KitchenState& state, Role role);

// Decoded view of an encoded kitchen observation, for scripted partners.
struct KitchenView {
  KitchenLayout layout;
  KitchenAgent self;
  KitchenAgent partner;
  int pot_onions = 0;
  bool soup_ready = false;
};
KitchenView decode_kitchen_observation(std::span<const double> channels, int width, int height);

struct KitchenConfig {
  KitchenLayout layout = parse_kitchen_layout(default_kitchen_layout_text());
  int horizon = 400;
  KitchenRewards rewards;
};

class KitchenEnv final : public Environment {
 public:
  explicit KitchenEnv(KitchenConfig config = {});

  std::string id() const override { return "mini-kitchen"; }
  int action_count() const override { return kKitchenActionCount; }
  int stay_action() const override { return kKitchenStay; }
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

  const KitchenState& state() const { return state_; }
  // Test hook: replace the live state (layout must match).
  void set_state(const KitchenState& state);
  const KitchenConfig& config() const { return config_; }

 private:
  KitchenState decode(const EnvSnapshot& snapshot, std::mt19937_64* rng) const;
  Observation counterfactual_from(KitchenState state, int human_action) const;

  KitchenConfig config_;
  KitchenState state_;
  std::mt19937_64 rng_;
  bool started_ = false;
};

}  // namespace bcr::env
