#include "bcr/env/kitchen.hpp"

#include "bcr/errors.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace bcr::env {

const char* default_kitchen_layout_text() {
  return "XXPXX\n"
         "O...X\n"
         "X...X\n"
         "XDXSX\n";
}

namespace {

char tile_char(Tile t) {
  switch (t) {
    case Tile::kFloor: return '.';
    case Tile::kCounter: return 'X';
    case Tile::kOnionDispenser: return 'O';
    case Tile::kDishDispenser: return 'D';
    case Tile::kPot: return 'P';
    case Tile::kServe: return 'S';
  }
  return '?';
}

Tile tile_from_char(char ch) {
  switch (ch) {
    case '.': return Tile::kFloor;
    case 'X': return Tile::kCounter;
    case 'O': return Tile::kOnionDispenser;
    case 'D': return Tile::kDishDispenser;
    case 'P': return Tile::kPot;
    case 'S': return Tile::kServe;
    default: throw FormatError(std::string("unknown kitchen layout character '") + ch + "'");
  }
}

}  // namespace

KitchenLayout parse_kitchen_layout(const std::string& text) {
  KitchenLayout layout;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (layout.width == 0) layout.width = static_cast<int>(line.size());
    if (static_cast<int>(line.size()) != layout.width) throw FormatError("ragged kitchen row");
    for (char ch : line) layout.tiles.push_back(tile_from_char(ch));
    ++layout.height;
  }
  auto count = [&](Tile t) { return std::count(layout.tiles.begin(), layout.tiles.end(), t); };
  if (count(Tile::kPot) != 1) throw FormatError("kitchen needs exactly one pot");
  if (count(Tile::kOnionDispenser) < 1 || count(Tile::kDishDispenser) < 1 || count(Tile::kServe) < 1) {
    throw FormatError("kitchen needs an onion dispenser, a dish dispenser and a serve window");
  }
  if (count(Tile::kFloor) < 2) throw FormatError("kitchen needs at least two floor cells");
  const auto pot = std::find(layout.tiles.begin(), layout.tiles.end(), Tile::kPot) - layout.tiles.begin();
  layout.pot = Cell{static_cast<int>(pot) / layout.width, static_cast<int>(pot) % layout.width};
  return layout;
}

std::string format_kitchen_layout(const KitchenLayout& layout) {
  std::string out;
  for (int r = 0; r < layout.height; ++r) {
    for (int c = 0; c < layout.width; ++c) out += tile_char(layout.tiles[r * layout.width + c]);
    out += '\n';
  }
  return out;
}

KitchenLayout load_kitchen_layout(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open kitchen layout " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_kitchen_layout(ss.str());
}

namespace {

void interact(KitchenState& s, KitchenAgent& agent, Attribution who, const KitchenRewards& rewards,
              bool& filled_now, std::vector<RewardEvent>& events) {
  const Cell faced = step_cell(agent.pos, agent.facing);
  if (!s.layout.in_bounds(faced)) return;
  switch (s.layout.at(faced)) {
    case Tile::kOnionDispenser:
      if (agent.held == Item::kNone) {
        agent.held = Item::kOnion;
        ++s.onions_dispensed;
      }
      break;
    case Tile::kDishDispenser:
      if (agent.held == Item::kNone) {
        agent.held = Item::kDish;
        events.push_back({EventKind::kStage, who, rewards.stage.dish_pickup, "dish-pickup"});
      }
      break;
    case Tile::kPot:
      if (agent.held == Item::kOnion && s.pot_onions < kSoupOnions) {
        agent.held = Item::kNone;
        ++s.pot_onions;
        if (s.pot_onions == kSoupOnions) filled_now = true;
        events.push_back({EventKind::kStage, who, rewards.stage.onion_into_pot, "onion-into-pot"});
      } else if (agent.held == Item::kDish && s.soup_ready()) {
        agent.held = Item::kSoup;
        s.pot_onions = 0;
        s.pot_timer = 0;
        events.push_back({EventKind::kStage, who, rewards.stage.soup_pickup, "soup-pickup"});
      }
      break;
    case Tile::kServe:
      if (agent.held == Item::kSoup) {
        agent.held = Item::kNone;
        ++s.soups_served;
        events.push_back({EventKind::kSparse, Attribution::kShared, rewards.sparse, "serve"});
      }
      break;
    case Tile::kFloor:
    case Tile::kCounter:
      break;
  }
}

bool is_move(int action) { return action >= kUp && action <= kRight; }

// Turns toward the move direction and returns the cell it would enter, or
// the current cell when blocked by a non-floor tile.
Cell move_target(const KitchenState& s, KitchenAgent& agent, int action) {
  if (!is_move(action)) return agent.pos;
  agent.facing = action;
  const Cell target = step_cell(agent.pos, action);
  if (!s.layout.in_bounds(target) || s.layout.at(target) != Tile::kFloor) return agent.pos;
  return target;
}

}  // namespace

std::vector<RewardEvent> kitchen_step(KitchenState& state, const JointAction& action,
                                      const KitchenRewards& rewards) {
  std::vector<RewardEvent> events;
  Cell ai_target = move_target(state, state.ai, action.ai_action);
  Cell human_target = move_target(state, state.human, action.human_action);
  // Neither agent may enter the other's current cell; same-cell targets block both.
  if (ai_target == state.human.pos) ai_target = state.ai.pos;
  if (human_target == state.ai.pos) human_target = state.human.pos;
  if (ai_target == human_target) {
    ai_target = state.ai.pos;
    human_target = state.human.pos;
  }
  state.ai.pos = ai_target;
  state.human.pos = human_target;

  bool filled_now = false;
  if (action.ai_action == kKitchenInteract) {
    interact(state, state.ai, Attribution::kAi, rewards, filled_now, events);
  }
  if (action.human_action == kKitchenInteract) {
    interact(state, state.human, Attribution::kHuman, rewards, filled_now, events);
  }
  if (state.pot_onions == kSoupOnions && state.pot_timer < kCookSteps && !filled_now) {
    ++state.pot_timer;
  }
  ++state.t;
  return events;
}

Observation encode_kitchen(const KitchenState& s, Role role) {
  const int plane = s.layout.width * s.layout.height;
  Observation obs;
  obs.t = s.t;
  obs.channels.assign(static_cast<std::size_t>(kKitchenGridChannels) * plane + kKitchenExtras, 0.0);
  const KitchenAgent& self = role == Role::kAi ? s.ai : s.human;
  const KitchenAgent& other = role == Role::kAi ? s.human : s.ai;
  auto& ch = obs.channels;
  ch[self.pos.row * s.layout.width + self.pos.col] = 1.0;
  ch[plane + other.pos.row * s.layout.width + other.pos.col] = 1.0;
  for (int i = 0; i < plane; ++i) {
    switch (s.layout.tiles[i]) {
      case Tile::kCounter: ch[2 * plane + i] = 1.0; break;
      case Tile::kOnionDispenser: ch[3 * plane + i] = 1.0; break;
      case Tile::kDishDispenser: ch[4 * plane + i] = 1.0; break;
      case Tile::kPot: ch[5 * plane + i] = 1.0; break;
      case Tile::kServe: ch[6 * plane + i] = 1.0; break;
      case Tile::kFloor: break;
    }
  }
  std::size_t e = static_cast<std::size_t>(kKitchenGridChannels) * plane;
  ch[e + self.facing] = 1.0;
  ch[e + 4 + static_cast<int>(self.held)] = 1.0;
  ch[e + 8 + other.facing] = 1.0;
  ch[e + 12 + static_cast<int>(other.held)] = 1.0;
  ch[e + 16 + s.pot_onions] = 1.0;
  ch[e + 20] = s.soup_ready() ? 1.0 : 0.0;
  ch[e + 21] = static_cast<double>(s.pot_timer) / kCookSteps;
  return obs;
}

KitchenView decode_kitchen_observation(std::span<const double> ch, int width, int height) {
  const int plane = width * height;
  if (ch.size() != static_cast<std::size_t>(kKitchenGridChannels) * plane + kKitchenExtras) {
    throw ContractError("observation size does not match a " + std::to_string(width) + "x" +
                        std::to_string(height) + " kitchen");
  }
  KitchenView v;
  v.layout.width = width;
  v.layout.height = height;
  v.layout.tiles.assign(plane, Tile::kFloor);
  for (int i = 0; i < plane; ++i) {
    const Cell c{i / width, i % width};
    if (ch[i] > 0.5) v.self.pos = c;
    if (ch[plane + i] > 0.5) v.partner.pos = c;
    if (ch[2 * plane + i] > 0.5) v.layout.tiles[i] = Tile::kCounter;
    if (ch[3 * plane + i] > 0.5) v.layout.tiles[i] = Tile::kOnionDispenser;
    if (ch[4 * plane + i] > 0.5) v.layout.tiles[i] = Tile::kDishDispenser;
    if (ch[5 * plane + i] > 0.5) {
      v.layout.tiles[i] = Tile::kPot;
      v.layout.pot = c;
    }
    if (ch[6 * plane + i] > 0.5) v.layout.tiles[i] = Tile::kServe;
  }
  const std::size_t e = static_cast<std::size_t>(kKitchenGridChannels) * plane;
  auto hot = [&](std::size_t base, int n) {
    for (int k = 0; k < n; ++k) {
      if (ch[base + k] > 0.5) return k;
    }
    return 0;
  };
  v.self.facing = hot(e, 4);
  v.self.held = static_cast<Item>(hot(e + 4, 4));
  v.partner.facing = hot(e + 8, 4);
  v.partner.held = static_cast<Item>(hot(e + 12, 4));
  v.pot_onions = hot(e + 16, 4);
  v.soup_ready = ch[e + 20] > 0.5;
  return v;
}

KitchenEnv::KitchenEnv(KitchenConfig config) : config_(std::move(config)) {
  if (config_.horizon <= 0) throw ConfigError("horizon must be positive");
}

std::size_t KitchenEnv::observation_size() const {
  return static_cast<std::size_t>(kKitchenGridChannels) * config_.layout.width *
             config_.layout.height +
         kKitchenExtras;
}

ResetResult KitchenEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  KitchenState s;
  s.layout = config_.layout;
  std::vector<int> floor;
  for (int i = 0; i < s.layout.width * s.layout.height; ++i) {
    if (s.layout.tiles[i] == Tile::kFloor) floor.push_back(i);
  }
  std::uniform_int_distribution<std::size_t> pick(0, floor.size() - 1);
  const std::size_t a = pick(rng_);
  std::size_t h = pick(rng_);
  while (h == a) h = pick(rng_);
  const int w = s.layout.width;
  s.ai.pos = Cell{floor[a] / w, floor[a] % w};
  s.human.pos = Cell{floor[h] / w, floor[h] % w};
  state_ = std::move(s);
  started_ = true;
  return ResetResult{observe(Role::kAi), observe(Role::kHuman), snapshot()};
}

StepOutcome KitchenEnv::step(const JointAction& action) {
  if (!started_) throw ContractError("step before reset");
  if (done()) throw EpisodeOverError("kitchen episode already finished");
  check_joint(action);
  StepOutcome out;
  out.events = kitchen_step(state_, action, config_.rewards);
  out.done = done();
  out.obs_ai = observe(Role::kAi);
  out.obs_human = observe(Role::kHuman);
  return out;
}

Observation KitchenEnv::observe(Role role) const {
  if (!started_) throw ContractError("observe before reset");
  return encode_kitchen(state_, role);
}

Observation KitchenEnv::counterfactual_from(KitchenState s, int human_action) const {
  check_action(human_action, "human");
  // Only the human acts; the pot clock and the episode clock stay put.
  Cell target = move_target(s, s.human, human_action);
  if (target == s.ai.pos) target = s.human.pos;
  s.human.pos = target;
  if (human_action == kKitchenInteract) {
    bool filled_now = false;
    std::vector<RewardEvent> ignored;
    interact(s, s.human, Attribution::kHuman, config_.rewards, filled_now, ignored);
  }
  return encode_kitchen(s, Role::kAi);
}

Observation KitchenEnv::counterfactual_observe(const EnvSnapshot& snapshot, int human_action) const {
  return counterfactual_from(decode(snapshot, nullptr), human_action);
}

Observation KitchenEnv::counterfactual_observe_current(int human_action) const {
  if (!started_) throw ContractError("counterfactual before reset");
  return counterfactual_from(state_, human_action);
}

namespace {

void write_agent(ByteWriter& w, const KitchenAgent& a) {
  w.i32(a.pos.row);
  w.i32(a.pos.col);
  w.u8(static_cast<std::uint8_t>(a.facing));
  w.u8(static_cast<std::uint8_t>(a.held));
}

KitchenAgent read_agent(ByteReader& r, const KitchenLayout& layout) {
  KitchenAgent a;
  a.pos = Cell{r.i32(), r.i32()};
  a.facing = r.u8();
  const std::uint8_t held = r.u8();
  if (!layout.in_bounds(a.pos) || layout.at(a.pos) != Tile::kFloor || a.facing > 3 || held > 3) {
    throw FormatError("corrupt kitchen agent in snapshot");
  }
  a.held = static_cast<Item>(held);
  return a;
}

}  // namespace

EnvSnapshot KitchenEnv::snapshot() const {
  ByteWriter w = begin_snapshot(id());
  w.str(format_kitchen_layout(state_.layout));
  write_agent(w, state_.ai);
  write_agent(w, state_.human);
  w.i32(state_.pot_onions);
  w.i32(state_.pot_timer);
  w.i32(state_.t);
  w.i32(state_.onions_dispensed);
  w.i32(state_.soups_served);
  w.str(rng_state(rng_));
  return EnvSnapshot{w.take()};
}

KitchenState KitchenEnv::decode(const EnvSnapshot& snapshot, std::mt19937_64* rng) const {
  ByteReader r = open_snapshot(snapshot, id());
  KitchenState s;
  s.layout = parse_kitchen_layout(r.str());
  s.ai = read_agent(r, s.layout);
  s.human = read_agent(r, s.layout);
  s.pot_onions = r.i32();
  s.pot_timer = r.i32();
  s.t = r.i32();
  s.onions_dispensed = r.i32();
  s.soups_served = r.i32();
  const std::string rng_text = r.str();
  if (!r.done()) throw FormatError("trailing bytes in kitchen snapshot");
  if (s.pot_onions < 0 || s.pot_onions > kSoupOnions || s.pot_timer < 0 || s.pot_timer > kCookSteps) {
    throw FormatError("corrupt pot state in snapshot");
  }
  if (rng) set_rng_state(*rng, rng_text);
  return s;
}

void KitchenEnv::restore(const EnvSnapshot& snapshot) {
  std::mt19937_64 rng;
  KitchenState s = decode(snapshot, &rng);
  if (!(s.layout == config_.layout)) throw FormatError("snapshot layout differs from environment");
  state_ = std::move(s);
  rng_ = rng;
  started_ = true;
}

void KitchenEnv::set_state(const KitchenState& state) {
  if (!(state.layout == config_.layout)) throw ContractError("state layout differs from environment");
  state_ = state;
  started_ = true;
}

std::unique_ptr<Environment> KitchenEnv::clone() const { return std::make_unique<KitchenEnv>(*this); }

}  // namespace bcr::env
