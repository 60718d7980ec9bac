#pragma once

// Two-agent environment contract shared by the exploration grid and the
// mini kitchen. The AI and the human act simultaneously every step.

#include "bcr/bytes.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bcr::env {

enum class Role { kAi, kHuman };

struct JointAction {
  int ai_action = 0;
  int human_action = 0;
  bool operator==(const JointAction&) const = default;
};

// Stacked binary grids flattened row-major, plus environment-specific extras.
struct Observation {
  std::vector<double> channels;
  int t = 0;
  bool operator==(const Observation&) const = default;
};

enum class EventKind : std::uint8_t {
  kNewCell,   // exploration: entered an unexplored cell
  kRevisit,   // exploration: entered an explored cell
  kInvalid,   // exploration: blocked, colliding or redundant action
  kStage,     // kitchen sub-goal (tag names which one)
  kSparse,    // task completion, shared by both agents
};

enum class Attribution : std::uint8_t { kAi, kHuman, kShared };

struct RewardEvent {
  EventKind kind;
  Attribution agent;
  double magnitude;
  std::string tag;
  bool operator==(const RewardEvent&) const = default;
};

std::string to_string(EventKind kind);

// Number of sparse (task-completion) events.
int count_sparse(std::span<const RewardEvent> events);
// Sum of non-sparse magnitudes attributed to `agent`.
double stage_sum(std::span<const RewardEvent> events, Attribution agent);

struct StepOutcome {
  Observation obs_ai;
  Observation obs_human;
  std::vector<RewardEvent> events;
  bool done = false;
  bool operator==(const StepOutcome&) const = default;
};

// Opaque byte image of the full environment state including RNG state.
struct EnvSnapshot {
  std::vector<std::uint8_t> bytes;
  bool operator==(const EnvSnapshot&) const = default;
};

struct ResetResult {
  Observation obs_ai;
  Observation obs_human;
  EnvSnapshot snapshot;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string id() const = 0;
  virtual int action_count() const = 0;
  virtual int stay_action() const = 0;
  virtual std::size_t observation_size() const = 0;
  virtual int horizon() const = 0;
  virtual int time() const = 0;
  virtual bool done() const = 0;

  virtual ResetResult reset(std::uint64_t seed) = 0;
  // Throws EpisodeOverError once done, ContractError for out-of-range actions.
  virtual StepOutcome step(const JointAction& action) = 0;
  virtual Observation observe(Role role) const = 0;

  // The AI's observation had only the human taken `human_action` from the
  // snapshotted state, the AI staying put. Clocks and cooking timers do not
  // advance and no completion is triggered. Never touches the live state.
  virtual Observation counterfactual_observe(const EnvSnapshot& snapshot, int human_action) const = 0;
  // Same query against the live state without a serialization round trip.
  virtual Observation counterfactual_observe_current(int human_action) const = 0;

  virtual EnvSnapshot snapshot() const = 0;
  // Throws FormatError for truncated bytes or snapshots of another environment.
  virtual void restore(const EnvSnapshot& snapshot) = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;

 protected:
  void check_action(int action, const char* who) const;
  void check_joint(const JointAction& action) const;
};

// Snapshot envelope: "BCRS" magic, u32 version, environment id, payload.
ByteWriter begin_snapshot(const std::string& env_id);
// Validates the envelope; the returned reader is positioned at the payload.
ByteReader open_snapshot(const EnvSnapshot& snapshot, const std::string& env_id);

// Text form of a std::mt19937_64 state, for snapshot payloads.
template <typename Rng>
std::string rng_state(const Rng& rng);
template <typename Rng>
void set_rng_state(Rng& rng, const std::string& state);

}  // namespace bcr::env

#include <sstream>

namespace bcr::env {

template <typename Rng>
std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

template <typename Rng>
void set_rng_state(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw FormatError("corrupt rng state in snapshot");
}

}  // namespace bcr::env
