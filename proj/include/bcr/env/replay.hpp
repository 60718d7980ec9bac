#pragma once

// Trajectory replay files. Newline-delimited text:
//
//   #bcr-replay v1 env=<id> seed=<u64> horizon=<int>
//   <ai_action> <human_action>
//   ...
//
// One action line per step, in order. Replaying resets the environment with
// `seed` and applies the actions, reproducing the trajectory exactly.

#include "bcr/env/environment.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace bcr::env {

struct Replay {
  std::string env_id;
  std::uint64_t seed = 0;
  int horizon = 0;
  std::vector<JointAction> actions;
  bool operator==(const Replay&) const = default;
};

void write_replay(std::ostream& out, const Replay& replay);
Replay read_replay(std::istream& in);
void write_replay(const std::filesystem::path& path, const Replay& replay);
Replay read_replay(const std::filesystem::path& path);

// Resets `environment` with the replay seed and re-applies every action.
std::vector<StepOutcome> replay_trajectory(Environment& environment, const Replay& replay);

}  // namespace bcr::env
