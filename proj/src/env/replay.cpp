#include "bcr/env/replay.hpp"

#include "bcr/errors.hpp"

#include <fstream>
#include <sstream>

namespace bcr::env {

void write_replay(std::ostream& out, const Replay& replay) {
  out << "#bcr-replay v1 env=" << replay.env_id << " seed=" << replay.seed
      << " horizon=" << replay.horizon << '\n';
  for (const auto& a : replay.actions) out << a.ai_action << ' ' << a.human_action << '\n';
}

Replay read_replay(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw FormatError("empty replay file");
  std::istringstream hs(header);
  std::string tag, version;
  hs >> tag >> version;
  if (tag != "#bcr-replay" || version != "v1") throw FormatError("bad replay header: " + header);
  Replay replay;
  bool have_env = false, have_seed = false, have_horizon = false;
  std::string field;
  while (hs >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw FormatError("bad replay header field: " + field);
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    try {
      if (key == "env") {
        replay.env_id = value;
        have_env = true;
      } else if (key == "seed") {
        replay.seed = std::stoull(value);
        have_seed = true;
      } else if (key == "horizon") {
        replay.horizon = std::stoi(value);
        have_horizon = true;
      } else {
        throw FormatError("unknown replay header field: " + key);
      }
    } catch (const std::logic_error&) {
      throw FormatError("bad replay header value: " + field);
    }
  }
  if (!have_env || !have_seed || !have_horizon) throw FormatError("incomplete replay header");

  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    JointAction a;
    std::string extra;
    if (!(ls >> a.ai_action >> a.human_action) || (ls >> extra)) {
      throw FormatError("bad replay record: " + line);
    }
    replay.actions.push_back(a);
  }
  return replay;
}

void write_replay(const std::filesystem::path& path, const Replay& replay) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_replay(out, replay);
}

Replay read_replay(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_replay(in);
}

std::vector<StepOutcome> replay_trajectory(Environment& environment, const Replay& replay) {
  if (replay.env_id != environment.id()) {
    throw FormatError("replay recorded on '" + replay.env_id + "', environment is '" +
                      environment.id() + "'");
  }
  environment.reset(replay.seed);
  std::vector<StepOutcome> outcomes;
  outcomes.reserve(replay.actions.size());
  for (const auto& a : replay.actions) outcomes.push_back(environment.step(a));
  return outcomes;
}

}  // namespace bcr::env
