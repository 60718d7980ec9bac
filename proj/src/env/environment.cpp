#include "bcr/env/environment.hpp"

#include "bcr/errors.hpp"

namespace bcr::env {

namespace {
constexpr char kSnapshotMagic[] = "BCRS";
constexpr std::uint32_t kSnapshotVersion = 1;
}  // namespace

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kNewCell: return "new-cell";
    case EventKind::kRevisit: return "revisit";
    case EventKind::kInvalid: return "invalid";
    case EventKind::kStage: return "stage";
    case EventKind::kSparse: return "sparse";
  }
  return "unknown";
}

int count_sparse(std::span<const RewardEvent> events) {
  int n = 0;
  for (const auto& e : events) n += e.kind == EventKind::kSparse ? 1 : 0;
  return n;
}

double stage_sum(std::span<const RewardEvent> events, Attribution agent) {
  double total = 0.0;
  for (const auto& e : events) {
    if (e.kind != EventKind::kSparse && e.agent == agent) total += e.magnitude;
  }
  return total;
}

void Environment::check_action(int action, const char* who) const {
  if (action < 0 || action >= action_count()) {
    throw ContractError(std::string(who) + " action " + std::to_string(action) +
                        " outside [0, " + std::to_string(action_count()) + ")");
  }
}

void Environment::check_joint(const JointAction& action) const {
  check_action(action.ai_action, "ai");
  check_action(action.human_action, "human");
}

ByteWriter begin_snapshot(const std::string& env_id) {
  ByteWriter w;
  w.raw(kSnapshotMagic);
  w.u32(kSnapshotVersion);
  w.str(env_id);
  return w;
}

ByteReader open_snapshot(const EnvSnapshot& snapshot, const std::string& env_id) {
  ByteReader r(snapshot.bytes);
  if (r.raw(4) != kSnapshotMagic) throw FormatError("not an environment snapshot");
  const std::uint32_t version = r.u32();
  if (version != kSnapshotVersion) {
    throw FormatError("unsupported snapshot version " + std::to_string(version));
  }
  const std::string id = r.str();
  if (id != env_id) {
    throw FormatError("snapshot belongs to '" + id + "', not '" + env_id + "'");
  }
  return r;
}

}  // namespace bcr::env
