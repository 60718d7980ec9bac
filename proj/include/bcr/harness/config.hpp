#pragma once

// Experiment configuration. On disk it is a JSON document whose keys mirror
// to_json(); every key is optional in a file (missing keys keep defaults) but
// unknown keys are rejected. See configs/README in the repository root for
// the full schema.

#include "bcr/human/human_model.hpp"
#include "bcr/ppo/ppo.hpp"
#include "bcr/reward/reward.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bcr::harness {

inline constexpr int kConfigSchemaVersion = 1;

struct ExplorationSettings {
  int width = 8;
  int height = 8;
  double obstacle_density = 0.1;
  // Same obstacle layout for every episode of a run (seeded by the run seed).
  bool fixed_layout = true;
  // Plain-text layout ('#' obstacle, '.' free); overrides generation.
  std::string layout_file;
  double new_cell = 2.0;
  double revisit = -0.5;
  double invalid = -1.0;
};

struct KitchenSettings {
  std::string layout_file;
  double onion_into_pot = 3.0;
  double dish_pickup = 3.0;
  double soup_pickup = 5.0;
};

struct EnvSettings {
  std::string id = "exploration";  // exploration | mini-kitchen
  int horizon = 400;
  ExplorationSettings exploration;
  KitchenSettings kitchen;
};

// Which maximum the plateau rule compares against.
enum class ConvergenceReference { kFullCurve, kRunningMax };

std::string to_string(ConvergenceReference ref);
ConvergenceReference convergence_reference_from_string(const std::string& name);

struct ReportSettings {
  int window = 10;
  double threshold = 0.9;
  ConvergenceReference reference = ConvergenceReference::kFullCurve;
  // Fraction of trailing epochs forming the final window.
  double final_fraction = 0.1;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::string name = "exploration_bcr";
  ppo::Algorithm algorithm = ppo::Algorithm::kBcr;
  EnvSettings env;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  ppo::TrainingConfig training;
  // bcr.fade horizon_steps / decay_steps of 0 mean the full training budget
  // N * T (exponential: a fifth of it); resolved per run.
  reward::BcrConfig bcr;
  double causal_coefficient = 1.0;
  human::HumanModelSpec human;
  int eval_episodes = 2000;
  ReportSettings report;
  std::string output_dir = "runs";
  int workers = 1;

  // Throws ConfigError.
  void validate() const;
};

nlohmann::ordered_json to_json(const ExperimentConfig& config);
// Starts from defaults and applies `j`. Unknown keys and wrongly typed values
// throw ConfigError naming the key.
ExperimentConfig from_json(const nlohmann::json& j);

// FNV-1a 64 over the canonical (key-sorted, compact) JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);
std::uint64_t fnv1a64(const std::string& bytes);

// Preset names are "<env>_<algorithm>" with env in {exploration, kitchen}.
std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

// A path to a JSON file, or a preset name.
ExperimentConfig load_config(const std::string& name_or_path);
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

// "a.b.c=value". The path must exist in the schema; the value is parsed as
// JSON when possible and as a bare string otherwise.
void apply_override(ExperimentConfig& config, const std::string& assignment);

// The per-run view: a single seed, with fade horizons resolved.
ExperimentConfig resolve_for_seed(const ExperimentConfig& config, std::uint64_t seed);
ppo::RewardPlan reward_plan(const ExperimentConfig& config);
ppo::TrainingConfig training_config(const ExperimentConfig& config, std::uint64_t seed);

}  // namespace bcr::harness
