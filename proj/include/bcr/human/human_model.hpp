#pragma once

// Fixed (non-learning) human partners. A model acts only on timesteps that
// are multiples of `period`; otherwise it stays. The full action
// distribution is exposed so influence-style rewards can reason about it.

#include "bcr/env/environment.hpp"
#include "bcr/nn/network.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace bcr::human {

enum class HumanKind { kExplorationStochastic, kKitchenScripted, kUniformRandom };

std::string to_string(HumanKind kind);
HumanKind human_kind_from_string(const std::string& name);

struct HumanModelSpec {
  HumanKind kind = HumanKind::kExplorationStochastic;
  int period = 10;
  double temperature = 1.0;
  // Random-action mixing for the kitchen script.
  double epsilon = 0.2;
  std::uint64_t seed = 0;
};

// Environment geometry a model needs to decode observations.
struct EnvGeometry {
  std::string env_id;
  int width = 0;
  int height = 0;
  int action_count = 0;
  int stay_action = 0;
  std::size_t observation_size = 0;
};

class HumanModel {
 public:
  HumanModel(HumanModelSpec spec, EnvGeometry geometry);

  // Point mass on stay at off-period steps. Throws ContractError when the
  // observation does not belong to the model's environment.
  nn::ActionDistribution distribution(std::span<const double> obs, int t) const;
  // Samples from distribution(); advances the model's private rng.
  int sample(std::span<const double> obs, int t);

  void reseed(std::uint64_t seed) { rng_.seed(seed); }
  const HumanModelSpec& spec() const { return spec_; }
  const EnvGeometry& geometry() const { return geometry_; }

 private:
  nn::ActionDistribution exploration_policy(std::span<const double> obs) const;
  nn::ActionDistribution kitchen_policy(std::span<const double> obs) const;

  HumanModelSpec spec_;
  EnvGeometry geometry_;
  std::mt19937_64 rng_;
};

// Free-function forms.
nn::ActionDistribution human_action_distribution(const HumanModel& model,
                                                 std::span<const double> obs, int t);
int sample_human_action(HumanModel& model, std::span<const double> obs, int t);

// The deterministic kitchen script action (fetch onion -> pot -> fetch dish
// -> scoop -> serve), before noise mixing.
int kitchen_script_action(std::span<const double> obs, int width, int height);

}  // namespace bcr::human
