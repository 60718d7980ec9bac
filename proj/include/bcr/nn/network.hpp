#pragma once

// Dense actor and critic networks stored as flat parameter vectors.
//
// Flat layout, per layer in order: weight matrix (fan_in x fan_out, row-major)
// followed by the bias (fan_out). A layer computes act(x * W + b).

#include "bcr/nn/autodiff.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace bcr::nn {

enum class Activation : std::uint8_t { kIdentity = 0, kTanh = 1, kRelu = 2 };

std::string to_string(Activation act);
Activation activation_from_string(const std::string& name);

struct NetworkArch {
  // Input size first, output size last.
  std::vector<int> layer_sizes;
  // One per layer transition (layer_sizes.size() - 1 entries).
  std::vector<Activation> activations;

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  std::size_t layer_count() const { return activations.size(); }
  std::size_t parameter_count() const;
  // Throws ContractError on an inconsistent descriptor.
  void validate() const;

  bool operator==(const NetworkArch&) const = default;
};

// Builds input -> hidden... -> output with `hidden_act` on hidden layers and
// identity on the output.
NetworkArch make_mlp_arch(int input, std::span<const int> hidden, int output,
                          Activation hidden_act = Activation::kTanh);

// Actor (theta) and critic (phi) parameters. Separate networks.
struct PolicyParameters {
  static constexpr int kFormatVersion = 1;

  NetworkArch actor_arch;
  NetworkArch critic_arch;
  std::vector<double> actor_weights;
  std::vector<double> critic_weights;
  int version = kFormatVersion;

  int observation_size() const { return actor_arch.input_size(); }
  int action_count() const { return actor_arch.output_size(); }
  // Counts match the archs and every value is finite.
  void validate() const;

  bool operator==(const PolicyParameters&) const = default;
};

struct ActionDistribution {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }
  // Entries in (0, 1] (or [0, 1] when zeros are allowed) summing to 1 within `tol`.
  bool is_valid(double tol = 1e-9, bool allow_zero = false) const;
};

enum class InitScheme { kOrthogonal, kScaledUniform, kZero };

struct InitOptions {
  InitScheme scheme = InitScheme::kOrthogonal;
  double hidden_gain = 1.4142135623730951;
  // Small actor head keeps the initial policy close to uniform.
  double actor_head_gain = 0.01;
  double critic_head_gain = 1.0;
};

PolicyParameters init_parameters(int observation_size, int action_count,
                                 std::span<const int> hidden, Activation hidden_act,
                                 std::uint64_t seed, const InitOptions& options = {});

// Initializes one network's flat weights for `arch`.
std::vector<double> init_network(const NetworkArch& arch, std::uint64_t seed, double hidden_gain,
                                 double head_gain, InitScheme scheme);

// Plain (tape-free) batched forward: rows of `input` are samples.
Matrix network_forward(const NetworkArch& arch, std::span<const double> weights,
                       const Matrix& input);

Matrix softmax_rows(const Matrix& logits);

ActionDistribution forward_policy(const PolicyParameters& params, std::span<const double> obs);
double forward_value(const PolicyParameters& params, std::span<const double> obs);

// Batched variants; one row per observation.
Matrix policy_probs(const PolicyParameters& params, const Matrix& obs);
Eigen::VectorXd state_values(const PolicyParameters& params, const Matrix& obs);

// Tape plumbing for training. Parameters become leaves [W0, b0, W1, b1, ...].
std::vector<Var> bind_network(Tape& tape, const NetworkArch& arch, std::span<const double> weights);
Var network_forward(Tape& tape, const NetworkArch& arch, std::span<const Var> bound, Var input);
// Writes the gradients of `bound` (after backward) into `out` using the flat layout.
void collect_gradients(const NetworkArch& arch, std::span<const Var> bound, std::span<double> out);

}  // namespace bcr::nn
