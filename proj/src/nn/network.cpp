#include "bcr/nn/network.hpp"

#include "bcr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace bcr::nn {

std::string to_string(Activation act) {
  switch (act) {
    case Activation::kIdentity: return "identity";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
  }
  return "unknown";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + name + "'");
}

std::size_t NetworkArch::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    n += static_cast<std::size_t>(layer_sizes[l]) * layer_sizes[l + 1] + layer_sizes[l + 1];
  }
  return n;
}

void NetworkArch::validate() const {
  if (layer_sizes.size() < 2) throw ContractError("network needs at least input and output layers");
  if (activations.size() != layer_sizes.size() - 1) {
    throw ContractError("activation count must equal layer transitions");
  }
  for (int s : layer_sizes) {
    if (s <= 0) throw ContractError("layer sizes must be positive");
  }
}

NetworkArch make_mlp_arch(int input, std::span<const int> hidden, int output,
                          Activation hidden_act) {
  NetworkArch arch;
  arch.layer_sizes.push_back(input);
  for (int h : hidden) {
    arch.layer_sizes.push_back(h);
    arch.activations.push_back(hidden_act);
  }
  arch.layer_sizes.push_back(output);
  arch.activations.push_back(Activation::kIdentity);
  arch.validate();
  return arch;
}

void PolicyParameters::validate() const {
  actor_arch.validate();
  critic_arch.validate();
  if (actor_weights.size() != actor_arch.parameter_count()) {
    throw ContractError("actor parameter count " + std::to_string(actor_weights.size()) +
                        " != " + std::to_string(actor_arch.parameter_count()));
  }
  if (critic_weights.size() != critic_arch.parameter_count()) {
    throw ContractError("critic parameter count " + std::to_string(critic_weights.size()) +
                        " != " + std::to_string(critic_arch.parameter_count()));
  }
  if (critic_arch.output_size() != 1) throw ContractError("critic must have a single output");
  if (actor_arch.input_size() != critic_arch.input_size()) {
    throw ContractError("actor and critic input sizes differ");
  }
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(actor_weights.begin(), actor_weights.end(), finite) ||
      !std::all_of(critic_weights.begin(), critic_weights.end(), finite)) {
    throw DivergenceError("non-finite parameter value");
  }
}

bool ActionDistribution::is_valid(double tol, bool allow_zero) const {
  if (probs.empty()) return false;
  double total = 0.0;
  for (double p : probs) {
    const bool lower_ok = allow_zero ? p >= 0.0 : p > 0.0;
    if (!(lower_ok && p <= 1.0)) return false;
    total += p;
  }
  return std::abs(total - 1.0) <= tol;
}

namespace {

// Orthogonal block of shape rows x cols (rows = fan_in) scaled by gain.
Matrix orthogonal(int rows, int cols, double gain, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const int big = std::max(rows, cols);
  const int small = std::min(rows, cols);
  Eigen::MatrixXd a(big, small);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  // Sign fix makes the distribution uniform over orthogonal matrices.
  const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(small, small);
  for (int j = 0; j < small; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  Matrix out = (rows >= cols) ? Matrix(q) : Matrix(q.transpose());
  return out * gain;
}

}  // namespace

std::vector<double> init_network(const NetworkArch& arch, std::uint64_t seed, double hidden_gain,
                                 double head_gain, InitScheme scheme) {
  arch.validate();
  std::vector<double> weights(arch.parameter_count(), 0.0);
  if (scheme == InitScheme::kZero) return weights;
  std::mt19937_64 rng(seed);
  std::size_t offset = 0;
  for (std::size_t l = 0; l < arch.layer_count(); ++l) {
    const int in = arch.layer_sizes[l];
    const int out = arch.layer_sizes[l + 1];
    const double gain = (l + 1 == arch.layer_count()) ? head_gain : hidden_gain;
    Matrix w;
    if (scheme == InitScheme::kOrthogonal) {
      w = orthogonal(in, out, gain, rng);
    } else {
      const double bound = gain * std::sqrt(3.0 / in);
      std::uniform_real_distribution<double> u(-bound, bound);
      w.resize(in, out);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    }
    std::copy(w.data(), w.data() + w.size(), weights.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += static_cast<std::size_t>(in) * out + out;  // biases stay zero
  }
  return weights;
}

PolicyParameters init_parameters(int observation_size, int action_count,
                                 std::span<const int> hidden, Activation hidden_act,
                                 std::uint64_t seed, const InitOptions& options) {
  PolicyParameters p;
  p.actor_arch = make_mlp_arch(observation_size, hidden, action_count, hidden_act);
  p.critic_arch = make_mlp_arch(observation_size, hidden, 1, hidden_act);
  std::mt19937_64 seeder(seed);
  const std::uint64_t actor_seed = seeder();
  const std::uint64_t critic_seed = seeder();
  p.actor_weights = init_network(p.actor_arch, actor_seed, options.hidden_gain,
                                 options.actor_head_gain, options.scheme);
  p.critic_weights = init_network(p.critic_arch, critic_seed, options.hidden_gain,
                                  options.critic_head_gain, options.scheme);
  return p;
}

namespace {

using ConstMap = Eigen::Map<const Matrix>;
using RowMap = Eigen::Map<const Eigen::RowVectorXd>;

void apply_activation(Matrix& x, Activation act) {
  switch (act) {
    case Activation::kIdentity: break;
    case Activation::kTanh: x = x.array().tanh(); break;
    case Activation::kRelu: x = x.cwiseMax(0.0); break;
  }
}

}  // namespace

Matrix network_forward(const NetworkArch& arch, std::span<const double> weights,
                       const Matrix& input) {
  if (input.cols() != arch.input_size()) {
    throw ShapeError("input width " + std::to_string(input.cols()) + " != network input " +
                     std::to_string(arch.input_size()));
  }
  if (weights.size() != arch.parameter_count()) {
    throw ContractError("weight vector does not match architecture");
  }
  Matrix x = input;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < arch.layer_count(); ++l) {
    const int in = arch.layer_sizes[l];
    const int out = arch.layer_sizes[l + 1];
    ConstMap w(weights.data() + offset, in, out);
    offset += static_cast<std::size_t>(in) * out;
    RowMap b(weights.data() + offset, out);
    offset += out;
    Matrix y = x * w;
    y.rowwise() += b;
    apply_activation(y, arch.activations[l]);
    x = std::move(y);
  }
  return x;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

namespace {

Matrix as_row(std::span<const double> obs) {
  Matrix m(1, static_cast<Eigen::Index>(obs.size()));
  std::copy(obs.begin(), obs.end(), m.data());
  return m;
}

}  // namespace

Matrix policy_probs(const PolicyParameters& params, const Matrix& obs) {
  return softmax_rows(network_forward(params.actor_arch, params.actor_weights, obs));
}

Eigen::VectorXd state_values(const PolicyParameters& params, const Matrix& obs) {
  return network_forward(params.critic_arch, params.critic_weights, obs).col(0);
}

ActionDistribution forward_policy(const PolicyParameters& params, std::span<const double> obs) {
  const Matrix probs = policy_probs(params, as_row(obs));
  return ActionDistribution{std::vector<double>(probs.data(), probs.data() + probs.size())};
}

double forward_value(const PolicyParameters& params, std::span<const double> obs) {
  return state_values(params, as_row(obs))(0);
}

std::vector<Var> bind_network(Tape& tape, const NetworkArch& arch,
                              std::span<const double> weights) {
  if (weights.size() != arch.parameter_count()) {
    throw ContractError("weight vector does not match architecture");
  }
  std::vector<Var> bound;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < arch.layer_count(); ++l) {
    const int in = arch.layer_sizes[l];
    const int out = arch.layer_sizes[l + 1];
    bound.push_back(tape.leaf(ConstMap(weights.data() + offset, in, out)));
    offset += static_cast<std::size_t>(in) * out;
    bound.push_back(tape.leaf(ConstMap(weights.data() + offset, 1, out)));
    offset += out;
  }
  return bound;
}

Var network_forward(Tape& tape, const NetworkArch& arch, std::span<const Var> bound, Var input) {
  if (bound.size() != 2 * arch.layer_count()) throw ContractError("bound parameter count mismatch");
  if (input.cols() != arch.input_size()) {
    throw ShapeError("input width " + std::to_string(input.cols()) + " != network input " +
                     std::to_string(arch.input_size()));
  }
  (void)tape;
  Var x = input;
  for (std::size_t l = 0; l < arch.layer_count(); ++l) {
    x = add_row(matmul(x, bound[2 * l]), bound[2 * l + 1]);
    switch (arch.activations[l]) {
      case Activation::kIdentity: break;
      case Activation::kTanh: x = tanh(x); break;
      case Activation::kRelu: x = relu(x); break;
    }
  }
  return x;
}

void collect_gradients(const NetworkArch& arch, std::span<const Var> bound, std::span<double> out) {
  if (out.size() != arch.parameter_count() || bound.size() != 2 * arch.layer_count()) {
    throw ContractError("gradient buffer does not match architecture");
  }
  std::size_t offset = 0;
  for (const Var& v : bound) {
    const Matrix& g = v.grad();
    if (g.size() == 0) {
      std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(offset), v.value().size(), 0.0);
    } else {
      std::copy(g.data(), g.data() + g.size(), out.begin() + static_cast<std::ptrdiff_t>(offset));
    }
    offset += static_cast<std::size_t>(v.value().size());
  }
}

}  // namespace bcr::nn
