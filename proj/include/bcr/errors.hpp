#pragma once

#include <stdexcept>
#include <string>

namespace bcr {

// Root of every error the library throws. `kind()` is a short stable token
// used by the CLI when it prints machine-parsable failures.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

// Input tensor does not match the network architecture.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error("shape", what) {}
};

// Caller broke a documented precondition.
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error("contract", what) {}
};

// NaN/Inf reached the optimizer or a loss.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what) : Error("divergence", what) {}
};

class EpisodeOverError : public Error {
 public:
  explicit EpisodeOverError(const std::string& what) : Error("episode_over", what) {}
};

// Malformed bytes or files (snapshots, checkpoints, replays, layouts).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error("format", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class GenerationError : public Error {
 public:
  explicit GenerationError(const std::string& what) : Error("generation", what) {}
};

}  // namespace bcr
