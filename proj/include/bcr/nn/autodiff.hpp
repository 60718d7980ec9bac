#pragma once

// Tape-based reverse-mode automatic differentiation over dense row-major
// matrices. Every value on the tape is a matrix; scalars are 1x1.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace bcr::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tape;

// Lightweight handle to a node on a Tape. Valid as long as the Tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  // Gradient after Tape::backward; zero-sized if the node does not require grad.
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // Receives the node's own upstream gradient and pushes contributions into
  // its parents through Tape::accumulate.
  using BackwardFn = std::function<void(Tape&, const Matrix& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Matrix value, bool requires_grad = true);
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  // Records an op result. `fn` is only invoked if some parent requires grad.
  Var record(Matrix value, std::vector<Var> parents, BackwardFn fn);

  // Reverse sweep from a 1x1 loss. Throws ContractError otherwise.
  void backward(Var loss);

  void accumulate(Var target, const Matrix& contribution);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(Var v) const { return nodes_[v.id_].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  void check_owner(Var v) const;

  std::vector<Node> nodes_;
};

// Ops. All operands must live on the same tape.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
// x (n x m) plus a 1 x m row broadcast over rows.
Var add_row(Var x, Var row);
Var tanh(Var x);
Var relu(Var x);
Var exp(Var x);
Var square(Var x);
Var log_softmax_rows(Var x);
// Picks x(i, index[i]) into an n x 1 column.
Var gather_rows(Var x, std::span<const int> index);
Var clamp(Var x, double lo, double hi);
// Elementwise min; ties route the gradient to `a`.
Var minimum(Var a, Var b);
Var sum(Var x);
Var mean(Var x);

}  // namespace bcr::nn
