#include "bcr/nn/autodiff.hpp"

#include "bcr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bcr::nn {

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw ContractError("scalar() on a " + std::to_string(v.rows()) + "x" +
                        std::to_string(v.cols()) + " node");
  }
  return v(0, 0);
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, nullptr});
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owner(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) {
    throw ContractError("variable does not belong to this tape");
  }
}

Var Tape::record(Matrix value, std::vector<Var> parents, BackwardFn fn) {
  bool needs = false;
  for (const Var& p : parents) {
    check_owner(p);
    needs = needs || nodes_[p.id_].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Matrix(), needs, needs ? std::move(fn) : nullptr});
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(Var target, const Matrix& contribution) {
  Node& node = nodes_[target.id_];
  if (!node.requires_grad) return;
  if (node.grad.size() == 0) {
    node.grad = contribution;
  } else {
    node.grad += contribution;
  }
}

void Tape::backward(Var loss) {
  check_owner(loss);
  const Matrix& v = nodes_[loss.id_].value;
  if (v.rows() != 1 || v.cols() != 1) {
    throw ContractError("backward() requires a scalar loss, got " + std::to_string(v.rows()) +
                        "x" + std::to_string(v.cols()));
  }
  for (Node& node : nodes_) node.grad.resize(0, 0);
  if (!nodes_[loss.id_].requires_grad) return;
  nodes_[loss.id_].grad = Matrix::Ones(1, 1);
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || node.grad.size() == 0) continue;
    // Parents always have smaller ids, so node.grad is final here.
    node.backward(*this, node.grad);
  }
  // Leaves that received nothing still report a zero gradient of their shape.
  for (Node& node : nodes_) {
    if (node.requires_grad && node.grad.size() == 0) {
      node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
    }
  }
}

namespace {

void require_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                     std::to_string(b.rows()));
  }
  Matrix out = a.value() * b.value();
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  return a.tape()->record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  return a.tape()->record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
    if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var scale(Var a, double factor) {
  return a.tape()->record(a.value() * factor, {a},
                          [a, factor](Tape& t, const Matrix& g) { t.accumulate(a, g * factor); });
}

Var add_scalar(Var a, double offset) {
  Matrix out = a.value().array() + offset;
  return a.tape()->record(std::move(out), {a},
                          [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

Var add_row(Var x, Var row) {
  if (row.rows() != 1 || row.cols() != x.cols()) {
    throw ShapeError("add_row: expected 1x" + std::to_string(x.cols()) + " row");
  }
  Matrix out = x.value();
  out.rowwise() += row.value().row(0);
  return x.tape()->record(std::move(out), {x, row}, [x, row](Tape& t, const Matrix& g) {
    t.accumulate(x, g);
    if (t.requires_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

Var tanh(Var x) {
  Matrix out = x.value().array().tanh();
  Tape* tape = x.tape();
  const std::size_t self = tape->size();
  return tape->record(std::move(out), {x}, [x, self](Tape& t, const Matrix& g) {
    const Matrix& y = t.value(self);
    t.accumulate(x, g.array() * (1.0 - y.array().square()));
  });
}

Var relu(Var x) {
  Matrix out = x.value().cwiseMax(0.0);
  return x.tape()->record(std::move(out), {x}, [x](Tape& t, const Matrix& g) {
    t.accumulate(x, (x.value().array() > 0.0).select(g, 0.0));
  });
}

Var exp(Var x) {
  Matrix out = x.value().array().exp();
  Tape* tape = x.tape();
  const std::size_t self = tape->size();
  return tape->record(std::move(out), {x}, [x, self](Tape& t, const Matrix& g) {
    t.accumulate(x, g.cwiseProduct(t.value(self)));
  });
}

Var square(Var x) {
  Matrix out = x.value().array().square();
  return x.tape()->record(std::move(out), {x}, [x](Tape& t, const Matrix& g) {
    t.accumulate(x, 2.0 * g.cwiseProduct(x.value()));
  });
}

Var log_softmax_rows(Var x) {
  const Matrix& in = x.value();
  Matrix out(in.rows(), in.cols());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    const double m = in.row(r).maxCoeff();
    const double lse = m + std::log((in.row(r).array() - m).exp().sum());
    out.row(r) = in.row(r).array() - lse;
  }
  Tape* tape = x.tape();
  const std::size_t self = tape->size();
  return tape->record(std::move(out), {x}, [x, self](Tape& t, const Matrix& g) {
    const Matrix softmax = t.value(self).array().exp();
    Matrix dx = g;
    const Eigen::VectorXd row_sums = g.rowwise().sum();
    for (Eigen::Index r = 0; r < g.rows(); ++r) dx.row(r) -= row_sums(r) * softmax.row(r);
    t.accumulate(x, dx);
  });
}

Var gather_rows(Var x, std::span<const int> index) {
  const Matrix& in = x.value();
  if (static_cast<Eigen::Index>(index.size()) != in.rows()) {
    throw ShapeError("gather_rows: index length " + std::to_string(index.size()) +
                     " != rows " + std::to_string(in.rows()));
  }
  std::vector<int> idx(index.begin(), index.end());
  Matrix out(in.rows(), 1);
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    if (idx[r] < 0 || idx[r] >= in.cols()) throw ShapeError("gather_rows: index out of range");
    out(r, 0) = in(r, idx[r]);
  }
  return x.tape()->record(std::move(out), {x}, [x, idx = std::move(idx)](Tape& t, const Matrix& g) {
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < dx.rows(); ++r) dx(r, idx[r]) = g(r, 0);
    t.accumulate(x, dx);
  });
}

Var clamp(Var x, double lo, double hi) {
  Matrix out = x.value().cwiseMax(lo).cwiseMin(hi);
  return x.tape()->record(std::move(out), {x}, [x, lo, hi](Tape& t, const Matrix& g) {
    const auto& v = x.value().array();
    t.accumulate(x, (v > lo && v < hi).select(g, 0.0));
  });
}

Var minimum(Var a, Var b) {
  require_same_shape(a, b, "minimum");
  Matrix out = a.value().cwiseMin(b.value());
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    const auto pick_a = (a.value().array() <= b.value().array());
    if (t.requires_grad(a)) t.accumulate(a, pick_a.select(g, 0.0));
    if (t.requires_grad(b)) t.accumulate(b, pick_a.select(Matrix::Zero(g.rows(), g.cols()), g));
  });
}

Var sum(Var x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return x.tape()->record(std::move(out), {x}, [x](Tape& t, const Matrix& g) {
    t.accumulate(x, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  if (n == 0) throw ShapeError("mean of an empty matrix");
  Matrix out(1, 1);
  out(0, 0) = x.value().sum() / n;
  return x.tape()->record(std::move(out), {x}, [x, n](Tape& t, const Matrix& g) {
    t.accumulate(x, Matrix::Constant(x.rows(), x.cols(), g(0, 0) / n));
  });
}

}  // namespace bcr::nn
