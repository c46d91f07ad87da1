#pragma once

// Reverse-mode automatic differentiation over dense matrices.
//
// A Tape records every operation as a node holding its value. `backward`
// walks the nodes in reverse and accumulates adjoints; leaves created with
// `parameter(value, &sink)` add their gradient into `sink`. Constants and
// parameters bound without a sink are treated as fixed inputs, so no adjoint
// is propagated into them.

#include <cstdint>
#include <vector>

#include "cdu/types.hpp"

namespace cdu::ad {

class Tape;

/// Lightweight handle to a tape node. Valid until the owning tape is cleared.
class Var {
public:
  Var() = default;

  const Matrix& value() const;
  double scalar() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool valid() const noexcept { return tape_ != nullptr; }
  Tape* tape() const noexcept { return tape_; }
  int id() const noexcept { return id_; }

private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
public:
  Tape() { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  template <class Derived>
  Var constant(const Eigen::MatrixBase<Derived>& value) { return constant(Matrix(value)); }
  Var scalar(double value);
  /// Leaf whose gradient is accumulated into `sink` (same shape). A null sink
  /// makes it a constant.
  Var parameter(const Matrix& value, Matrix* sink);

  /// Accumulates d(output)/d(leaf) * seed into every parameter sink.
  /// `output` must be 1x1.
  void backward(Var output, double seed = 1.0);

  void clear() { nodes_.clear(); }
  std::size_t size() const noexcept { return nodes_.size(); }

  enum class Op : std::uint8_t {
    leaf, add, sub, mul, div, matmul, scale, add_const, add_bcast, tanh,
    relu, leaky_relu, sigmoid, log, sum, dot, norm, rows, vstack, hstack
  };

  // Used by the free functions below.
  Var record(Op op, Matrix value, int a, int b = -1, double s = 0.0, int i0 = 0);
  const Matrix& value_of(int id) const { return nodes_[id].value; }
  bool tracks(int id) const { return nodes_[id].tracks; }

private:
  struct Node {
    Op op = Op::leaf;
    int a = -1;
    int b = -1;
    double s = 0.0;
    int i0 = 0;
    bool tracks = false;
    Matrix* sink = nullptr;
    Matrix value;
    Matrix grad;
  };

  std::vector<Node> nodes_;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(double s, Var a);
Var hadamard(Var a, Var b);
Var divide(Var a, Var b);
Var matmul(Var a, Var b);
Var add_const(Var a, double c);
/// a + s * ones, where s is a 1x1 node.
Var add_broadcast(Var a, Var s);
Var tanh(Var a);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var sigmoid(Var a);
Var log(Var a);
Var sum(Var a);
Var dot(Var a, Var b);
/// Euclidean (Frobenius) norm; the gradient at zero is taken as zero.
Var norm(Var a);
Var rows(Var a, int start, int count);
Var vstack(Var top, Var bottom);
Var hstack(Var left, Var right);

}  // namespace cdu::ad
