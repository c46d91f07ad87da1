#include "cdu/autodiff.hpp"

#include <cassert>
#include <cmath>

#include "cdu/errors.hpp"

namespace cdu::ad {

const Matrix& Var::value() const { return tape_->value_of(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  assert(v.size() == 1);
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::scalar(double value) { return constant(Matrix::Constant(1, 1, value)); }

Var Tape::parameter(const Matrix& value, Matrix* sink) {
  Node node;
  node.value = value;
  node.sink = sink;
  node.tracks = sink != nullptr;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Op op, Matrix value, int a, int b, double s, int i0) {
  Node node;
  node.op = op;
  node.a = a;
  node.b = b;
  node.s = s;
  node.i0 = i0;
  node.tracks = (a >= 0 && nodes_[a].tracks) || (b >= 0 && nodes_[b].tracks);
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::backward(Var output, double seed) {
  if (output.tape() != this) throw ContractError("backward: variable belongs to another tape");
  const int top = output.id();
  if (nodes_[top].value.size() != 1) {
    throw DimensionError("backward output", 1, nodes_[top].value.size());
  }
  if (!nodes_[top].tracks) return;

  for (int i = 0; i <= top; ++i) {
    if (nodes_[i].tracks) nodes_[i].grad.setZero(nodes_[i].value.rows(), nodes_[i].value.cols());
  }
  nodes_[top].grad(0, 0) = seed;

  auto acc = [&](int id) -> Matrix* { return (id >= 0 && nodes_[id].tracks) ? &nodes_[id].grad : nullptr; };

  for (int i = top; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.tracks) continue;
    const Matrix& g = n.grad;
    Matrix* ga = acc(n.a);
    Matrix* gb = acc(n.b);
    switch (n.op) {
      case Op::leaf:
        if (n.sink) *n.sink += g;
        break;
      case Op::add:
        if (ga) *ga += g;
        if (gb) *gb += g;
        break;
      case Op::sub:
        if (ga) *ga += g;
        if (gb) *gb -= g;
        break;
      case Op::mul:
        if (ga) ga->array() += g.array() * nodes_[n.b].value.array();
        if (gb) gb->array() += g.array() * nodes_[n.a].value.array();
        break;
      case Op::div: {
        const auto& va = nodes_[n.a].value.array();
        const auto& vb = nodes_[n.b].value.array();
        if (ga) ga->array() += g.array() / vb;
        if (gb) gb->array() -= g.array() * va / vb.square();
        break;
      }
      case Op::matmul:
        if (ga) ga->noalias() += g * nodes_[n.b].value.transpose();
        if (gb) gb->noalias() += nodes_[n.a].value.transpose() * g;
        break;
      case Op::scale:
        if (ga) *ga += n.s * g;
        break;
      case Op::add_const:
        if (ga) *ga += g;
        break;
      case Op::add_bcast:
        if (ga) *ga += g;
        if (gb) (*gb)(0, 0) += g.sum();
        break;
      case Op::tanh:
        if (ga) ga->array() += g.array() * (1.0 - n.value.array().square());
        break;
      case Op::relu:
        if (ga) ga->array() += (nodes_[n.a].value.array() > 0.0).select(g.array(), 0.0);
        break;
      case Op::leaky_relu:
        if (ga) ga->array() += (nodes_[n.a].value.array() > 0.0).select(g.array(), n.s * g.array());
        break;
      case Op::sigmoid:
        if (ga) ga->array() += g.array() * n.value.array() * (1.0 - n.value.array());
        break;
      case Op::log:
        if (ga) ga->array() += g.array() / nodes_[n.a].value.array();
        break;
      case Op::sum:
        if (ga) ga->array() += g(0, 0);
        break;
      case Op::dot:
        if (ga) *ga += g(0, 0) * nodes_[n.b].value;
        if (gb) *gb += g(0, 0) * nodes_[n.a].value;
        break;
      case Op::norm:
        if (ga && n.value(0, 0) > 0.0) *ga += (g(0, 0) / n.value(0, 0)) * nodes_[n.a].value;
        break;
      case Op::rows:
        if (ga) ga->middleRows(n.i0, n.value.rows()) += g;
        break;
      case Op::vstack:
        if (ga) *ga += g.topRows(nodes_[n.a].value.rows());
        if (gb) *gb += g.bottomRows(nodes_[n.b].value.rows());
        break;
      case Op::hstack:
        if (ga) *ga += g.leftCols(nodes_[n.a].value.cols());
        if (gb) *gb += g.rightCols(nodes_[n.b].value.cols());
        break;
    }
  }
}

namespace {

Tape& tape_of(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) throw ContractError("autodiff: operands on different tapes");
  return *a.tape();
}

void same_shape(const char* what, Var a, Var b) {
  if (a.rows() != b.rows()) throw DimensionError(std::string(what) + " rows", a.rows(), b.rows());
  if (a.cols() != b.cols()) throw DimensionError(std::string(what) + " cols", a.cols(), b.cols());
}

}  // namespace

using Op = Tape::Op;

Var operator+(Var a, Var b) {
  same_shape("add", a, b);
  return tape_of(a, b).record(Op::add, a.value() + b.value(), a.id(), b.id());
}

Var operator-(Var a, Var b) {
  same_shape("sub", a, b);
  return tape_of(a, b).record(Op::sub, a.value() - b.value(), a.id(), b.id());
}

Var operator*(double s, Var a) { return a.tape()->record(Op::scale, s * a.value(), a.id(), -1, s); }

Var hadamard(Var a, Var b) {
  same_shape("hadamard", a, b);
  return tape_of(a, b).record(Op::mul, a.value().cwiseProduct(b.value()), a.id(), b.id());
}

Var divide(Var a, Var b) {
  same_shape("divide", a, b);
  return tape_of(a, b).record(Op::div, a.value().cwiseQuotient(b.value()), a.id(), b.id());
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul inner", a.cols(), b.rows());
  Matrix v = a.value() * b.value();
  return tape_of(a, b).record(Op::matmul, std::move(v), a.id(), b.id());
}

Var add_const(Var a, double c) {
  return a.tape()->record(Op::add_const, (a.value().array() + c).matrix(), a.id(), -1, c);
}

Var add_broadcast(Var a, Var s) {
  if (s.value().size() != 1) throw DimensionError("add_broadcast scalar", 1, s.value().size());
  return tape_of(a, s).record(Op::add_bcast, (a.value().array() + s.scalar()).matrix(), a.id(), s.id());
}

Var tanh(Var a) { return a.tape()->record(Op::tanh, a.value().array().tanh().matrix(), a.id()); }

Var relu(Var a) { return a.tape()->record(Op::relu, a.value().cwiseMax(0.0), a.id()); }

Var leaky_relu(Var a, double slope) {
  Matrix v = (a.value().array() > 0.0).select(a.value().array(), slope * a.value().array()).matrix();
  return a.tape()->record(Op::leaky_relu, std::move(v), a.id(), -1, slope);
}

Var sigmoid(Var a) {
  Matrix v = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return a.tape()->record(Op::sigmoid, std::move(v), a.id());
}

Var log(Var a) { return a.tape()->record(Op::log, a.value().array().log().matrix(), a.id()); }

Var sum(Var a) { return a.tape()->record(Op::sum, Matrix::Constant(1, 1, a.value().sum()), a.id()); }

Var dot(Var a, Var b) {
  same_shape("dot", a, b);
  const double v = a.value().cwiseProduct(b.value()).sum();
  return tape_of(a, b).record(Op::dot, Matrix::Constant(1, 1, v), a.id(), b.id());
}

Var norm(Var a) { return a.tape()->record(Op::norm, Matrix::Constant(1, 1, a.value().norm()), a.id()); }

Var rows(Var a, int start, int count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw DimensionError("rows range", a.rows(), start + count);
  }
  return a.tape()->record(Op::rows, a.value().middleRows(start, count), a.id(), -1, 0.0, start);
}

Var vstack(Var top, Var bottom) {
  if (top.cols() != bottom.cols()) throw DimensionError("vstack cols", top.cols(), bottom.cols());
  Matrix v(top.rows() + bottom.rows(), top.cols());
  v << top.value(), bottom.value();
  return tape_of(top, bottom).record(Op::vstack, std::move(v), top.id(), bottom.id());
}

Var hstack(Var left, Var right) {
  if (left.rows() != right.rows()) throw DimensionError("hstack rows", left.rows(), right.rows());
  Matrix v(left.rows(), left.cols() + right.cols());
  v << left.value(), right.value();
  return tape_of(left, right).record(Op::hstack, std::move(v), left.id(), right.id());
}

}  // namespace cdu::ad
