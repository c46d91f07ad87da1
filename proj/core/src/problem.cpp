#include "cdu/problem.hpp"

#include <cmath>

#include "cdu/errors.hpp"

namespace cdu {

std::string_view to_string(Family family) { return family == Family::miqp ? "miqp" : "power"; }

Family family_from_string(std::string_view name) {
  if (name == "miqp") return Family::miqp;
  if (name == "power") return Family::power;
  throw ConfigError("unknown problem family '" + std::string(name) + "'");
}

ProblemInstance::ProblemInstance(RelaxedQp qp)
    : n_vars_(qp.n()), n_cons_(qp.rows()) {
  if (n_cons_ < 1) throw ParameterError("problem instance needs at least one constraint");
  auto shared = std::make_shared<const RelaxedQp>(std::move(qp));
  gso_ = std::make_shared<const Matrix>(build_gso(*shared));
  payload_ = std::move(shared);
}

ProblemInstance::ProblemInstance(NetworkInstance net) : n_vars_(net.n()), n_cons_(net.n()) {
  auto shared = std::make_shared<const NetworkInstance>(std::move(net));
  gso_ = std::make_shared<const Matrix>(shared->gso());
  payload_ = std::move(shared);
}

Family ProblemInstance::family() const noexcept {
  return payload_.index() == 0 ? Family::miqp : Family::power;
}

const RelaxedQp& ProblemInstance::qp() const {
  if (payload_.index() != 0) throw ContractError("instance is not a QP");
  return *std::get<0>(payload_);
}

const NetworkInstance& ProblemInstance::network() const {
  if (payload_.index() != 1) throw ContractError("instance is not a power network");
  return *std::get<1>(payload_);
}

namespace {

void check_x(const Vector& x, const ProblemInstance& z) {
  if (x.size() != z.n_vars()) throw DimensionError("x", z.n_vars(), x.size());
}

void check_lambda(const Vector& lambda, const ProblemInstance& z) {
  if (lambda.size() != z.n_cons()) throw DimensionError("lambda", z.n_cons(), lambda.size());
  if ((lambda.array() < 0.0).any()) throw ContractError("multipliers must be nonnegative");
}

}  // namespace

double objective(const Vector& x, const ProblemInstance& z) {
  check_x(x, z);
  if (z.family() == Family::miqp) {
    const RelaxedQp& qp = z.qp();
    return 0.5 * x.dot(qp.P() * x) + qp.q().dot(x);
  }
  return -rates(x, z.network()).sum();
}

Vector constraints(const Vector& x, const ProblemInstance& z) {
  check_x(x, z);
  if (z.family() == Family::miqp) {
    const RelaxedQp& qp = z.qp();
    return qp.A() * x - qp.b();
  }
  const NetworkInstance& net = z.network();
  return net.rate_targets() - rates(x, net);
}

double lagrangian(const Vector& x, const Vector& lambda, const ProblemInstance& z) {
  check_lambda(lambda, z);
  return objective(x, z) + lambda.dot(constraints(x, z));
}

Vector lagrangian_gradient(const Vector& x, const Vector& lambda, const ProblemInstance& z) {
  check_x(x, z);
  check_lambda(lambda, z);
  if (z.family() == Family::miqp) {
    const RelaxedQp& qp = z.qp();
    return qp.P() * x + qp.q() + qp.A().transpose() * lambda;
  }
  return power_lagrangian_gradient(x, lambda, z.network());
}

Vector violation(const Vector& x, const ProblemInstance& z) { return constraints(x, z).cwiseMax(0.0); }

ViolationSummary summarize(const Vector& violations) {
  if (violations.size() == 0) return {};
  return {violations.mean(), violations.maxCoeff()};
}

double complementary_slackness(const Vector& lambda, const Vector& x, const ProblemInstance& z) {
  check_lambda(lambda, z);
  return lambda.dot(violation(x, z));
}

namespace taped {

namespace {

struct PowerTerms {
  ad::Var interference;
  ad::Var total;
};

PowerTerms power_terms(ad::Var p, const NetworkInstance& net) {
  ad::Tape& t = *p.tape();
  const ad::Var u = (1.0 / net.p_max()) * p;
  PowerTerms terms;
  terms.interference = add_const(matmul(t.constant(Matrix(net.snr_cross_gains().transpose())), u), 1.0);
  terms.total = terms.interference + hadamard(t.constant(Vector(net.snr_gains().diagonal())), u);
  return terms;
}

ad::Var power_rates(ad::Var p, const NetworkInstance& net) {
  const PowerTerms terms = power_terms(p, net);
  return net.log_scale() * (log(terms.total) - log(terms.interference));
}

}  // namespace

ad::Var constraints(ad::Var x, const ProblemInstance& z) {
  if (x.rows() != z.n_vars()) throw DimensionError("x", z.n_vars(), x.rows());
  ad::Tape& t = *x.tape();
  if (z.family() == Family::miqp) {
    const RelaxedQp& qp = z.qp();
    return matmul(t.constant(qp.A()), x) - t.constant(qp.b());
  }
  const NetworkInstance& net = z.network();
  return t.constant(net.rate_targets()) - power_rates(x, net);
}

ad::Var lagrangian(ad::Var x, ad::Var lambda, const ProblemInstance& z) {
  if (x.rows() != z.n_vars()) throw DimensionError("x", z.n_vars(), x.rows());
  if (lambda.rows() != z.n_cons()) throw DimensionError("lambda", z.n_cons(), lambda.rows());
  ad::Tape& t = *x.tape();
  if (z.family() == Family::miqp) {
    const RelaxedQp& qp = z.qp();
    const ad::Var quad = 0.5 * dot(x, matmul(t.constant(qp.P()), x));
    return quad + dot(t.constant(qp.q()), x) + dot(lambda, constraints(x, z));
  }
  const NetworkInstance& net = z.network();
  const ad::Var r = power_rates(x, net);
  return dot(lambda, t.constant(net.rate_targets()) - r) - sum(r);
}

ad::Var lagrangian_gradient(ad::Var x, ad::Var lambda, const ProblemInstance& z) {
  if (x.rows() != z.n_vars()) throw DimensionError("x", z.n_vars(), x.rows());
  if (lambda.rows() != z.n_cons()) throw DimensionError("lambda", z.n_cons(), lambda.rows());
  ad::Tape& t = *x.tape();
  if (z.family() == Family::miqp) {
    const RelaxedQp& qp = z.qp();
    return matmul(t.constant(qp.P()), x) + t.constant(qp.q()) +
           matmul(t.constant(Matrix(qp.A().transpose())), lambda);
  }
  const NetworkInstance& net = z.network();
  const PowerTerms terms = power_terms(x, net);
  const ad::Var w = add_const(lambda, 1.0);
  const ad::Var direct = matmul(t.constant(net.snr_gains()), divide(w, terms.total));
  const ad::Var cross = matmul(t.constant(net.snr_cross_gains()), divide(w, terms.interference));
  return (-net.log_scale() / net.p_max()) * (direct - cross);
}

}  // namespace taped

}  // namespace cdu
