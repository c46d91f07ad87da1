#include "cdu/miqp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "cdu/errors.hpp"

namespace cdu {
namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kMaxCondition = 1e12;
constexpr double kKktTol = 1e-6;

void check_binary(const std::vector<int>& binary, int n) {
  for (std::size_t i = 0; i < binary.size(); ++i) {
    if (binary[i] < 0 || binary[i] >= n) throw ParameterError("binary index out of range");
    if (i > 0 && binary[i] <= binary[i - 1]) {
      throw ParameterError("binary indices must be strictly increasing without duplicates");
    }
  }
  if (static_cast<int>(binary.size()) > n) throw ParameterError("more binary variables than variables");
}

void check_spd(const Matrix& P) {
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol) throw ParameterError("P is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(P, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 0.0) throw ParameterError("P is not positive definite");
}

double qp_objective(const RelaxedQp& qp, const Vector& x) { return 0.5 * x.dot(qp.P() * x) + qp.q().dot(x); }

}  // namespace

void MiqpInstance::validate() const {
  const int nv = n();
  if (nv < 1) throw ParameterError("n must be >= 1");
  if (P.rows() != nv) throw DimensionError("P rows", nv, P.rows());
  if (P.cols() != nv) throw DimensionError("P cols", nv, P.cols());
  if (A_bar.rows() != m()) throw DimensionError("A_bar rows", m(), A_bar.rows());
  if (A_bar.cols() != nv && m() > 0) throw DimensionError("A_bar cols", nv, A_bar.cols());
  check_binary(binary, nv);
  check_spd(P);
}

RelaxedQp::RelaxedQp(Matrix P, Vector q, Matrix A, Vector b, std::vector<int> binary, int linear_rows)
    : P_(std::move(P)), q_(std::move(q)), A_(std::move(A)), b_(std::move(b)), binary_(std::move(binary)),
      linear_rows_(linear_rows) {
  const int nv = n();
  if (nv < 1) throw ParameterError("n must be >= 1");
  if (P_.rows() != nv) throw DimensionError("P rows", nv, P_.rows());
  if (P_.cols() != nv) throw DimensionError("P cols", nv, P_.cols());
  if (A_.rows() != rows()) throw DimensionError("A rows", rows(), A_.rows());
  if (A_.cols() != nv) throw DimensionError("A cols", nv, A_.cols());
  if (linear_rows_ < 0 || linear_rows_ + 2 * static_cast<int>(binary_.size()) != rows()) {
    throw DimensionError("constraint rows (m + 2r)", linear_rows_ + 2 * static_cast<long>(binary_.size()), rows());
  }
  check_binary(binary_, nv);
  if ((P_ - P_.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol) throw ParameterError("P is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(P_, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (lo <= 0.0) throw ParameterError("P is not positive definite");
  condition_ = hi / lo;
  chol_.compute(P_);
  if (chol_.info() != Eigen::Success) throw ParameterError("Cholesky factorization of P failed");
}

Vector RelaxedQp::solve(const Vector& v) const { return chol_.solve(v); }

Matrix RelaxedQp::solve_many(const Matrix& B) const { return chol_.solve(B); }

MiqpInstance generate_instance(int n, int m, int r, std::uint64_t seed) {
  if (n < 1) throw ParameterError("n must be >= 1");
  if (m < 0) throw ParameterError("m must be >= 0");
  if (r < 0 || r > n) throw ParameterError("r must satisfy 0 <= r <= n");

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x51u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix out(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
    return out;
  };

  MiqpInstance inst;
  const Matrix G = draw(n, n);
  Matrix P = G.transpose() * G / static_cast<double>(n) + 0.1 * Matrix::Identity(n, n);
  inst.P = 0.5 * (P + P.transpose());
  inst.q = draw(n, 1);
  inst.A_bar = draw(m, n);
  if (m > 0) {
    Eigen::JacobiSVD<Matrix> svd(inst.A_bar);
    inst.A_bar /= svd.singularValues()(0);
  }
  Vector x0 = draw(n, 1).col(0).cwiseMax(-1.0).cwiseMin(1.0);
  Vector eps(m);
  for (int i = 0; i < m; ++i) eps(i) = unit(rng);
  inst.b_bar = inst.A_bar * x0 + eps;

  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::shuffle(all.begin(), all.end(), rng);
  inst.binary.assign(all.begin(), all.begin() + r);
  std::sort(inst.binary.begin(), inst.binary.end());
  return inst;
}

RelaxedQp relax(const MiqpInstance& inst) {
  inst.validate();
  const int n = inst.n();
  const int m = inst.m();
  const int r = inst.r();
  Matrix M = Matrix::Zero(r, n);
  for (int i = 0; i < r; ++i) M(i, inst.binary[i]) = 1.0;
  Matrix A(m + 2 * r, n);
  if (m > 0) A.topRows(m) = inst.A_bar;
  A.middleRows(m, r) = M;
  A.bottomRows(r) = -M;
  Vector b(m + 2 * r);
  b.head(m) = inst.b_bar;
  b.tail(2 * r).setOnes();
  return RelaxedQp(inst.P, inst.q, std::move(A), std::move(b), inst.binary, m);
}

Vector analytic_minimizer(const Vector& lambda, const RelaxedQp& qp) {
  if (lambda.size() != qp.rows()) throw DimensionError("lambda", qp.rows(), lambda.size());
  if (qp.condition_number() > kMaxCondition) {
    std::ostringstream os;
    os << "P is numerically singular (condition number " << qp.condition_number() << ")";
    throw OracleError(os.str());
  }
  Vector rhs = qp.q();
  if (qp.rows() > 0) rhs.noalias() += qp.A().transpose() * lambda;
  return -qp.solve(rhs);
}

double dual_function(const Vector& lambda, const RelaxedQp& qp) {
  const Vector x = analytic_minimizer(lambda, qp);
  double value = qp_objective(qp, x);
  if (qp.rows() > 0) value += lambda.dot(qp.A() * x - qp.b());
  return value;
}

namespace {

// KKT quantities of (x(lambda), lambda).
QpSolution assess(const RelaxedQp& qp, const Vector& lambda, int iterations) {
  QpSolution s;
  s.lambda = lambda;
  s.x = analytic_minimizer(lambda, qp);
  s.value = qp_objective(qp, s.x);
  Vector grad = qp.P() * s.x + qp.q();
  double dual_value = s.value;
  if (qp.rows() > 0) {
    grad.noalias() += qp.A().transpose() * lambda;
    const Vector f = qp.A() * s.x - qp.b();
    const Vector pos = f.cwiseMax(0.0);
    s.max_violation = pos.maxCoeff();
    s.slackness = lambda.dot(pos);
    s.abs_complementarity = std::abs(lambda.dot(f));
    dual_value += lambda.dot(f);
  }
  s.stationarity = grad.norm();
  s.duality_gap = s.value - dual_value;
  s.iterations = iterations;
  return s;
}

bool meets(const QpSolution& s, double tol) {
  return s.max_violation <= tol && s.abs_complementarity <= tol && s.slackness <= tol;
}

// Minimizes 1/2 l'Ql + c'l on the support `free` with the rest clamped to 0.
Vector polish(const Matrix& Q, const Vector& c, const std::vector<int>& free) {
  Vector lambda = Vector::Zero(c.size());
  if (free.empty()) return lambda;
  const int k = static_cast<int>(free.size());
  Matrix Qf(k, k);
  Vector cf(k);
  for (int i = 0; i < k; ++i) {
    cf(i) = c(free[i]);
    for (int j = 0; j < k; ++j) Qf(i, j) = Q(free[i], free[j]);
  }
  const Vector sol = Qf.completeOrthogonalDecomposition().solve(-cf);
  for (int i = 0; i < k; ++i) lambda(free[i]) = sol(i);
  return lambda;
}

}  // namespace

QpSolution reference_solve(const RelaxedQp& qp, const ReferenceSolveOptions& options) {
  const int rows = qp.rows();
  if (rows == 0) return assess(qp, Vector::Zero(0), 0);

  // Dual as a nonnegative QP: min 1/2 l'Ql + c'l, l >= 0, whose gradient is -f(x(l)).
  const Matrix PinvAt = qp.solve_many(qp.A().transpose());
  const Matrix Q = qp.A() * PinvAt;
  const Vector c = PinvAt.transpose() * qp.q() + qp.b();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(Q, Eigen::EigenvaluesOnly);
  const double lipschitz = std::max(eig.eigenvalues().maxCoeff(), 1e-12);
  const double step = 1.0 / lipschitz;

  Vector lambda = Vector::Zero(rows);
  Vector y = lambda;
  double t = 1.0;
  double best_score = std::numeric_limits<double>::infinity();
  QpSolution best;

  auto consider = [&](const Vector& candidate, int iteration) -> bool {
    if (candidate.minCoeff() < -1e-9) return false;
    QpSolution s = assess(qp, candidate.cwiseMax(0.0), iteration);
    const double score = std::max({s.max_violation, s.abs_complementarity, s.slackness});
    if (score < best_score) {
      best_score = score;
      best = s;
    }
    return meets(s, options.tolerance);
  };

  for (int it = 1; it <= options.max_iterations; ++it) {
    const Vector grad = Q * y + c;
    Vector next = (y - step * grad).cwiseMax(0.0);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    // Adaptive restart when the momentum direction opposes descent.
    if ((next - lambda).dot(grad) > 0.0) {
      y = next;
      t = 1.0;
    } else {
      y = next + ((t - 1.0) / t_next) * (next - lambda);
      t = t_next;
    }
    lambda = std::move(next);

    if (it % 25 == 0 || it == options.max_iterations) {
      const double thresh = 1e-10 * std::max(1.0, lambda.maxCoeff());
      std::vector<int> support;
      for (int i = 0; i < rows; ++i)
        if (lambda(i) > thresh) support.push_back(i);
      if (consider(polish(Q, c, support), it)) return best;
      if (consider(lambda, it)) return best;
    }
  }

  if (best_score <= kKktTol && best.stationarity <= kKktTol) return best;
  std::ostringstream os;
  os << "reference_solve did not converge: max violation " << best.max_violation << ", |lambda'f| "
     << best.abs_complementarity << ", stationarity " << best.stationarity;
  throw OracleError(os.str());
}

Matrix build_gso(const RelaxedQp& qp) {
  const int n = qp.n();
  const int rows = qp.rows();
  Matrix S = Matrix::Zero(n + rows, n + rows);
  S.topLeftCorner(n, n) = qp.P();
  S.topRightCorner(n, rows) = qp.A().transpose();
  S.bottomLeftCorner(rows, n) = qp.A();
  return S;
}

}  // namespace cdu
