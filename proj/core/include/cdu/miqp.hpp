#pragma once

// Mixed-integer QPs with +-1 binary variables, their box relaxation to a
// convex QP, and the exact oracles used as ground truth.

#include <cstdint>
#include <vector>

#include "cdu/types.hpp"

namespace cdu {

/// min 1/2 x'Px + q'x  s.t.  A_bar x <= b_bar,  x_i in {-1, 1} for i in binary.
struct MiqpInstance {
  Matrix P;
  Vector q;
  Matrix A_bar;
  Vector b_bar;
  std::vector<int> binary;  // zero-based, strictly increasing

  int n() const { return static_cast<int>(q.size()); }
  int m() const { return static_cast<int>(b_bar.size()); }
  int r() const { return static_cast<int>(binary.size()); }

  /// Throws DimensionError / ParameterError when the invariants do not hold.
  void validate() const;
};

/// The convex relaxation min 1/2 x'Px + q'x s.t. Ax <= b with
/// A = [A_bar; M; -M], b = [b_bar; 1; 1]. Immutable; caches a Cholesky
/// factor of P.
class RelaxedQp {
public:
  RelaxedQp(Matrix P, Vector q, Matrix A, Vector b, std::vector<int> binary, int linear_rows);

  const Matrix& P() const noexcept { return P_; }
  const Vector& q() const noexcept { return q_; }
  const Matrix& A() const noexcept { return A_; }
  const Vector& b() const noexcept { return b_; }
  const std::vector<int>& binary() const noexcept { return binary_; }
  int n() const noexcept { return static_cast<int>(q_.size()); }
  int rows() const noexcept { return static_cast<int>(b_.size()); }
  int linear_rows() const noexcept { return linear_rows_; }
  double condition_number() const noexcept { return condition_; }

  /// P^{-1} v via the cached factor.
  Vector solve(const Vector& v) const;
  /// P^{-1} B, column by column.
  Matrix solve_many(const Matrix& B) const;

private:
  Matrix P_;
  Vector q_;
  Matrix A_;
  Vector b_;
  std::vector<int> binary_;
  int linear_rows_;
  double condition_;
  Eigen::LLT<Matrix> chol_;
};

/// Random instance: A_bar, q standard normal, A_bar scaled to unit spectral
/// norm, P = G'G/n + 0.1 I, b_bar = A_bar x0 + U[0,1) with x0 a clipped
/// standard-normal point, binary set a uniform r-subset.
MiqpInstance generate_instance(int n, int m, int r, std::uint64_t seed);

RelaxedQp relax(const MiqpInstance& inst);

/// argmin_x L(x, lambda) = -P^{-1}(q + A' lambda).
/// Throws OracleError when cond(P) > 1e12.
Vector analytic_minimizer(const Vector& lambda, const RelaxedQp& qp);

/// g(lambda) = L(x*(lambda), lambda).
double dual_function(const Vector& lambda, const RelaxedQp& qp);

struct QpSolution {
  Vector x;
  Vector lambda;
  double value = 0.0;
  double stationarity = 0.0;       // ||Px + q + A'lambda||
  double max_violation = 0.0;      // max_i max(0, (Ax - b)_i)
  double slackness = 0.0;          // lambda' max(0, Ax - b)
  double abs_complementarity = 0.0;  // |lambda'(Ax - b)|
  double duality_gap = 0.0;        // P(x) - g(lambda)
  int iterations = 0;
};

struct ReferenceSolveOptions {
  double tolerance = 1e-9;
  int max_iterations = 200000;
};

/// Reference convex-QP oracle. Maximizes the dual function by accelerated
/// projected gradient on lambda >= 0 (x from the analytic minimizer at every
/// step), then polishes on the detected active set. Throws OracleError when
/// the KKT residuals do not fall below 1e-6 within the budget.
QpSolution reference_solve(const RelaxedQp& qp, const ReferenceSolveOptions& options = {});

/// Bipartite variable/constraint shift operator [[P, A'], [A, 0]].
Matrix build_gso(const RelaxedQp& qp);

}  // namespace cdu
