#include <doctest.h>

#include "cdu/baselines.hpp"
#include "cdu/errors.hpp"
#include "cdu/miqp.hpp"
#include "cdu/problem.hpp"
#include "oracles.hpp"

using namespace cdu;

namespace {

RelaxedQp scalar_qp(double p, double q, double a, double b) {
  return RelaxedQp(Matrix::Constant(1, 1, p), Vector::Constant(1, q), Matrix::Constant(1, 1, a), Vector::Constant(1, b), {}, 1);
}

Vector uniform(int n, std::mt19937& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (auto& e : v) e = u(rng);
  return v;
}

}  // namespace

TEST_CASE("generated instances have the requested shape") {
  const MiqpInstance inst = generate_instance(80, 45, 10, 1);
  CHECK(inst.n() == 80);
  CHECK(inst.m() == 45);
  CHECK(inst.r() == 10);
  CHECK(inst.A_bar.cols() == 80);
  const RelaxedQp qp = relax(inst);
  CHECK(qp.rows() == 65);

  const MiqpInstance bare = generate_instance(2, 0, 0, 1);
  CHECK(bare.m() == 0);
  CHECK(relax(bare).rows() == 0);
  CHECK_THROWS_AS(generate_instance(3, 1, 4, 1), ParameterError);
}

TEST_CASE("generation is deterministic and seeds differ") {
  const MiqpInstance a = generate_instance(10, 5, 3, 42);
  const MiqpInstance b = generate_instance(10, 5, 3, 42);
  const MiqpInstance c = generate_instance(10, 5, 3, 43);
  CHECK(a.P == b.P);
  CHECK(a.A_bar == b.A_bar);
  CHECK(a.b_bar == b.b_bar);
  CHECK(a.binary == b.binary);
  CHECK(a.q != c.q);
}

TEST_CASE("generated P is positive definite and A_bar has unit spectral norm") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const MiqpInstance inst = generate_instance(12, 6, 3, seed);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(inst.P);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
    CHECK((inst.P - inst.P.transpose()).norm() <= 1e-12);
    Eigen::JacobiSVD<Matrix> svd(inst.A_bar);
    CHECK(svd.singularValues()(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(inst.binary.size() == 3);
  }
}

TEST_CASE("generated relaxations are strictly feasible on the linear rows") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const RelaxedQp qp = relax(generate_instance(10, 6, 3, seed));
    Vector b = qp.b();
    b.head(qp.linear_rows()).array() -= 1e-7;
    const RelaxedQp tightened(qp.P(), Vector::Zero(qp.n()), qp.A(), b, qp.binary(), qp.linear_rows());
    CHECK_NOTHROW(reference_solve(tightened));
  }
}

TEST_CASE("relaxation stacks the selection rows") {
  const MiqpInstance inst = generate_instance(5, 3, 0, 4);
  const RelaxedQp plain = relax(inst);
  CHECK(plain.A() == inst.A_bar);
  CHECK(plain.b() == inst.b_bar);

  MiqpInstance two;
  two.P = Matrix::Identity(2, 2);
  two.q = Vector::Zero(2);
  two.A_bar = Matrix::Ones(1, 2);
  two.b_bar = Vector::Ones(1);
  two.binary = {1};
  const RelaxedQp r = relax(two);
  REQUIRE(r.rows() == 3);
  CHECK(r.A().row(1) == (Eigen::RowVectorXd(2) << 0.0, 1.0).finished());
  CHECK(r.A().row(2) == (Eigen::RowVectorXd(2) << 0.0, -1.0).finished());
  CHECK(r.b().tail(2) == Vector::Ones(2));
}

TEST_CASE("relaxed constraints equal the stacked linear and box rows") {
  const MiqpInstance inst = generate_instance(8, 4, 3, 9);
  const ProblemInstance z(relax(inst));
  std::mt19937 rng(1);
  for (int t = 0; t < 20; ++t) {
    const Vector x = uniform(8, rng, -2.0, 2.0);
    const Vector f = constraints(x, z);
    const Vector lin = inst.A_bar * x - inst.b_bar;
    for (int i = 0; i < 4; ++i) CHECK(f[i] == doctest::Approx(lin[i]).epsilon(1e-14));
    for (int j = 0; j < 3; ++j) {
      CHECK(f[4 + j] == doctest::Approx(x[inst.binary[j]] - 1.0));
      CHECK(f[7 + j] == doctest::Approx(-x[inst.binary[j]] - 1.0));
    }
  }
}

TEST_CASE("feasible points of the relaxation satisfy all constraints") {
  MiqpInstance inst = generate_instance(6, 4, 2, 21);
  const ProblemInstance z(relax(inst));
  std::mt19937 rng(2);
  int tested = 0;
  for (int t = 0; t < 500 && tested < 20; ++t) {
    const Vector x = uniform(6, rng, -1.0, 1.0);
    if (((inst.A_bar * x - inst.b_bar).array() <= 0.0).all()) {
      CHECK((constraints(x, z).array() <= 0.0).all());
      ++tested;
    }
  }
  CHECK(tested > 0);
}

TEST_CASE("analytic minimizer") {
  const RelaxedQp zero(Matrix::Identity(3, 3), Vector::Zero(3), Matrix::Identity(3, 3), Vector::Ones(3), {}, 3);
  CHECK(analytic_minimizer(Vector::Zero(3), zero).norm() == 0.0);
  const RelaxedQp two(2.0 * Matrix::Identity(3, 3), Vector::Ones(3), Matrix::Identity(3, 3), Vector::Ones(3), {}, 3);
  CHECK(analytic_minimizer(Vector::Zero(3), two).isApprox(Vector::Constant(3, -0.5), 1e-15));

  const RelaxedQp bad(Matrix((Vector(2) << 1.0, 1e-13).finished().asDiagonal()), Vector::Zero(2),
                      Matrix::Identity(2, 2), Vector::Ones(2), {}, 2);
  CHECK_THROWS_AS(analytic_minimizer(Vector::Zero(2), bad), OracleError);
}

TEST_CASE("analytic minimizer is stationary and optimal") {
  std::mt19937 rng(3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RelaxedQp qp = relax(generate_instance(10, 5, 3, seed));
    const ProblemInstance z(qp);
    const Vector lam = uniform(qp.rows(), rng, 0.0, 3.0);
    const Vector xs = analytic_minimizer(lam, qp);
    CHECK((qp.P() * xs + qp.q() + qp.A().transpose() * lam).norm() <= 1e-8 * (1.0 + qp.q().norm()));
    const double best = lagrangian(xs, lam, z);
    for (int t = 0; t < 100; ++t) CHECK(best <= lagrangian(uniform(10, rng, -3.0, 3.0), lam, z) + 1e-12);
  }
}

TEST_CASE("dual function is concave") {
  std::mt19937 rng(4);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const RelaxedQp qp = relax(generate_instance(8, 4, 2, seed));
    for (int t = 0; t < 10; ++t) {
      const Vector l1 = uniform(qp.rows(), rng, 0.0, 2.0);
      const Vector l2 = uniform(qp.rows(), rng, 0.0, 2.0);
      const double a = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      CHECK(dual_function(a * l1 + (1 - a) * l2, qp) >= a * dual_function(l1, qp) + (1 - a) * dual_function(l2, qp) - 1e-8);
    }
  }
}

TEST_CASE("reference solver on hand-derived scalar problems") {
  // min x^2 + x s.t. x <= 1: unconstrained minimizer -1/2 is feasible.
  const QpSolution a = reference_solve(scalar_qp(2.0, 1.0, 1.0, 1.0));
  CHECK(std::abs(a.x[0] + 0.5) <= 1e-10);
  CHECK(std::abs(a.lambda[0]) <= 1e-10);
  CHECK(std::abs(a.value + 0.25) <= 1e-10);
  // min x^2 s.t. x >= 1: stationarity 2x - lambda = 0 at x = 1.
  const QpSolution b = reference_solve(scalar_qp(2.0, 0.0, -1.0, -1.0));
  CHECK(std::abs(b.x[0] - 1.0) <= 1e-10);
  CHECK(std::abs(b.lambda[0] - 2.0) <= 1e-10);
  CHECK(std::abs(b.value - 1.0) <= 1e-10);
}

TEST_CASE("reference solver meets KKT tolerances and matches active-set enumeration") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const RelaxedQp qp = relax(generate_instance(5, 4, 3, seed));
    const QpSolution s = reference_solve(qp);
    const ProblemInstance z(qp);
    CHECK((qp.P() * s.x + qp.q() + qp.A().transpose() * s.lambda).norm() <= 1e-6);
    CHECK(violation(s.x, z).maxCoeff() <= 1e-6);
    CHECK(complementary_slackness(s.lambda, s.x, z) <= 1e-6);
    CHECK((s.lambda.array() >= 0.0).all());
    const auto exact = oracle::enumerate_active_sets(qp.P(), qp.q(), qp.A(), qp.b());
    REQUIRE(exact.has_value());
    CHECK((s.x - exact->x).norm() <= 1e-7);
    CHECK(std::abs(s.value - exact->value) <= 1e-8 * (1.0 + std::abs(exact->value)));
  }
}

TEST_CASE("reference value bounds the dual function") {
  std::mt19937 rng(5);
  const RelaxedQp qp = relax(generate_instance(20, 10, 4, 77));
  const QpSolution s = reference_solve(qp);
  for (int t = 0; t < 50; ++t) CHECK(dual_function(uniform(qp.rows(), rng, 0.0, 2.0), qp) <= s.value + 1e-9);
}

TEST_CASE("long dual ascent agrees with the reference value") {
  const RelaxedQp qp = relax(generate_instance(20, 10, 4, 5));
  const QpSolution s = reference_solve(qp);
  const ProblemInstance z(qp);
  DaConfig cfg;
  cfg.step = 0.01;
  cfg.iterations = 10000;
  const DualTrajectory t = dual_ascent(z, cfg);
  const double l = t.diagnostics.back().lagrangian;
  CHECK(std::abs(l - s.value) <= 1e-3 * (1.0 + std::abs(s.value)));
}

TEST_CASE("bipartite shift operator") {
  const RelaxedQp one(Matrix::Constant(1, 1, 3.0), Vector::Zero(1), Matrix::Zero(2, 1), Vector::Ones(2), {}, 2);
  const Matrix S1 = build_gso(one);
  Matrix expect = Matrix::Zero(3, 3);
  expect(0, 0) = 3.0;
  CHECK(S1 == expect);

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const RelaxedQp qp = relax(generate_instance(9, 4, 2, seed));
    const Matrix S = build_gso(qp);
    CHECK(S.rows() == 9 + 8);
    CHECK((S - S.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(S.topLeftCorner(9, 9) == qp.P());
    CHECK(S.bottomLeftCorner(8, 9) == qp.A());
    CHECK(S.bottomRightCorner(8, 8).isZero(0.0));
  }
}
