#include <doctest.h>

#include "cdu/baselines.hpp"
#include "cdu/errors.hpp"
#include "fixtures.hpp"

using namespace cdu;

namespace {

ProblemInstance scalar_qp() {
  // min 0.5 x^2 - 2x s.t. x <= 1; KKT point x = 1, lambda = 1.
  return ProblemInstance(RelaxedQp(Matrix::Identity(1, 1), Vector::Constant(1, -2.0), Matrix::Identity(1, 1),
                                   Vector::Ones(1), {}, 1));
}

}  // namespace

TEST_CASE("dual ascent converges on the scalar KKT example") {
  DaConfig cfg;
  cfg.step = 0.1;
  cfg.iterations = 400;
  const DualTrajectory t = dual_ascent(scalar_qp(), cfg);
  CHECK(t.layers() == 400);
  CHECK(t.multipliers.front()[0] == 0.0);
  CHECK(t.final_multiplier()[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(t.solution()[0] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("dual ascent leaves zero multipliers alone when the free minimizer is feasible") {
  const ProblemInstance z(RelaxedQp(Matrix::Identity(1, 1), Vector::Constant(1, -0.5), Matrix::Identity(1, 1),
                                    Vector::Ones(1), {}, 1));
  DaConfig cfg;
  cfg.iterations = 50;
  const DualTrajectory t = dual_ascent(z, cfg);
  for (const Vector& l : t.multipliers) CHECK(l[0] == 0.0);
}

TEST_CASE("dual ascent is monotone for small steps and stays nonnegative") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ProblemInstance z = fixture::qp(10, 5, 2, seed);
    DaConfig cfg;
    cfg.step = 1e-4;
    cfg.iterations = 200;
    cfg.initial = Vector::Constant(z.n_cons(), 0.3);
    const DualTrajectory t = dual_ascent(z, cfg);
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < t.multipliers.size(); ++l) {
      CHECK((t.multipliers[l].array() >= 0.0).all());
      const double g = dual_function(t.multipliers[l], z.qp());
      CHECK(g >= prev - 1e-9);
      prev = g;
      CHECK(t.diagnostics[l].lagrangian == doctest::Approx(g).epsilon(1e-10));
    }
  }
}

TEST_CASE("dual ascent diagnostics match a recomputation") {
  const ProblemInstance z = fixture::qp(6, 3, 2, 9);
  DaConfig cfg;
  cfg.iterations = 20;
  const DualTrajectory t = dual_ascent(z, cfg);
  for (std::size_t l = 0; l < t.multipliers.size(); ++l) {
    const Vector x = analytic_minimizer(t.multipliers[l], z.qp());
    CHECK((t.primals[l] - x).norm() <= 1e-12);
    const LayerDiagnostics d = diagnose(x, t.multipliers[l], z);
    CHECK(t.diagnostics[l].constraint_norm == doctest::Approx(d.constraint_norm));
    CHECK(t.diagnostics[l].violation_max == doctest::Approx(d.violation_max));
  }
  for (std::size_t l = 0; l + 1 < t.multipliers.size(); ++l) {
    const Vector expect = (t.multipliers[l] + cfg.step * constraints(t.primals[l], z)).cwiseMax(0.0);
    CHECK((t.multipliers[l + 1] - expect).norm() <= 1e-14);
  }
}

TEST_CASE("dual ascent configuration errors") {
  DaConfig cfg;
  cfg.step = 0.0;
  CHECK_THROWS_AS(dual_ascent(scalar_qp(), cfg), ConfigError);
  cfg.step = 0.1;
  cfg.iterations = 0;
  CHECK_THROWS_AS(dual_ascent(scalar_qp(), cfg), ConfigError);
  cfg.iterations = 5;
  cfg.inner = InnerMinimizer::primal_net;
  CHECK_THROWS_AS(dual_ascent(scalar_qp(), cfg), ConfigError);
  cfg.inner = InnerMinimizer::grid;
  CHECK_THROWS(dual_ascent(scalar_qp(), cfg));
  cfg.inner = InnerMinimizer::analytic;
  cfg.initial = Vector::Ones(3);
  CHECK_THROWS_AS(dual_ascent(scalar_qp(), cfg), DimensionError);
}

TEST_CASE("state-augmented dynamics defaults") {
  const DaConfig cfg = state_augmented_defaults();
  CHECK(cfg.step == 0.05);
  CHECK(cfg.iterations == 600);
  CHECK(cfg.inner == InnerMinimizer::primal_net);
  CHECK(DaConfig{}.step == 0.01);
}

TEST_CASE("state-augmented dynamics with a zero primal net") {
  PrimalNet primal = fixture::primal(Family::power, 3, 4);
  primal.zero_heads();
  const ProblemInstance z = fixture::network(6, 0.5, 4);
  DaConfig cfg = state_augmented_defaults();
  cfg.iterations = 30;
  cfg.seed = 5;
  const DualTrajectory t = state_augmented_da(z, primal, cfg);
  const Vector f = constraints(t.primals.front(), z);
  for (std::size_t l = 0; l < t.primals.size(); ++l) {
    CHECK(t.primals[l] == t.primals.front());
    CHECK((t.multipliers[l].array() >= 0.0).all());
    if (l + 1 < t.primals.size()) {
      const Vector expect = (t.multipliers[l] + cfg.step * f).cwiseMax(0.0);
      CHECK((t.multipliers[l + 1] - expect).norm() <= 1e-12);
    }
  }
  CHECK(t.primal_queries == 31);
}

TEST_CASE("state-augmented dynamics is dual ascent with the network as inner minimizer") {
  const PrimalNet primal = fixture::primal(Family::power, 3, 6);
  const ProblemInstance z = fixture::network(5, 0.6, 6);
  DaConfig cfg = state_augmented_defaults();
  cfg.iterations = 15;
  cfg.seed = 8;
  const DualTrajectory sa = state_augmented_da(z, primal, cfg);
  const DualTrajectory da = dual_ascent(z, cfg, &primal);
  for (std::size_t l = 0; l < sa.multipliers.size(); ++l) {
    CHECK(sa.multipliers[l] == da.multipliers[l]);
    CHECK(sa.diagnostics[l].lagrangian == da.diagnostics[l].lagrangian);
  }
  const DualTrajectory again = state_augmented_da(z, primal, cfg);
  CHECK(again.final_multiplier() == sa.final_multiplier());
  for (const Vector& l : sa.multipliers) {
    CHECK((l.array() * (1.0 - z.network().mask().array()) == 0.0).all());
  }
}

TEST_CASE("grid minimizer finds the best grid point") {
  const ProblemInstance z = fixture::network(2, 1.0, 3);
  const Vector lam = Vector::Constant(2, 2.0);
  const int pts = 21;
  const Vector p = grid_minimizer(lam, z, pts);
  const double pmax = z.network().p_max();
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < pts; ++i) {
    for (int j = 0; j < pts; ++j) {
      Vector c(2);
      c << pmax * i / (pts - 1), pmax * j / (pts - 1);
      best = std::min(best, lagrangian(c, lam, z));
    }
  }
  CHECK(lagrangian(p, lam, z) == doctest::Approx(best).epsilon(1e-14));
  CHECK_THROWS_AS(grid_minimizer(lam, fixture::network(30, 0.5, 1), 41), ParameterError);
}

TEST_CASE("full power policy") {
  const ProblemInstance z = fixture::network(7, 0.5, 2);
  const Vector p = full_power(z.network());
  CHECK((p.array() == z.network().p_max()).all());
  CHECK(rates(p, z.network()).allFinite());
}

TEST_CASE("naive graph network overfits a small dataset") {
  std::vector<ProblemInstance> data;
  std::vector<Vector> labels;
  for (std::uint64_t s = 0; s < 5; ++s) {
    data.push_back(fixture::qp(6, 3, 2, 300 + s));
    labels.push_back(reference_solve(data.back().qp()).x);
  }
  NaiveGnnSpec spec;
  spec.depth = 3;
  spec.features = 32;
  SupervisedConfig cfg;
  cfg.epochs = 3000;
  cfg.batch = 5;
  cfg.lr = 3e-3;
  std::vector<double> losses;
  const NaiveGnn model = naive_gnn_train(spec, data, labels, cfg, &losses);
  REQUIRE(losses.size() == 3000u);
  CHECK(supervised_loss(model, data, labels) < 0.02 * losses.front());
  CHECK(supervised_loss(model, data, labels) < 1e-3);
  CHECK(model.predict(data[0]).size() == 6);
}

TEST_CASE("naive graph network on networks predicts inside the box") {
  std::vector<ProblemInstance> data;
  std::vector<Vector> labels;
  for (std::uint64_t s = 0; s < 3; ++s) {
    data.push_back(fixture::network(5, 0.5, 400 + s));
    labels.push_back(Vector::Constant(5, 0.5 * data.back().network().p_max()));
  }
  NaiveGnnSpec spec;
  spec.family = Family::power;
  spec.depth = 2;
  spec.features = 8;
  SupervisedConfig cfg;
  cfg.epochs = 300;
  cfg.batch = 3;
  cfg.lr = 1e-2;
  const NaiveGnn model = naive_gnn_train(spec, data, labels, cfg);
  for (const ProblemInstance& z : data) {
    const Vector p = model.predict(z);
    CHECK(((p.array() >= 0.0) && (p.array() <= z.network().p_max())).all());
    CHECK((p / z.network().p_max() - Vector::Constant(5, 0.5)).cwiseAbs().maxCoeff() < 0.05);
  }
  CHECK_THROWS_AS(naive_gnn_train(spec, data, {labels[0]}, cfg), DimensionError);
}
