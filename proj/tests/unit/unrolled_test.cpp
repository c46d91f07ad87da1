#include <doctest.h>

#include "cdu/errors.hpp"
#include "cdu/unrolled.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace cdu;

namespace {

using Perm = Eigen::PermutationMatrix<Eigen::Dynamic>;

Perm random_perm(int n, unsigned seed) {
  Perm p(n);
  p.setIdentity();
  std::mt19937 rng(seed);
  std::shuffle(p.indices().data(), p.indices().data() + n, rng);
  return p;
}

struct Permuted {
  ProblemInstance z;
  Perm vars;
  Perm cons;
};

Permuted permute(const ProblemInstance& z, unsigned seed) {
  const Perm pv = random_perm(z.n_vars(), seed);
  if (z.family() == Family::miqp) {
    const Perm pc = random_perm(z.n_cons(), seed + 1);
    const RelaxedQp& qp = z.qp();
    RelaxedQp out(pv * qp.P() * pv.transpose(), pv * qp.q(), pc * qp.A() * pv.transpose(), pc * qp.b(), {}, qp.rows());
    return {ProblemInstance(std::move(out)), pv, pc};
  }
  const NetworkInstance& net = z.network();
  return {ProblemInstance(NetworkInstance(pv * net.H() * pv.transpose(), pv * net.mask(), net.radio())), pv, pv};
}

GraphBlockParams random_block(int fin, int f, int sub, int hops, unsigned seed, Activation act) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 0.5);
  GraphBlockParams p;
  p.activation = act;
  for (int l = 0; l < sub; ++l) {
    std::vector<Matrix> taps;
    for (int h = 0; h <= hops; ++h) {
      Matrix t(l == 0 ? fin : f, f);
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = g(rng);
      taps.push_back(t);
    }
    p.taps.push_back(taps);
  }
  return p;
}

}  // namespace

TEST_CASE("identity filter passes features through") {
  const Matrix X = Matrix::Random(5, 3);
  const Matrix S = Matrix::Random(5, 5);
  GraphBlockParams p;
  p.activation = Activation::identity;
  for (int l = 0; l < 3; ++l) p.taps.push_back({Matrix::Identity(3, 3), Matrix::Zero(3, 3)});
  CHECK(graph_block(X, S, p) == X);
}

TEST_CASE("zero shift reduces the block to a per-node MLP") {
  const Matrix X = Matrix::Random(6, 2);
  const GraphBlockParams p = random_block(2, 4, 2, 1, 3, Activation::tanh);
  const Matrix out = graph_block(X, Matrix::Zero(6, 6), p);
  for (int i = 0; i < 6; ++i) {
    Eigen::RowVectorXd row = X.row(i);
    for (const auto& taps : p.taps) row = (row * taps[0]).array().tanh().matrix();
    CHECK((out.row(i) - row).norm() <= 1e-14);
  }
}

TEST_CASE("graph block is permutation equivariant and checks shapes") {
  const Matrix X = Matrix::Random(7, 3);
  Matrix S = Matrix::Random(7, 7);
  S = 0.5 * (S + S.transpose());
  const GraphBlockParams p = random_block(3, 5, 3, 2, 4, Activation::leaky_relu);
  const Perm pi = random_perm(7, 5);
  const Matrix lhs = graph_block(pi * X, pi * S * pi.transpose(), p);
  const Matrix rhs = pi * graph_block(X, S, p);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK_THROWS_AS(graph_block(Matrix::Random(6, 3), S, p), DimensionError);
  CHECK_THROWS_AS(graph_block(Matrix::Random(7, 2), S, p), DimensionError);
}

TEST_CASE("taped and plain graph blocks agree") {
  const Matrix X = Matrix::Random(5, 2);
  const Matrix S = Matrix::Random(5, 5);
  const GraphBlockParams p = random_block(2, 3, 2, 1, 6, Activation::tanh);
  ad::Tape tape;
  std::vector<std::vector<ad::Var>> taps;
  for (const auto& l : p.taps) {
    taps.emplace_back();
    for (const Matrix& t : l) taps.back().push_back(tape.constant(t));
  }
  const ad::Var out = graph_block(tape.constant(X), tape.constant(S), taps, p.activation, p.leaky_slope);
  CHECK((out.value() - graph_block(X, S, p)).norm() <= 1e-14);
}

TEST_CASE("parameter layout and names") {
  const NetSpec spec = fixture::tiny_spec(Family::miqp, 3, 8, 2, 1);
  const PrimalNet net(spec, NoiseSchedule{});
  CHECK(net.params().size() == 3u * (2 * 2 + 2));
  CHECK(net.params()[net.tap_index(0, 0, 0)].rows() == 2);
  CHECK(net.params()[net.tap_index(1, 1, 1)].rows() == 8);
  CHECK(net.params()[net.head_weight_index(2)].rows() == 8);
  CHECK(net.param_name(net.tap_index(1, 1, 0)) == "layer1/sub1/tap0");
  CHECK(net.param_name(net.head_bias_index(2)) == "layer2/head/c");
  CHECK(NoiseSchedule{0.05, 0.7}.at(2) == doctest::Approx(0.05 * 0.49));
  NetSpec bad = spec;
  bad.layers = 0;
  CHECK_THROWS_AS(PrimalNet(bad, NoiseSchedule{}), ConfigError);
}

TEST_CASE("zero heads make the MIQP primal network an identity map") {
  PrimalNet net = fixture::primal(Family::miqp, 3, 1);
  net.zero_heads();
  const ProblemInstance z = fixture::qp(6, 3, 2, 1);
  const PrimalTrajectory t = primal_forward(Vector::Ones(z.n_cons()), z, net, ForwardContext::eval(9));
  CHECK(t.layers() == 3);
  CHECK(t.final() == t.iterates.front());
}

TEST_CASE("power primal iterates stay in the box") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const PrimalNet net = fixture::primal(Family::power, 4, seed);
    const ProblemInstance z = fixture::network(8, 0.5, seed);
    Rng rng(seed);
    const PrimalTrajectory t = primal_forward(Vector::Constant(8, 3.0), z, net, ForwardContext::train(rng));
    for (const Vector& p : t.iterates) {
      CHECK((p.array() >= 0.0).all());
      CHECK((p.array() <= z.network().p_max()).all());
    }
  }
}

TEST_CASE("zero dual heads keep the initial multiplier") {
  DualNet dual = fixture::dual(Family::miqp, 3, 2);
  dual.zero_heads();
  const PrimalNet primal = fixture::primal(Family::miqp, 2, 3);
  const ProblemInstance z = fixture::qp(6, 3, 2, 2);
  const DualTrajectory t = dual_forward(z, dual, primal, ForwardContext::eval(4));
  CHECK(t.final_multiplier() == t.multipliers.front());
  CHECK(t.primal_queries == 3);
  CHECK(t.layers() == 3);
}

TEST_CASE("dual multipliers are nonnegative and masked at every layer") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Family fam = seed % 2 == 0 ? Family::miqp : Family::power;
    const DualNet dual = fixture::dual(fam, 4, seed, 6);
    const PrimalNet primal = fixture::primal(fam, 2, seed + 10, 6);
    const ProblemInstance z = fam == Family::miqp ? fixture::qp(7, 4, 2, seed) : fixture::network(9, 0.5, seed);
    Rng rng(seed);
    for (int mode = 0; mode < 2; ++mode) {
      const ForwardContext ctx = mode == 0 ? ForwardContext::train(rng) : ForwardContext::eval(seed);
      const DualTrajectory t = dual_forward(z, dual, primal, ctx);
      for (const Vector& l : t.multipliers) {
        CHECK((l.array() >= 0.0).all());
        if (fam == Family::power) CHECK((l.array() * (1.0 - z.network().mask().array()) == 0.0).all());
      }
      if (fam == Family::power) {
        for (const Vector& p : t.primals) CHECK(((p.array() >= 0.0) && (p.array() <= z.network().p_max())).all());
      }
    }
  }
}

TEST_CASE("recovered solution equals a primal pass at the final multiplier") {
  for (int f = 0; f < 2; ++f) {
    const Family fam = f == 0 ? Family::miqp : Family::power;
    const DualNet dual = fixture::dual(fam, 3, 5);
    const PrimalNet primal = fixture::primal(fam, 3, 6);
    const ProblemInstance z = fam == Family::miqp ? fixture::qp(6, 3, 2, 7) : fixture::network(6, 0.5, 7);
    const DualTrajectory t = dual_forward(z, dual, primal, ForwardContext::eval(12));
    const Vector rec = recover_solution(z, dual, primal, 12);
    const Vector again = primal_forward(t.final_multiplier(), z, primal, ForwardContext::eval(12)).final();
    CHECK(rec == again);
    CHECK(rec == t.solution());
  }
}

TEST_CASE("eval mode is bit-for-bit deterministic and noise-free") {
  const DualNet dual = fixture::dual(Family::power, 3, 8);
  const PrimalNet primal = fixture::primal(Family::power, 3, 9);
  const ProblemInstance z = fixture::network(7, 0.5, 8);
  const DualTrajectory a = dual_forward(z, dual, primal, ForwardContext::eval(77));
  const DualTrajectory b = dual_forward(z, dual, primal, ForwardContext::eval(77));
  for (std::size_t l = 0; l < a.multipliers.size(); ++l) {
    CHECK(a.multipliers[l] == b.multipliers[l]);
    CHECK(a.primals[l] == b.primals[l]);
  }
  Rng r1(1);
  Rng r2(1);
  ForwardContext c1 = ForwardContext::train(r1);
  ForwardContext c2 = ForwardContext::explore(r2);
  const Vector lam = a.final_multiplier();
  const PrimalTrajectory noisy = primal_forward(lam, z, primal, c1);
  const PrimalTrajectory clean = primal_forward(lam, z, primal, c2);
  CHECK(noisy.iterates.front() == clean.iterates.front());
  CHECK(noisy.final() != clean.final());
}

TEST_CASE("both networks are permutation equivariant") {
  for (int f = 0; f < 2; ++f) {
    const Family fam = f == 0 ? Family::miqp : Family::power;
    const DualNet dual = fixture::dual(fam, 3, 20, 5, 2);
    const PrimalNet primal = fixture::primal(fam, 3, 21, 5, 2);
    const ProblemInstance z = fam == Family::miqp ? fixture::qp(6, 3, 2, 30) : fixture::network(7, 0.5, 30);
    const Permuted pz = permute(z, 31);

    Rng rng(3);
    const Vector x0 = draw_initial_primal(z, rng);
    const Vector l0 = draw_initial_multipliers(z, fixture::default_init(fam), rng);
    ForwardContext ctx = ForwardContext::eval(0);
    ctx.initial_primal = x0;
    ctx.initial_multiplier = l0;
    ForwardContext pctx = ForwardContext::eval(0);
    pctx.initial_primal = pz.vars * x0;
    pctx.initial_multiplier = pz.cons * l0;

    const PrimalTrajectory a = primal_forward(l0, z, primal, ctx);
    const PrimalTrajectory b = primal_forward(pz.cons * l0, pz.z, primal, pctx);
    CHECK((b.final() - pz.vars * a.final()).cwiseAbs().maxCoeff() <= 1e-6 * (fam == Family::power ? 1e-3 : 1.0));

    const DualTrajectory da = dual_forward(z, dual, primal, ctx);
    const DualTrajectory db = dual_forward(pz.z, dual, primal, pctx);
    CHECK((db.final_multiplier() - pz.cons * da.final_multiplier()).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((db.solution() - pz.vars * da.solution()).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("final Lagrangian is differentiable in the parameters") {
  for (int f = 0; f < 2; ++f) {
    const Family fam = f == 0 ? Family::miqp : Family::power;
    PrimalNet primal = fixture::primal(fam, 2, 40);
    const DualNet dual = fixture::dual(fam, 2, 41);
    const ProblemInstance z = fam == Family::miqp ? fixture::qp(4, 2, 1, 42) : fixture::network(4, 0.5, 42);
    auto value = [&](const PrimalNet& p, std::vector<Matrix>* grads) {
      ad::Tape tape;
      Binder db(tape, dual);
      Binder pb(tape, p, grads);
      const TapedInstance zi(tape, z);
      const TapedDualPass pass = dual_forward(tape, db, pb, zi, ForwardContext::eval(5));
      const ad::Var l = taped::lagrangian(pass.primals.back(), pass.multipliers.back(), z);
      if (grads) tape.backward(l);
      return l.scalar();
    };
    std::vector<Matrix> grads = primal.zero_like();
    value(primal, &grads);
    std::mt19937 rng(7);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Matrix> dir = primal.zero_like();
    double analytic = 0.0;
    for (std::size_t i = 0; i < dir.size(); ++i) {
      for (Eigen::Index j = 0; j < dir[i].size(); ++j) dir[i].data()[j] = g(rng);
      analytic += dir[i].cwiseProduct(grads[i]).sum();
    }
    const double h = 1e-6;
    PrimalNet plus = primal;
    PrimalNet minus = primal;
    for (std::size_t i = 0; i < dir.size(); ++i) {
      plus.params()[i] += h * dir[i];
      minus.params()[i] -= h * dir[i];
    }
    const double fd = (value(plus, nullptr) - value(minus, nullptr)) / (2 * h);
    CHECK(std::abs(fd - analytic) <= 1e-4 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("mismatched family is rejected") {
  const PrimalNet net = fixture::primal(Family::power, 2, 1);
  const ProblemInstance z = fixture::qp(4, 2, 1, 1);
  CHECK_THROWS_AS(primal_forward(Vector::Zero(z.n_cons()), z, net, ForwardContext::eval(0)), ConfigError);
  CHECK_THROWS_AS(primal_forward(Vector::Zero(3), z, fixture::primal(Family::miqp, 2, 1), ForwardContext::eval(0)),
                  DimensionError);
}
