// Acceptance suite: one PASS/FAIL line per criterion.
//
// usage: cdu_acceptance [--out DIR] [--only N]...
// Trained desk models are cached under DIR and reused on later runs.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cdu/errors.hpp"
#include "cdu/pipeline.hpp"
#include "fixtures.hpp"

using namespace cdu;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<RelaxedQp> oracle_qps() {
  std::vector<RelaxedQp> out;
  for (std::uint64_t s = 0; s < 50; ++s) out.push_back(relax(generate_instance(20, 10, 4, 1000 + s)));
  return out;
}

/// KKT residual recomputed from the problem data.
double kkt_residual(const RelaxedQp& qp, const Vector& x, const Vector& lambda) {
  const Vector slack = qp.A() * x - qp.b();
  const double stat = (qp.P() * x + qp.q() + qp.A().transpose() * lambda).lpNorm<Eigen::Infinity>();
  const double primal = slack.cwiseMax(0.0).maxCoeff();
  const double dual = (-lambda).cwiseMax(0.0).maxCoeff();
  const double comp = lambda.cwiseProduct(slack).cwiseAbs().maxCoeff();
  return std::max({stat, primal, dual, comp});
}

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (const RelaxedQp& qp : oracle_qps()) {
    const QpSolution s = reference_solve(qp);
    worst = std::max(worst, kkt_residual(qp, s.x, s.lambda));
  }
  // min 1/2 x^2 - 2x s.t. x <= 1: x = 1, lambda = 1; with x <= 3 the bound is slack: x = 2, lambda = 0.
  double hand = 0.0;
  const Matrix P = Matrix::Constant(1, 1, 1.0);
  const Vector q = Vector::Constant(1, -2.0);
  const Matrix A = Matrix::Constant(1, 1, 1.0);
  for (auto [b, xs, ls] : {std::tuple{1.0, 1.0, 1.0}, std::tuple{3.0, 2.0, 0.0}, std::tuple{-1.0, -1.0, 3.0}}) {
    const QpSolution s = reference_solve(RelaxedQp(P, q, A, Vector::Constant(1, b), {}, 1));
    hand = std::max({hand, std::abs(s.x[0] - xs), std::abs(s.lambda[0] - ls)});
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-6 && hand <= 1e-10 && t < 60.0,
          fmt("max KKT residual %.2e (<= 1e-6), scalar cases error %.1e (<= 1e-10), %.1f s", worst, hand, t)};
}

Outcome criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  int worst_hit = 0;
  int misses = 0;
  for (const RelaxedQp& qp : oracle_qps()) {
    const ProblemInstance z(qp);
    const double pstar = reference_solve(qp).value;
    DaConfig cfg;
    cfg.step = 0.01;
    cfg.iterations = 10000;
    cfg.inner = InnerMinimizer::analytic;
    const DualTrajectory traj = dual_ascent(z, cfg);
    int hit = -1;
    for (std::size_t l = 0; l < traj.multipliers.size(); ++l) {
      const double gap = std::abs(lagrangian(traj.primals[l], traj.multipliers[l], z) - pstar) / (1.0 + std::abs(pstar));
      if (gap <= 1e-3) {
        hit = static_cast<int>(l);
        break;
      }
    }
    if (hit < 0) ++misses;
    worst_hit = std::max(worst_hit, hit);
  }
  const double t = seconds_since(t0);
  return {misses == 0 && t < 120.0,
          fmt("%d/50 instances reach relative gap 1e-3, slowest at iteration %d (<= 10000), %.1f s", 50 - misses,
              worst_hit, t)};
}

Outcome criterion3() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> dn(2, 40);
  std::exponential_distribution<double> lam(1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int n = dn(rng);
    const int m = std::max(1, n / 2);
    const int r = n / 5;
    const RelaxedQp qp = relax(generate_instance(n, m, r, 5000 + i));
    Vector l(qp.rows());
    for (Eigen::Index j = 0; j < l.size(); ++j) l[j] = lam(rng);
    const Vector x = analytic_minimizer(l, qp);
    const double res = (qp.P() * x + qp.q() + qp.A().transpose() * l).norm() / (1.0 + qp.q().norm());
    worst = std::max(worst, res);
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-8 && t < 10.0, fmt("max scaled stationarity %.2e (<= 1e-8) over 1000 pairs, %.2f s", worst, t)};
}

std::vector<Matrix> random_direction(const UnrolledNet& net, std::mt19937& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Matrix> dir = net.zero_like();
  for (Matrix& d : dir) {
    for (Eigen::Index j = 0; j < d.size(); ++j) d.data()[j] = g(rng);
  }
  return dir;
}

double inner(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].cwiseProduct(b[i]).sum();
  return s;
}

template <class Net>
Net shifted(const Net& net, const std::vector<Matrix>& dir, double h) {
  Net out = net;
  for (std::size_t i = 0; i < dir.size(); ++i) out.params()[i] += h * dir[i];
  return out;
}

Outcome criterion4() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  int checks = 0;
  std::mt19937 drng(11);
  for (Family fam : {Family::miqp, Family::power}) {
    for (DescentMetric metric : {DescentMetric::value, DescentMetric::gradient}) {
      TrainConfig cfg = fixture::tiny_config(fam, 2, 4);
      cfg.metric = metric;
      const PrimalNet primal = fixture::primal(fam, 2, 60);
      const DualNet dual = fixture::dual(fam, 2, 61);
      const ProblemInstance z1 = fam == Family::miqp ? fixture::qp(4, 2, 1, 62) : fixture::network(4, 0.5, 62);
      const ProblemInstance z2 = fam == Family::miqp ? fixture::qp(4, 2, 1, 63) : fixture::network(4, 0.5, 63);
      Vector mu(2);
      mu << 0.4, 0.9;
      Rng init(3);
      const std::vector<PrimalSample> batch{{&z1, draw_initial_multipliers(z1, fixture::default_init(fam), init)},
                                            {&z2, draw_initial_multipliers(z2, fixture::default_init(fam), init)}};
      const std::vector<const ProblemInstance*> dbatch{&z1, &z2};
      const Rng base(5);
      auto pv = [&](const PrimalNet& p, std::vector<Matrix>* g) {
        Rng r = base;
        return meta_lagrangian_primal(batch, p, mu, cfg, ForwardContext::train(r), g).value;
      };
      auto dv = [&](const DualNet& d, std::vector<Matrix>* g) {
        Rng r = base;
        return meta_lagrangian_dual(dbatch, d, primal, mu, cfg, ForwardContext::train(r), g).value;
      };
      std::vector<Matrix> pg = primal.zero_like();
      pv(primal, &pg);
      std::vector<Matrix> dg = dual.zero_like();
      dv(dual, &dg);
      const double h = 1e-6;
      for (int k = 0; k < 5; ++k) {
        const auto dir = random_direction(primal, drng);
        const double fd = (pv(shifted(primal, dir, h), nullptr) - pv(shifted(primal, dir, -h), nullptr)) / (2 * h);
        worst = std::max(worst, std::abs(fd - inner(pg, dir)) / std::max(1.0, std::abs(fd)));
        const auto ddir = random_direction(dual, drng);
        const double dfd = (dv(shifted(dual, ddir, h), nullptr) - dv(shifted(dual, ddir, -h), nullptr)) / (2 * h);
        worst = std::max(worst, std::abs(dfd - inner(dg, ddir)) / std::max(1.0, std::abs(dfd)));
        checks += 2;
      }
    }
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-4 && t < 60.0,
          fmt("max relative error %.2e (<= 1e-4) over %d directional checks, %.1f s", worst, checks, t)};
}

double manifest_minutes(const fs::path& dir) {
  const RunManifest m = load_manifest((dir / "manifest.json").string());
  auto parse = [](const std::string& s) {
    std::tm tm{};
    strptime(s.c_str(), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return timegm(&tm);
  };
  return static_cast<double>(parse(m.finished) - parse(m.started)) / 60.0;
}

struct DeskRuns {
  std::vector<SeedOutcome> outcomes;
  double max_train_minutes = 0.0;
  std::string error;
};

DeskRuns desk(Family family, const fs::path& out) {
  DeskRuns runs;
  ReproduceOptions opts;
  opts.family = family;
  opts.out = out;
  opts.naive = false;
  opts.sweep = false;
  try {
    runs.outcomes = reproduce(opts, [](const std::string& msg) { std::cerr << msg << '\n'; });
    for (std::uint64_t seed : opts.seeds) {
      const fs::path root = out / std::string(to_string(family)) / ("seed" + std::to_string(seed));
      for (const char* run : {"constrained", "unconstrained"}) {
        runs.max_train_minutes = std::max(runs.max_train_minutes, manifest_minutes(root / run));
      }
    }
  } catch (const std::exception& e) {
    runs.error = e.what();
  }
  return runs;
}

double mean_of(const std::vector<SeedOutcome>& o, Method m, double EvalAggregate::*field) {
  double s = 0.0;
  for (const SeedOutcome& x : o) s += x.test.at(m).*field;
  return s / static_cast<double>(o.size());
}

Outcome criterion5(const DeskRuns& r) {
  if (!r.error.empty()) return {false, "desk pipeline failed: " + r.error};
  const double vc = mean_of(r.outcomes, Method::cdu, &EvalAggregate::violation_mean);
  const double vu = mean_of(r.outcomes, Method::unconstrained, &EvalAggregate::violation_mean);
  const double ec = mean_of(r.outcomes, Method::cdu, &EvalAggregate::mse_x);
  const double eu = mean_of(r.outcomes, Method::unconstrained, &EvalAggregate::mse_x);
  return {vc < vu && ec < eu && r.max_train_minutes <= 30.0,
          fmt("violation %.4f vs %.4f, MSE %.4f vs %.4f (constrained vs unconstrained, %zu seeds), slowest run %.1f min",
              vc, vu, ec, eu, r.outcomes.size(), r.max_train_minutes)};
}

Outcome criterion6(const DeskRuns& r) {
  if (!r.error.empty()) return {false, "desk pipeline failed: " + r.error};
  double desc = 0.0, asc = 0.0, slack = 0.0;
  std::string per;
  for (const SeedOutcome& o : r.outcomes) {
    desc += o.validation.descent_residual;
    asc += o.validation.ascent_residual;
    slack += o.validation.slackness_decrease_fraction;
    per += fmt(" [seed %llu: %.4f %.4f %.2f]", static_cast<unsigned long long>(o.seed), o.validation.descent_residual,
               o.validation.ascent_residual, o.validation.slackness_decrease_fraction);
  }
  const double n = static_cast<double>(r.outcomes.size());
  desc /= n;
  asc /= n;
  slack /= n;
  return {desc <= 0.05 && asc <= 0.05 && slack >= 0.8,
          fmt("descent residual %.4f (<= 0.05), ascent residual %.4f (<= 0.05), slackness decreasing on %.0f%% (>= 80%%);",
              desc, asc, 100.0 * slack) +
              per};
}

Outcome criterion7(const DeskRuns& r) {
  if (!r.error.empty()) return {false, "desk pipeline failed: " + r.error};
  const double vc = mean_of(r.outcomes, Method::cdu, &EvalAggregate::violation_mean);
  const double vu = mean_of(r.outcomes, Method::unconstrained, &EvalAggregate::violation_mean);
  const double vf = mean_of(r.outcomes, Method::fullpower, &EvalAggregate::violation_mean);
  const double rc = mean_of(r.outcomes, Method::cdu, &EvalAggregate::sum_rate);
  const double rs = mean_of(r.outcomes, Method::sa, &EvalAggregate::sum_rate);
  return {vc < vu && vc < vf && rc >= 0.9 * rs && r.max_train_minutes <= 45.0,
          fmt("violation %.4f vs unconstrained %.4f and full power %.4f; sum rate %.3f = %.1f%% of state-augmented "
              "%.3f (>= 90%%), slowest run %.1f min",
              vc, vu, vf, rc, 100.0 * rc / rs, rs, r.max_train_minutes)};
}

Outcome criterion8() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::string> failures;
  auto require = [&](bool ok, const std::string& what) {
    if (!ok && std::find(failures.begin(), failures.end(), what) == failures.end()) failures.push_back(what);
  };
  int cases = 0;
  for (int trial = 0; trial < 20; ++trial) {
    for (Family fam : {Family::miqp, Family::power}) {
      const std::uint64_t s = 100 + static_cast<std::uint64_t>(trial);
      const PrimalNet primal = fixture::primal(fam, 3, s, 5, 2);
      const DualNet dual = fixture::dual(fam, 3, s + 1, 5, 2);
      const ProblemInstance z = fam == Family::miqp ? fixture::qp(5 + trial % 6, 3, 2, s) : fixture::network(4 + trial % 6, 0.5, s);
      const DualTrajectory t = dual_forward(z, dual, primal, ForwardContext::eval(s));
      for (std::size_t l = 0; l < t.multipliers.size(); ++l) {
        require(t.multipliers[l].minCoeff() >= 0.0, "dual nonnegativity");
        if (fam == Family::power) {
          const Vector& mask = z.network().mask();
          require((t.multipliers[l].array() * (1.0 - mask.array())).abs().maxCoeff() == 0.0, "multiplier masking");
          const double pmax = z.network().radio().p_max_w;
          require(t.primals[l].minCoeff() >= 0.0 && t.primals[l].maxCoeff() <= pmax, "power box");
          Rng rng(s);
          for (int k = 0; k < 3; ++k) {
            const PrimalTrajectory pt = primal_forward(t.multipliers[l], z, primal, ForwardContext::eval(s + k));
            for (const Vector& x : pt.iterates) require(x.minCoeff() >= 0.0 && x.maxCoeff() <= pmax, "power box");
          }
        }
      }
      const DualTrajectory again = dual_forward(z, dual, primal, ForwardContext::eval(s));
      bool same = again.multipliers.size() == t.multipliers.size();
      for (std::size_t l = 0; same && l < t.multipliers.size(); ++l) {
        same = again.multipliers[l] == t.multipliers[l] && again.primals[l] == t.primals[l];
      }
      require(same, "eval determinism");

      // Permutation equivariance with matched initial draws.
      std::mt19937 prng(static_cast<unsigned>(s));
      std::vector<int> iv(static_cast<std::size_t>(z.n_vars())), ic(static_cast<std::size_t>(z.n_cons()));
      std::iota(iv.begin(), iv.end(), 0);
      std::iota(ic.begin(), ic.end(), 0);
      std::shuffle(iv.begin(), iv.end(), prng);
      std::shuffle(ic.begin(), ic.end(), prng);
      Eigen::PermutationMatrix<Eigen::Dynamic> pv(Eigen::Map<Eigen::VectorXi>(iv.data(), z.n_vars()));
      Eigen::PermutationMatrix<Eigen::Dynamic> pc(Eigen::Map<Eigen::VectorXi>(ic.data(), z.n_cons()));
      std::optional<ProblemInstance> pz;
      if (fam == Family::miqp) {
        const RelaxedQp& qp = z.qp();
        pz.emplace(RelaxedQp(pv * qp.P() * pv.transpose(), pv * qp.q(), pc * qp.A() * pv.transpose(), pc * qp.b(), {},
                             qp.rows()));
      } else {
        pc = pv;
        const NetworkInstance& net = z.network();
        pz.emplace(NetworkInstance(pv * net.H() * pv.transpose(), pv * net.mask(), net.radio()));
      }
      Rng rng(s);
      const Vector x0 = draw_initial_primal(z, rng);
      const Vector l0 = draw_initial_multipliers(z, fixture::default_init(fam), rng);
      ForwardContext a = ForwardContext::eval(0), b = ForwardContext::eval(0);
      a.initial_primal = x0;
      a.initial_multiplier = l0;
      b.initial_primal = pv * x0;
      b.initial_multiplier = pc * l0;
      const DualTrajectory ta = dual_forward(z, dual, primal, a);
      const DualTrajectory tb = dual_forward(*pz, dual, primal, b);
      const double scale = fam == Family::power ? z.network().radio().p_max_w : 1.0;
      require((tb.final_multiplier() - pc * ta.final_multiplier()).cwiseAbs().maxCoeff() <= 1e-6,
              "permutation equivariance");
      require((tb.solution() - pv * ta.solution()).cwiseAbs().maxCoeff() <= 1e-6 * scale, "permutation equivariance");
      ++cases;
    }
  }
  for (const char* name : {"miqp-tiny", "power-tiny", "miqp-desk-constrained", "power-constrained"}) {
    const RunConfig c = preset(name);
    require(config_from_json_text(to_json_text(c)) == c, "config round trip");
    const std::string d1 = encode_dataset(generate_split(c, "test", 3));
    const std::string d2 = encode_dataset(generate_split(c, "test", 3));
    require(d1 == d2 && encode_dataset(decode_dataset(d1)) == d1, "dataset byte reproducibility");
  }
  const double t = seconds_since(t0);
  std::string detail = fmt("%d random instances, 4 configs, %.1f s", cases, t);
  for (const std::string& f : failures) detail += "; violated: " + f;
  return {failures.empty() && t < 300.0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::string out = "acceptance-runs";
  std::vector<int> only;
  app.add_option("--out", out, "directory for the cached desk-scale runs");
  app.add_option("--only", only, "criteria to run")->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected(only.begin(), only.end());
  auto want = [&](int n) { return selected.empty() || selected.count(n) > 0; };

  std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria;
  criteria[1] = {"oracle correctness", criterion1};
  criteria[2] = {"dual ascent convergence", criterion2};
  criteria[3] = {"analytic minimizer stationarity", criterion3};
  criteria[4] = {"gradient fidelity", criterion4};
  std::optional<DeskRuns> miqp, power;
  auto miqp_runs = [&]() -> const DeskRuns& {
    if (!miqp) miqp = desk(Family::miqp, out);
    return *miqp;
  };
  auto power_runs = [&]() -> const DeskRuns& {
    if (!power) power = desk(Family::power, out);
    return *power;
  };
  criteria[5] = {"desk QP constrained vs unconstrained ordering", [&] { return criterion5(miqp_runs()); }};
  criteria[6] = {"desk QP descent and ascent satisfaction", [&] { return criterion6(miqp_runs()); }};
  criteria[7] = {"desk network ordering", [&] { return criterion7(power_runs()); }};
  criteria[8] = {"structural invariants", criterion8};

  int failed = 0;
  for (auto& [n, c] : criteria) {
    if (!want(n)) continue;
    Outcome o;
    try {
      o = c.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << "criterion " << n << " " << (o.pass ? "PASS" : "FAIL") << ": " << c.first << ": " << o.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
