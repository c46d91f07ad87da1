#include "cdu/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cdu/errors.hpp"
#include "cdu/optim.hpp"

namespace cdu {

void DaConfig::validate() const {
  if (!(step > 0.0)) throw ConfigError("dual ascent step must be positive");
  if (iterations < 1) throw ConfigError("dual ascent needs at least one iteration");
  if (grid_points < 2) throw ConfigError("grid minimizer needs at least two points per coordinate");
}

Vector grid_minimizer(const Vector& lambda, const ProblemInstance& z, int grid_points) {
  if (z.family() != Family::power) throw ParameterError("grid minimizer is defined on the power box only");
  const int n = z.n_vars();
  const double total = std::pow(static_cast<double>(grid_points), n);
  if (total > 2e6) throw ParameterError("grid minimizer: " + std::to_string(n) + " users is too many");
  const double pmax = z.network().p_max();
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  Vector p(n);
  Vector best = Vector::Zero(n);
  double best_value = std::numeric_limits<double>::infinity();
  while (true) {
    for (int i = 0; i < n; ++i) p[i] = pmax * idx[static_cast<std::size_t>(i)] / (grid_points - 1);
    const double v = lagrangian(p, lambda, z);
    if (v < best_value) {
      best_value = v;
      best = p;
    }
    int d = 0;
    while (d < n && ++idx[static_cast<std::size_t>(d)] == grid_points) idx[static_cast<std::size_t>(d++)] = 0;
    if (d == n) break;
  }
  return best;
}

DualTrajectory dual_ascent(const ProblemInstance& z, const DaConfig& cfg, const PrimalNet* primal) {
  cfg.validate();
  if (cfg.inner == InnerMinimizer::primal_net && !primal) throw ConfigError("primal-network inner minimizer needs a network");
  Vector lambda;
  if (cfg.initial) {
    if (cfg.initial->size() != z.n_cons()) throw DimensionError("initial multiplier", z.n_cons(), cfg.initial->size());
    if ((cfg.initial->array() < 0.0).any()) throw ContractError("multipliers must be nonnegative");
    lambda = *cfg.initial;
  } else if (z.family() == Family::miqp) {
    lambda = Vector::Zero(z.n_cons());
  } else {
    Rng rng(mix_seed(cfg.seed, 1));
    lambda = draw_initial_multipliers(z, cfg.power_init, rng);
  }

  auto minimize = [&](const Vector& l, int iterate) -> Vector {
    try {
      switch (cfg.inner) {
        case InnerMinimizer::analytic:
          if (z.family() != Family::miqp) throw ParameterError("analytic minimizer exists for QPs only");
          return analytic_minimizer(l, z.qp());
        case InnerMinimizer::grid:
          return grid_minimizer(l, z, cfg.grid_points);
        case InnerMinimizer::primal_net:
          return primal_forward(l, z, *primal, ForwardContext::eval(cfg.seed)).final();
      }
    } catch (const OracleError& e) {
      throw OracleError("dual ascent iterate " + std::to_string(iterate) + ": " + e.what());
    }
    return {};
  };

  std::vector<Vector> lambdas;
  std::vector<Vector> xs;
  lambdas.reserve(static_cast<std::size_t>(cfg.iterations) + 1);
  xs.reserve(static_cast<std::size_t>(cfg.iterations) + 1);
  lambdas.push_back(lambda);
  xs.push_back(minimize(lambda, 0));
  for (int l = 0; l < cfg.iterations; ++l) {
    lambda = (lambda + cfg.step * constraints(xs.back(), z)).cwiseMax(0.0);
    lambdas.push_back(lambda);
    xs.push_back(minimize(lambda, l + 1));
  }
  return make_dual_trajectory(std::move(lambdas), std::move(xs), z, cfg.iterations + 1);
}

DaConfig state_augmented_defaults() {
  DaConfig cfg;
  cfg.step = 0.05;
  cfg.iterations = 600;
  cfg.inner = InnerMinimizer::primal_net;
  return cfg;
}

DualTrajectory state_augmented_da(const ProblemInstance& z, const PrimalNet& primal, const DaConfig& cfg) {
  DaConfig c = cfg;
  c.inner = InnerMinimizer::primal_net;
  return dual_ascent(z, c, &primal);
}

NaiveGnn::NaiveGnn(NaiveGnnSpec spec) : spec_(spec) {
  if (spec.depth < 1) throw ConfigError("naive network depth must be positive");
  NetSpec net;
  net.family = spec.family;
  net.layers = 1;
  net.sublayers = spec.depth;
  net.hops = spec.hops;
  net.features = spec.features;
  net.activation = Activation::relu;
  net.inputs = spec.family == Family::miqp ? 1 : 2;
  net_ = UnrolledNet(net, NoiseSchedule{0.0, 0.0});
}

ad::Var NaiveGnn::forward(Binder& binder, const ProblemInstance& z) const {
  ad::Tape& tape = *binder(0).tape();
  const ad::Var shift = tape.constant(z.gso());
  if (z.family() == Family::miqp) {
    Vector input(z.n_vars() + z.n_cons());
    input << z.qp().q(), z.qp().b();
    const ad::Var out = layer_output(binder, 0, tape.constant(input), shift);
    return rows(out, 0, z.n_vars());
  }
  Matrix input(z.n_vars(), 2);
  input.col(0) = z.network().rate_targets();
  input.col(1).setOnes();
  return sigmoid(layer_output(binder, 0, tape.constant(input), shift));
}

Vector NaiveGnn::predict(const ProblemInstance& z) const {
  if (z.family() != spec_.family) throw ConfigError("naive network applied to the wrong problem family");
  ad::Tape tape;
  Binder binder(tape, net_);
  Vector out = forward(binder, z).value();
  if (z.family() == Family::power) out *= z.network().p_max();
  return out;
}

namespace {

Vector scaled_label(const ProblemInstance& z, const Vector& label) {
  if (label.size() != z.n_vars()) throw DimensionError("label", z.n_vars(), label.size());
  return z.family() == Family::power ? Vector(label / z.network().p_max()) : label;
}

}  // namespace

double supervised_loss(const NaiveGnn& model, const std::vector<ProblemInstance>& data,
                       const std::vector<Vector>& labels) {
  if (data.size() != labels.size()) {
    throw DimensionError("labels", static_cast<long>(data.size()), static_cast<long>(labels.size()));
  }
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Vector pred = model.predict(data[i]);
    if (data[i].family() == Family::power) pred /= data[i].network().p_max();
    total += (pred - scaled_label(data[i], labels[i])).squaredNorm() / static_cast<double>(pred.size());
  }
  return total / static_cast<double>(data.size());
}

NaiveGnn naive_gnn_train(const NaiveGnnSpec& spec, const std::vector<ProblemInstance>& data,
                         const std::vector<Vector>& labels, const SupervisedConfig& cfg, std::vector<double>* losses) {
  if (data.size() != labels.size()) {
    throw DimensionError("labels", static_cast<long>(data.size()), static_cast<long>(labels.size()));
  }
  if (cfg.batch < 1 || cfg.epochs < 0 || !(cfg.lr > 0.0)) throw ConfigError("invalid supervised training settings");
  NaiveGnn model(spec);
  Rng init(mix_seed(cfg.seed, 11));
  model.net().initialize(init, 1.0);
  Rng order_rng(mix_seed(cfg.seed, 12));
  Adam adam(cfg.lr);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      std::vector<Matrix> grads = model.net().zero_like();
      for (std::size_t j = start; j < end; ++j) {
        const ProblemInstance& z = data[order[j]];
        ad::Tape tape;
        Binder binder(tape, model.net(), &grads);
        const ad::Var pred = model.forward(binder, z);
        const ad::Var err = pred - tape.constant(scaled_label(z, labels[order[j]]));
        const double scale = 1.0 / (static_cast<double>(z.n_vars()) * static_cast<double>(end - start));
        const ad::Var loss = scale * dot(err, err);
        if (!std::isfinite(loss.scalar())) throw NumericalError("non-finite supervised loss");
        epoch_loss += loss.scalar() * static_cast<double>(end - start);
        tape.backward(loss);
      }
      adam.step(model.net().params(), grads);
    }
    if (losses) losses->push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(1, data.size())));
  }
  return model;
}

}  // namespace cdu
