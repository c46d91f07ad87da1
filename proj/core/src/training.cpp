#include "cdu/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cdu/baselines.hpp"
#include "cdu/errors.hpp"

namespace cdu {

std::string_view to_string(DescentMetric metric) { return metric == DescentMetric::value ? "value" : "gradient"; }

DescentMetric descent_metric_from_string(std::string_view name) {
  if (name == "value") return DescentMetric::value;
  if (name == "gradient") return DescentMetric::gradient;
  throw ConfigError("unknown descent metric '" + std::string(name) + "'");
}

void MultiplierSampler::validate() const {
  const std::array<double, 4> w{dual_weight, uniform_sparse_weight, da_weight, uniform_box_weight};
  double total = 0.0;
  for (double v : w) {
    if (!(v >= 0.0)) throw ConfigError("sampler weights must be nonnegative");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("sampler weights must sum to 1");
  if (!(sparse_upper > 0.0) || !(box_upper > 0.0)) throw ConfigError("sampler ranges must be positive");
  if (keep_probability < 0.0 || keep_probability > 1.0) throw ConfigError("keep probability must lie in [0, 1]");
  if (da_weight > 0.0 && (!(da_step > 0.0) || da_iterations < 1)) throw ConfigError("invalid sampler dual-ascent settings");
}

std::array<int, 4> MultiplierSampler::split(int M) const {
  const std::array<double, 4> w{dual_weight, uniform_sparse_weight, da_weight, uniform_box_weight};
  std::array<int, 4> counts{};
  std::array<double, 4> rem{};
  int assigned = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double exact = w[i] * M;
    counts[i] = static_cast<int>(std::floor(exact + 1e-12));
    rem[i] = exact - counts[i];
    assigned += counts[i];
  }
  while (assigned < M) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 4; ++i) {
      if (rem[i] > rem[best]) best = i;
    }
    ++counts[best];
    rem[best] = -1.0;
    ++assigned;
  }
  return counts;
}

void TrainConfig::validate() const {
  primal_net.validate();
  dual_net.validate();
  if (primal_net.family != family || dual_net.family != family) throw ConfigError("network family differs from the run family");
  sampler.validate();
  if (!(primal_lr >= 0.0) || !(dual_lr >= 0.0)) throw ConfigError("learning rates must be nonnegative");
  if (primal_meta_lr < 0.0 || dual_meta_lr < 0.0) throw ConfigError("meta step sizes must be nonnegative");
  if (!(alpha > 0.0) || !(beta > 0.0)) throw ConfigError("descent and ascent rates must be positive");
  if (primal_batch < 1 || dual_batch < 1) throw ConfigError("batch sizes must be positive");
  if (multipliers_per_problem < 1) throw ConfigError("need at least one multiplier per problem");
  if (dual_epochs_per_iteration < 0) throw ConfigError("dual epochs per iteration must be nonnegative");
  if (iterations < 0) throw ConfigError("iteration count must be nonnegative");
  if (!(gate_factor >= 1.0)) throw ConfigError("gate factor must be at least 1");
  if (grad_clip < 0.0) throw ConfigError("gradient clip must be nonnegative");
  if (dual_init.upper < 0.0 || dual_init.keep_probability < 0.0 || dual_init.keep_probability > 1.0) {
    throw ConfigError("invalid initial multiplier distribution");
  }
}

Vector descent_residual(const PrimalTrajectory& traj, DescentMetric metric, double alpha) {
  const int K = traj.layers();
  Vector r(K);
  auto measure = [&](int k) {
    const LayerDiagnostics& d = traj.diagnostics[static_cast<std::size_t>(k)];
    return metric == DescentMetric::value ? d.lagrangian : d.grad_norm;
  };
  for (int k = 1; k <= K; ++k) r[k - 1] = measure(k) - alpha * measure(k - 1);
  return r;
}

Vector ascent_residual(const DualTrajectory& traj, double beta) {
  const int L = traj.layers();
  Vector r(L);
  for (int l = 1; l <= L; ++l) {
    r[l - 1] = traj.diagnostics[static_cast<std::size_t>(l)].constraint_norm -
               beta * traj.diagnostics[static_cast<std::size_t>(l - 1)].constraint_norm;
  }
  return r;
}

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericalError(std::string("non-finite ") + what);
}

void require_finite(const std::vector<Matrix>& grads, const char* what) {
  for (const Matrix& g : grads) {
    if (!g.allFinite()) throw NumericalError(std::string("non-finite gradient in ") + what);
  }
}

}  // namespace

MetaValue meta_lagrangian_primal(std::span<const PrimalSample> batch, const PrimalNet& primal, const Vector& mu,
                                 const TrainConfig& cfg, const ForwardContext& ctx, std::vector<Matrix>* grads) {
  const int K = primal.layers();
  if (mu.size() != K) throw DimensionError("descent multipliers", K, mu.size());
  MetaValue out;
  out.residuals = Vector::Zero(K);
  if (batch.empty()) return out;
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const PrimalSample& s : batch) {
    const ProblemInstance& z = *s.z;
    if (s.lambda.size() != z.n_cons()) throw DimensionError("lambda", z.n_cons(), s.lambda.size());
    ad::Tape tape;
    Binder binder(tape, primal, grads);
    const TapedInstance zi(tape, z);
    const ad::Var lambda = tape.constant(s.lambda);
    const std::vector<ad::Var> xs = primal_forward(tape, binder, lambda, zi, ctx);
    std::vector<ad::Var> m;
    m.reserve(xs.size());
    for (const ad::Var& x : xs) {
      m.push_back(cfg.metric == DescentMetric::value ? taped::lagrangian(x, lambda, z)
                                                     : norm(taped::lagrangian_gradient(x, lambda, z)));
    }
    ad::Var loss = cfg.metric == DescentMetric::value ? m.back() : taped::lagrangian(xs.back(), lambda, z);
    out.objective += w * loss.scalar();
    for (int k = 1; k <= K; ++k) {
      const ad::Var r = m[static_cast<std::size_t>(k)] - cfg.alpha * m[static_cast<std::size_t>(k - 1)];
      out.residuals[k - 1] += w * r.scalar();
      if (mu[k - 1] != 0.0) loss = loss + mu[k - 1] * r;
    }
    loss = w * loss;
    out.value += loss.scalar();
    if (grads) tape.backward(loss);
  }
  require_finite(out.value, "primal meta-Lagrangian");
  return out;
}

MetaValue meta_lagrangian_dual(std::span<const ProblemInstance* const> batch, const DualNet& dual,
                               const PrimalNet& primal, const Vector& nu, const TrainConfig& cfg,
                               const ForwardContext& ctx, std::vector<Matrix>* grads) {
  const int L = dual.layers();
  if (nu.size() != L) throw DimensionError("ascent multipliers", L, nu.size());
  MetaValue out;
  out.residuals = Vector::Zero(L);
  if (batch.empty()) return out;
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const ProblemInstance* zp : batch) {
    const ProblemInstance& z = *zp;
    ad::Tape tape;
    Binder dbind(tape, dual, grads);
    Binder pbind(tape, primal);
    const TapedInstance zi(tape, z);
    const TapedDualPass pass = dual_forward(tape, dbind, pbind, zi, ctx);
    std::vector<ad::Var> fn;
    fn.reserve(pass.primals.size());
    for (const ad::Var& x : pass.primals) fn.push_back(norm(taped::constraints(x, z)));
    ad::Var loss = -1.0 * taped::lagrangian(pass.primals.back(), pass.multipliers.back(), z);
    out.objective += w * loss.scalar();
    for (int l = 1; l <= L; ++l) {
      const ad::Var r = fn[static_cast<std::size_t>(l)] - cfg.beta * fn[static_cast<std::size_t>(l - 1)];
      out.residuals[l - 1] += w * r.scalar();
      if (nu[l - 1] != 0.0) loss = loss + nu[l - 1] * r;
    }
    loss = w * loss;
    out.value += loss.scalar();
    if (grads) tape.backward(loss);
  }
  require_finite(out.value, "dual meta-Lagrangian");
  return out;
}

std::vector<Vector> sample_multipliers(const DualNet& dual, const PrimalNet& primal, const MultiplierSampler& sampler,
                                       const ProblemInstance& z, int M, Rng& rng) {
  if (M < 0) throw ConfigError("multiplier count must be nonnegative");
  const std::array<int, 4> counts = sampler.split(M);
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(M));

  auto pick = [&](const std::vector<Vector>& pool, int count) {
    std::uniform_int_distribution<std::size_t> idx(0, pool.size() - 1);
    for (int i = 0; i < count; ++i) out.push_back(pool[idx(rng)]);
  };

  if (counts[0] > 0) {
    ad::Tape tape;
    Binder dbind(tape, dual);
    Binder pbind(tape, primal);
    const TapedInstance zi(tape, z);
    const TapedDualPass pass = dual_forward(tape, dbind, pbind, zi, ForwardContext::explore(rng));
    std::vector<Vector> pool;
    for (const ad::Var& l : pass.multipliers) pool.emplace_back(l.value());
    pick(pool, counts[0]);
  }
  if (counts[1] > 0) {
    const MultiplierInit init{sampler.sparse_upper, sampler.keep_probability};
    for (int i = 0; i < counts[1]; ++i) out.push_back(draw_initial_multipliers(z, init, rng));
  }
  if (counts[2] > 0) {
    DaConfig da;
    da.step = sampler.da_step;
    da.iterations = sampler.da_iterations;
    da.seed = rng();
    da.power_init = dual.init();
    da.inner = z.family() == Family::miqp ? InnerMinimizer::analytic : InnerMinimizer::primal_net;
    const DualTrajectory traj = dual_ascent(z, da, &primal);
    pick(traj.multipliers, counts[2]);
  }
  if (counts[3] > 0) {
    const MultiplierInit init{sampler.box_upper, 1.0};
    for (int i = 0; i < counts[3]; ++i) out.push_back(draw_initial_multipliers(z, init, rng));
  }
  return out;
}

namespace {

template <class Fn>
EpochStats run_epoch(std::size_t size, int batch, Rng& shuffle, int layers, Fn&& step) {
  EpochStats stats;
  stats.residuals = Vector::Zero(layers);
  std::vector<std::size_t> order(size);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), shuffle);
  for (std::size_t start = 0; start < size; start += static_cast<std::size_t>(batch)) {
    const std::size_t end = std::min(size, start + static_cast<std::size_t>(batch));
    const MetaValue v = step(std::span<const std::size_t>(order.data() + start, end - start));
    stats.loss += v.value;
    stats.objective += v.objective;
    stats.residuals += v.residuals;
    ++stats.batches;
  }
  if (stats.batches > 0) {
    stats.loss /= stats.batches;
    stats.objective /= stats.batches;
    stats.residuals /= stats.batches;
  }
  return stats;
}

void project_ascent(Vector& multipliers, const Vector& residuals, double step) {
  multipliers = (multipliers + step * residuals).cwiseMax(0.0);
}

}  // namespace

EpochStats train_primal(PrimalNet& primal, const DualNet& dual, Vector& mu, Adam& opt, const TrainConfig& cfg,
                        const std::vector<ProblemInstance>& data, TrainStreams& rngs) {
  return run_epoch(data.size(), cfg.primal_batch, rngs.shuffle, primal.layers(), [&](std::span<const std::size_t> idx) {
    std::vector<PrimalSample> samples;
    samples.reserve(idx.size() * static_cast<std::size_t>(cfg.multipliers_per_problem));
    for (std::size_t i : idx) {
      for (Vector& l : sample_multipliers(dual, primal, cfg.sampler, data[i], cfg.multipliers_per_problem, rngs.sampling)) {
        samples.push_back({&data[i], std::move(l)});
      }
    }
    std::vector<Matrix> grads = primal.zero_like();
    const MetaValue v = meta_lagrangian_primal(samples, primal, mu, cfg, ForwardContext::train(rngs.noise), &grads);
    require_finite(grads, "primal training");
    clip_global_norm(grads, cfg.grad_clip);
    opt.step(primal.params(), grads);
    if (cfg.constrained) project_ascent(mu, v.residuals, cfg.primal_meta_lr);
    return v;
  });
}

EpochStats train_dual(DualNet& dual, const PrimalNet& primal, Vector& nu, Adam& opt, const TrainConfig& cfg,
                      const std::vector<ProblemInstance>& data, TrainStreams& rngs) {
  return run_epoch(data.size(), cfg.dual_batch, rngs.shuffle, dual.layers(), [&](std::span<const std::size_t> idx) {
    std::vector<const ProblemInstance*> batch;
    batch.reserve(idx.size());
    for (std::size_t i : idx) batch.push_back(&data[i]);
    std::vector<Matrix> grads = dual.zero_like();
    const MetaValue v = meta_lagrangian_dual(batch, dual, primal, nu, cfg, ForwardContext::train(rngs.noise), &grads);
    require_finite(grads, "dual training");
    clip_global_norm(grads, cfg.grad_clip);
    opt.step(dual.params(), grads);
    if (cfg.constrained) project_ascent(nu, v.residuals, cfg.dual_meta_lr);
    return v;
  });
}

double validation_violation(const DualNet& dual, const PrimalNet& primal, const std::vector<ProblemInstance>& data,
                            std::uint64_t eval_seed) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const ProblemInstance& z : data) {
    ad::Tape tape;
    Binder dbind(tape, dual);
    Binder pbind(tape, primal);
    const TapedInstance zi(tape, z);
    const TapedDualPass pass = dual_forward(tape, dbind, pbind, zi, ForwardContext::eval(eval_seed));
    total += violation(pass.primals.back().value(), z).mean();
  }
  return total / static_cast<double>(data.size());
}

TrainState initial_train_state(const TrainConfig& cfg) {
  cfg.validate();
  const RngStreams streams(cfg.seed);
  TrainState s{
      PrimalNet(cfg.primal_net, cfg.primal_noise),
      DualNet(cfg.dual_net, cfg.dual_noise, cfg.dual_init),
      MetaMultipliers{Vector::Zero(cfg.primal_net.layers), Vector::Zero(cfg.dual_net.layers)},
      Adam(cfg.primal_lr),
      Adam(cfg.dual_lr),
      TrainStreams{streams.stream("shuffle"), streams.stream("sampling"), streams.stream("noise")},
      0,
      0,
      std::numeric_limits<double>::infinity(),
      std::nullopt,
      std::nullopt,
      {},
  };
  Rng init = streams.stream("init");
  s.primal.initialize(init, cfg.head_scale);
  s.dual.initialize(init, cfg.head_scale);
  return s;
}

void joint_train(TrainState& state, const TrainConfig& cfg, const TrainingData& data, TrainObserver* observer) {
  cfg.validate();
  if (state.primal.spec() != cfg.primal_net || state.dual.spec() != cfg.dual_net) {
    throw ConfigError("training state does not match the configured networks");
  }
  auto record = [&](HistoryRecord rec) {
    rec.mu = state.meta.mu;
    rec.nu = state.meta.nu;
    state.history.push_back(std::move(rec));
    ++state.epoch;
    if (observer) observer->on_epoch(state.history.back(), state);
  };

  while (state.iteration < cfg.iterations) {
    const TrainState last_good = state;
    try {
      const EpochStats p =
          train_primal(state.primal, state.dual, state.meta.mu, state.primal_opt, cfg, data.primal_train, state.rngs);
      record({state.iteration, state.epoch, "primal", p.loss, p.objective, p.residuals, {}, {},
              std::numeric_limits<double>::quiet_NaN(), false});
      for (int e = 0; e < cfg.dual_epochs_per_iteration; ++e) {
        const EpochStats d =
            train_dual(state.dual, state.primal, state.meta.nu, state.dual_opt, cfg, data.dual_train, state.rngs);
        const double v = validation_violation(state.dual, state.primal, data.validation, cfg.eval_seed);
        require_finite(v, "validation violation");
        const bool save = !state.gated_primal || v <= cfg.gate_factor * state.best_validation;
        if (save) {
          state.gated_primal = state.primal;
          state.gated_dual = state.dual;
        }
        state.best_validation = std::min(state.best_validation, v);
        record({state.iteration, state.epoch, "dual", d.loss, d.objective, d.residuals, {}, {}, v, save});
      }
    } catch (const NumericalError& e) {
      if (observer) observer->on_abort(last_good, e.what());
      state = last_good;
      throw;
    }
    ++state.iteration;
    if (observer) observer->on_iteration(state);
  }
}

}  // namespace cdu
