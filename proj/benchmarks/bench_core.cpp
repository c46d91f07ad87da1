// Throughput of the hot paths: oracle solve, dual ascent, forward passes
// and meta-Lagrangian gradients.

#include <benchmark/benchmark.h>

#include "cdu/baselines.hpp"
#include "cdu/training.hpp"

using namespace cdu;

namespace {

NetSpec spec(Family family, int layers, int features, int sublayers) {
  NetSpec s;
  s.family = family;
  s.layers = layers;
  s.sublayers = sublayers;
  s.hops = family == Family::miqp ? 1 : 2;
  s.features = features;
  s.activation = family == Family::miqp ? Activation::tanh : Activation::leaky_relu;
  return s;
}

ProblemInstance instance(Family family, int n) {
  if (family == Family::miqp) return ProblemInstance(relax(generate_instance(n, n / 2, n / 5, 3)));
  NetworkGeometry geo;
  geo.area_side_m = 150.0 * std::sqrt(static_cast<double>(n));
  return ProblemInstance(generate_network(n, 0.5, 3, geo));
}

MultiplierInit init(Family family) { return family == Family::miqp ? MultiplierInit{1.0, 0.7} : MultiplierInit{10.0, 1.0}; }

void BM_ReferenceSolve(benchmark::State& st) {
  const RelaxedQp qp = relax(generate_instance(static_cast<int>(st.range(0)), static_cast<int>(st.range(0)) / 2, 4, 1));
  for (auto _ : st) benchmark::DoNotOptimize(reference_solve(qp).value);
}
BENCHMARK(BM_ReferenceSolve)->Arg(20)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_DualAscent(benchmark::State& st) {
  const ProblemInstance z = instance(Family::miqp, 20);
  DaConfig cfg;
  cfg.iterations = static_cast<int>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(dual_ascent(z, cfg).multipliers.size());
}
BENCHMARK(BM_DualAscent)->Arg(600)->Unit(benchmark::kMillisecond);

void BM_DualForward(benchmark::State& st) {
  const Family family = st.range(0) == 0 ? Family::miqp : Family::power;
  const int n = static_cast<int>(st.range(1));
  PrimalNet primal(spec(family, 6, 16, 2), NoiseSchedule{});
  DualNet dual(spec(family, 6, 16, 2), NoiseSchedule{}, init(family));
  Rng rng(1);
  primal.initialize(rng, 0.5);
  dual.initialize(rng, 0.5);
  const ProblemInstance z = instance(family, n);
  for (auto _ : st) benchmark::DoNotOptimize(dual_forward(z, dual, primal, ForwardContext::eval(0)).solution());
}
BENCHMARK(BM_DualForward)->Args({0, 20})->Args({0, 80})->Args({1, 20})->Args({1, 100})->Unit(benchmark::kMicrosecond);

void BM_MetaGradient(benchmark::State& st) {
  const Family family = st.range(0) == 0 ? Family::miqp : Family::power;
  TrainConfig cfg;
  cfg.family = family;
  cfg.primal_net = spec(family, 6, 16, 2);
  cfg.dual_net = spec(family, 6, 16, 2);
  cfg.dual_init = init(family);
  PrimalNet primal(cfg.primal_net, NoiseSchedule{});
  DualNet dual(cfg.dual_net, NoiseSchedule{}, cfg.dual_init);
  Rng rng(2);
  primal.initialize(rng, 0.5);
  dual.initialize(rng, 0.5);
  const ProblemInstance z = instance(family, 20);
  const std::vector<const ProblemInstance*> batch{&z};
  const Vector nu = Vector::Constant(6, 0.1);
  for (auto _ : st) {
    std::vector<Matrix> grads = dual.zero_like();
    Rng r(3);
    benchmark::DoNotOptimize(meta_lagrangian_dual(batch, dual, primal, nu, cfg, ForwardContext::train(r), &grads).value);
  }
}
BENCHMARK(BM_MetaGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
