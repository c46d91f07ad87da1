#pragma once

#include <random>

#include "cdu/baselines.hpp"
#include "cdu/training.hpp"

namespace fixture {

inline cdu::NetSpec tiny_spec(cdu::Family family, int layers, int features = 4, int sublayers = 1, int hops = 1) {
  cdu::NetSpec s;
  s.family = family;
  s.layers = layers;
  s.sublayers = sublayers;
  s.hops = hops;
  s.features = features;
  s.activation = family == cdu::Family::miqp ? cdu::Activation::tanh : cdu::Activation::leaky_relu;
  s.leaky_slope = 0.1;
  return s;
}

inline cdu::ProblemInstance qp(int n, int m, int r, std::uint64_t seed) {
  return cdu::ProblemInstance(cdu::relax(cdu::generate_instance(n, m, r, seed)));
}

inline cdu::ProblemInstance network(int n, double fraction, std::uint64_t seed) {
  cdu::NetworkGeometry geo;
  geo.area_side_m = 300.0;
  return cdu::ProblemInstance(cdu::generate_network(n, fraction, seed, geo));
}

inline cdu::MultiplierInit default_init(cdu::Family family) {
  return family == cdu::Family::miqp ? cdu::MultiplierInit{1.0, 0.7} : cdu::MultiplierInit{10.0, 1.0};
}

inline cdu::PrimalNet primal(cdu::Family family, int layers, std::uint64_t seed, int features = 4, int sublayers = 1) {
  cdu::PrimalNet net(tiny_spec(family, layers, features, sublayers), cdu::NoiseSchedule{});
  cdu::Rng rng(seed);
  net.initialize(rng, 0.5);
  return net;
}

inline cdu::DualNet dual(cdu::Family family, int layers, std::uint64_t seed, int features = 4, int sublayers = 1) {
  cdu::DualNet net(tiny_spec(family, layers, features, sublayers), cdu::NoiseSchedule{}, default_init(family));
  cdu::Rng rng(seed);
  net.initialize(rng, 0.5);
  return net;
}

/// Training configuration for tiny nets (K = L = layers, F = features).
inline cdu::TrainConfig tiny_config(cdu::Family family, int layers, int features = 4) {
  cdu::TrainConfig cfg;
  cfg.family = family;
  cfg.primal_net = tiny_spec(family, layers, features);
  cfg.dual_net = tiny_spec(family, layers, features);
  cfg.dual_init = default_init(family);
  cfg.metric = family == cdu::Family::miqp ? cdu::DescentMetric::gradient : cdu::DescentMetric::value;
  cfg.alpha = family == cdu::Family::miqp ? 0.98 : 1.05;
  cfg.beta = family == cdu::Family::miqp ? 0.95 : 0.8;
  cfg.primal_batch = 2;
  cfg.dual_batch = 2;
  cfg.multipliers_per_problem = 2;
  cfg.dual_epochs_per_iteration = 1;
  cfg.iterations = 1;
  cfg.head_scale = 0.5;
  if (family == cdu::Family::power) {
    cfg.sampler.dual_weight = 0.25;
    cfg.sampler.uniform_sparse_weight = 0.0;
    cfg.sampler.uniform_box_weight = 0.5;
    cfg.sampler.da_weight = 0.25;
    cfg.sampler.da_iterations = 5;
  }
  return cfg;
}

}  // namespace fixture
