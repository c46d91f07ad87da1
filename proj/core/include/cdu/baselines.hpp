#pragma once

// Reference methods that share the trajectory types of the learned models:
// classical dual ascent with a pluggable inner minimizer, state-augmented
// dual dynamics, and a supervised graph network that regresses the solution.

#include <cstdint>
#include <optional>
#include <vector>

#include "cdu/trajectory.hpp"
#include "cdu/unrolled.hpp"

namespace cdu {

enum class InnerMinimizer { analytic, primal_net, grid };

struct DaConfig {
  double step = 0.01;
  int iterations = 1000;
  InnerMinimizer inner = InnerMinimizer::analytic;
  /// lambda_0; defaults to 0 for QPs and to the power initial distribution
  /// (drawn from `seed`) for networks.
  std::optional<Vector> initial;
  std::uint64_t seed = 0;  // initial draw and primal-network evaluation seed
  MultiplierInit power_init{10.0, 1.0};
  int grid_points = 41;    // per coordinate, grid minimizer only

  void validate() const;
};

/// lambda_{l+1} = [lambda_l + step * f(x_l)]_+ with x_l = argmin_x L(x, lambda_l).
/// The trajectory holds iterations + 1 (lambda_l, x_l) pairs.
DualTrajectory dual_ascent(const ProblemInstance& z, const DaConfig& cfg, const PrimalNet* primal = nullptr);

/// Dual ascent with a trained primal network as inner minimizer
/// (default step 0.05, 600 iterations).
DaConfig state_augmented_defaults();
DualTrajectory state_augmented_da(const ProblemInstance& z, const PrimalNet& primal,
                                  const DaConfig& cfg = state_augmented_defaults());

/// Brute-force minimizer of L(., lambda) over a uniform grid of the power box.
/// Only for tiny networks (grid_points^n <= 2e6).
Vector grid_minimizer(const Vector& lambda, const ProblemInstance& z, int grid_points);

struct NaiveGnnSpec {
  Family family = Family::miqp;
  int depth = 42;
  int features = 32;
  int hops = 1;
  bool operator==(const NaiveGnnSpec&) const = default;
};

struct SupervisedConfig {
  int epochs = 100;
  int batch = 8;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

/// Plain graph network mapping instance data to a solution: MIQP input is
/// [q; b] on the bipartite graph, power input is (rate target, 1) per user.
/// Relu graph layers followed by a linear readout (sigmoid-scaled for power).
class NaiveGnn {
public:
  NaiveGnn() = default;
  explicit NaiveGnn(NaiveGnnSpec spec);

  const NaiveGnnSpec& spec() const noexcept { return spec_; }
  UnrolledNet& net() noexcept { return net_; }
  const UnrolledNet& net() const noexcept { return net_; }

  Vector predict(const ProblemInstance& z) const;
  ad::Var forward(Binder& binder, const ProblemInstance& z) const;

private:
  NaiveGnnSpec spec_;
  UnrolledNet net_;
};

/// Per-coordinate mean squared error in the network's output units (power
/// allocations normalized by P_max).
double supervised_loss(const NaiveGnn& model, const std::vector<ProblemInstance>& data,
                       const std::vector<Vector>& labels);

/// Trains by Adam on the supervised loss; returns the model and fills
/// `losses` with the per-epoch training loss when given.
NaiveGnn naive_gnn_train(const NaiveGnnSpec& spec, const std::vector<ProblemInstance>& data,
                         const std::vector<Vector>& labels, const SupervisedConfig& cfg,
                         std::vector<double>* losses = nullptr);

}  // namespace cdu
