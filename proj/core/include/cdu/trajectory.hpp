#pragma once

#include <vector>

#include "cdu/problem.hpp"

namespace cdu {

/// Quantities of one (x, lambda) pair, always recomputed from the iterates.
struct LayerDiagnostics {
  double lagrangian = 0.0;
  double grad_norm = 0.0;        // ||grad_x L(x, lambda)||
  double constraint_norm = 0.0;  // ||f(x)||
  double violation_mean = 0.0;
  double violation_max = 0.0;
  double slackness = 0.0;        // lambda' max(0, f(x))
};

LayerDiagnostics diagnose(const Vector& x, const Vector& lambda, const ProblemInstance& z);

/// Primal iterates x~_0..x~_K for a fixed multiplier.
struct PrimalTrajectory {
  Vector multiplier;
  std::vector<Vector> iterates;
  std::vector<LayerDiagnostics> diagnostics;

  int layers() const { return static_cast<int>(iterates.size()) - 1; }
  const Vector& final() const { return iterates.back(); }
};

/// Multipliers lambda_0..lambda_L with their primal answers x_0..x_L, where
/// x_l approximates argmin_x L(x, lambda_l). The last pair is the recovered
/// solution.
struct DualTrajectory {
  std::vector<Vector> multipliers;
  std::vector<Vector> primals;
  std::vector<LayerDiagnostics> diagnostics;
  int primal_queries = 0;  // primal-network queries made inside the layers

  int layers() const { return static_cast<int>(multipliers.size()) - 1; }
  const Vector& final_multiplier() const { return multipliers.back(); }
  const Vector& solution() const { return primals.back(); }
};

PrimalTrajectory make_primal_trajectory(Vector multiplier, std::vector<Vector> iterates, const ProblemInstance& z);
DualTrajectory make_dual_trajectory(std::vector<Vector> multipliers, std::vector<Vector> primals,
                                    const ProblemInstance& z, int primal_queries = 0);

}  // namespace cdu
