#include "cdu/trajectory.hpp"

#include "cdu/errors.hpp"

namespace cdu {

LayerDiagnostics diagnose(const Vector& x, const Vector& lambda, const ProblemInstance& z) {
  LayerDiagnostics d;
  const Vector f = constraints(x, z);
  const Vector v = f.cwiseMax(0.0);
  d.lagrangian = lagrangian(x, lambda, z);
  d.grad_norm = lagrangian_gradient(x, lambda, z).norm();
  d.constraint_norm = f.norm();
  const ViolationSummary s = summarize(v);
  d.violation_mean = s.mean;
  d.violation_max = s.max;
  d.slackness = lambda.dot(v);
  return d;
}

PrimalTrajectory make_primal_trajectory(Vector multiplier, std::vector<Vector> iterates, const ProblemInstance& z) {
  if (iterates.empty()) throw ContractError("primal trajectory needs at least the initial iterate");
  PrimalTrajectory t;
  t.multiplier = std::move(multiplier);
  t.iterates = std::move(iterates);
  t.diagnostics.reserve(t.iterates.size());
  for (const Vector& x : t.iterates) t.diagnostics.push_back(diagnose(x, t.multiplier, z));
  return t;
}

DualTrajectory make_dual_trajectory(std::vector<Vector> multipliers, std::vector<Vector> primals,
                                    const ProblemInstance& z, int primal_queries) {
  if (multipliers.empty()) throw ContractError("dual trajectory needs at least the initial multiplier");
  if (multipliers.size() != primals.size()) {
    throw DimensionError("trajectory primal answers", static_cast<long>(multipliers.size()),
                         static_cast<long>(primals.size()));
  }
  DualTrajectory t;
  t.multipliers = std::move(multipliers);
  t.primals = std::move(primals);
  t.primal_queries = primal_queries;
  t.diagnostics.reserve(t.multipliers.size());
  for (std::size_t l = 0; l < t.multipliers.size(); ++l) {
    t.diagnostics.push_back(diagnose(t.primals[l], t.multipliers[l], z));
  }
  return t;
}

}  // namespace cdu
