#pragma once

// Metrics against reference solutions, layerwise diagnostics,
// out-of-distribution sweeps, and plot-ready tables.

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cdu/baselines.hpp"
#include "cdu/training.hpp"

namespace cdu {

enum class Method { cdu, unconstrained, da, sa, naive, fullpower };

std::string_view to_string(Method method);
Method method_from_string(std::string_view name);
/// Whether the method produces multipliers (and therefore a dual trajectory).
bool has_multipliers(Method method);

struct ReferenceSolution {
  Vector x;
  Vector lambda;
  double kkt_residual = std::numeric_limits<double>::quiet_NaN();  // QPs only
};

struct ReferenceOptions {
  ReferenceSolveOptions qp;
  DaConfig sa = state_augmented_defaults();
};

/// "reference_solve" for QPs, "sa" for networks.
std::string_view reference_method(Family family);

/// x* and lambda* for z: the convex oracle for QPs, state-augmented dual
/// dynamics with `sa_primal` for networks.
ReferenceSolution compute_reference(const ProblemInstance& z, const PrimalNet* sa_primal,
                                    const ReferenceOptions& options = {});
std::vector<ReferenceSolution> compute_references(const std::vector<ProblemInstance>& data,
                                                  const PrimalNet* sa_primal, const ReferenceOptions& options = {});

/// Trained models available to the evaluated methods. Unused slots stay null.
struct ModelSet {
  const PrimalNet* primal = nullptr;
  const DualNet* dual = nullptr;
  const PrimalNet* ablation_primal = nullptr;
  const DualNet* ablation_dual = nullptr;
  const NaiveGnn* naive = nullptr;
  const PrimalNet* sa_primal = nullptr;  // inner network for sa; falls back to `primal`
};

struct MethodSettings {
  DaConfig da;
  DaConfig sa = state_augmented_defaults();
  std::uint64_t eval_seed = 0;
};

/// Runs `method` on z. Methods without multipliers return a single pair
/// (0, x).
DualTrajectory run_method(Method method, const ProblemInstance& z, const ModelSet& models,
                          const MethodSettings& settings);

/// Recomputes every diagnostic from the raw iterates.
std::vector<LayerDiagnostics> layer_diagnostics(const DualTrajectory& traj, const ProblemInstance& z);
std::vector<LayerDiagnostics> layer_diagnostics(const PrimalTrajectory& traj, const ProblemInstance& z);

struct InstanceMetrics {
  int instance = 0;
  double mse_x = 0.0;
  double mse_lambda = std::numeric_limits<double>::quiet_NaN();
  double objective = 0.0;  // minimization form
  double sum_rate = std::numeric_limits<double>::quiet_NaN();  // networks only
  double violation_mean = 0.0;
  double violation_max = 0.0;
  double reference_objective = 0.0;
  double reference_kkt = std::numeric_limits<double>::quiet_NaN();
  // One entry per (x_l, lambda_l) pair of the trajectory.
  std::vector<double> mse_x_layers;
  std::vector<double> mse_lambda_layers;
  std::vector<double> objective_layers;
  std::vector<double> violation_layers;
  std::vector<double> slackness_layers;
  std::vector<double> constraint_norm_layers;
  // Primal pass at the final multiplier; learned methods only.
  std::vector<double> primal_lagrangian_layers;
  std::vector<double> primal_grad_norm_layers;
  // Constraint values; descent averaged over the multipliers lambda_0..lambda_L.
  std::vector<double> descent_residual;
  std::vector<double> ascent_residual;
};

struct EvalAggregate {
  int instances = 0;
  double mse_x = 0.0;
  double mse_lambda = std::numeric_limits<double>::quiet_NaN();
  double objective = 0.0;
  double sum_rate = std::numeric_limits<double>::quiet_NaN();
  double violation_mean = 0.0;
  double violation_max = 0.0;
  double reference_objective = 0.0;
  double max_reference_kkt = std::numeric_limits<double>::quiet_NaN();
  double descent_residual = std::numeric_limits<double>::quiet_NaN();  // mean over layers and instances
  double ascent_residual = std::numeric_limits<double>::quiet_NaN();
  double slackness_decrease_fraction = std::numeric_limits<double>::quiet_NaN();  // final <= first
  std::vector<double> mse_x_layers;
  std::vector<double> mse_lambda_layers;
  std::vector<double> objective_layers;
  std::vector<double> violation_layers;
  std::vector<double> slackness_layers;
  std::vector<double> primal_grad_norm_layers;
  std::vector<double> descent_residual_layers;
  std::vector<double> ascent_residual_layers;
};

struct EvalReport {
  Method method = Method::cdu;
  Family family = Family::miqp;
  std::string dataset_hash;
  std::string reference;
  std::vector<InstanceMetrics> rows;

  /// Pure reduction over `rows`.
  EvalAggregate aggregate() const;
};

struct EvalOptions {
  DescentMetric metric = DescentMetric::gradient;
  double alpha = 0.98;
  double beta = 0.95;
  std::string dataset_hash;
};

EvalReport evaluate(Method method, const std::vector<ProblemInstance>& data,
                    const std::vector<ReferenceSolution>& references, const ModelSet& models,
                    const MethodSettings& settings, const EvalOptions& options = {});

enum class OodAxis { n, m, r, r_min, fraction };

std::string_view to_string(OodAxis axis);
OodAxis ood_axis_from_string(std::string_view name);

struct MiqpShape {
  int n = 20;
  int m = 10;
  int r = 4;
  bool operator==(const MiqpShape&) const = default;
};

struct PowerShape {
  int n = 20;
  double fraction = 0.5;
  NetworkGeometry geometry;
  RadioParams radio;
  bool operator==(const PowerShape&) const = default;
};

struct OodSpec {
  Family family = Family::miqp;
  OodAxis axis = OodAxis::n;
  std::vector<double> grid;
  double in_distribution = 20.0;
  MiqpShape miqp;
  PowerShape power;
  std::vector<std::uint64_t> seeds{0};
  int instances = 20;
  std::vector<Method> methods{Method::cdu};
  int da_iterations = 1400;

  bool operator==(const OodSpec&) const = default;
  /// The axis must belong to the family and the grid must contain the
  /// in-distribution value.
  void validate() const;
};

/// Instances of one grid point, generated from `seed`.
std::vector<ProblemInstance> ood_instances(const OodSpec& spec, double value, std::uint64_t seed);

struct SweepRow {
  Method method = Method::cdu;
  OodAxis axis = OodAxis::n;
  double value = 0.0;
  std::uint64_t seed = 0;
  bool in_distribution = false;
  EvalAggregate metrics;
};

/// One row per (method, grid value, seed). The dual-ascent budget is
/// `spec.da_iterations`.
std::vector<SweepRow> ood_sweep(const OodSpec& spec, const ModelSet& models, const MethodSettings& settings);

/// Plot-ready table with typed cells.
using Cell = std::variant<double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  std::size_t column(std::string_view name) const;
  double number(std::size_t row, std::string_view name) const;
  std::string text(std::size_t row, std::string_view name) const;
  bool operator==(const Table&) const = default;
};

enum class Figure { trajectories, layers, ood, rate_histogram };

std::string_view to_string(Figure figure);
Figure figure_from_string(std::string_view name);

struct NamedTrajectory {
  std::string method;
  DualTrajectory trajectory;
  PrimalTrajectory primal;  // may be empty
};

/// Lagrangian of the primal iterates and dual value of the multipliers
/// against a common step axis; learned layers are spread evenly over
/// `axis_length` steps.
Table trajectories_table(const std::vector<NamedTrajectory>& runs, const ProblemInstance& z, int axis_length);
/// Per-layer means of each report, spread over the longest trajectory.
Table layers_table(const std::vector<EvalReport>& reports);
Table sweep_table(const std::vector<SweepRow>& rows);
/// Achieved rates of constrained users with the minimum-rate reference.
Table rate_histogram_table(const std::vector<std::pair<std::string, std::vector<Vector>>>& allocations,
                           const std::vector<ProblemInstance>& data);

/// SVG rendering that depends only on the table.
std::string render_svg(Figure figure, const Table& table);

}  // namespace cdu
