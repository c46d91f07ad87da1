#pragma once

// Constrained training of the unrolled networks.
//
// Primal training minimizes the empirical Lagrangian at the last primal layer
// subject to per-layer descent constraints; dual training maximizes the
// Lagrangian at the recovered solution subject to per-layer ascent
// constraints on ||f(x_l)||. Both are solved by alternating Adam steps on the
// network parameters with projected gradient ascent on the meta-multipliers.

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdu/optim.hpp"
#include "cdu/unrolled.hpp"

namespace cdu {

enum class DescentMetric { value, gradient };

std::string_view to_string(DescentMetric metric);
DescentMetric descent_metric_from_string(std::string_view name);

/// Mixture of multiplier sources used to train the primal network.
struct MultiplierSampler {
  double dual_weight = 0.5;            // layers of a fresh dual-network pass
  double uniform_sparse_weight = 0.5;  // Unif[0, sparse_upper] kept with keep_probability
  double da_weight = 0.0;              // iterates of a dual-ascent run
  double uniform_box_weight = 0.0;     // Unif[0, box_upper]
  double sparse_upper = 1.0;
  double keep_probability = 0.7;
  double box_upper = 1.0;
  double da_step = 0.05;
  int da_iterations = 100;

  void validate() const;
  /// Deterministic per-source counts (dual, sparse, da, box) summing to M,
  /// by largest remainder.
  std::array<int, 4> split(int M) const;
  bool operator==(const MultiplierSampler&) const = default;
};

struct TrainConfig {
  Family family = Family::miqp;
  NetSpec primal_net;
  NetSpec dual_net;
  NoiseSchedule primal_noise;
  NoiseSchedule dual_noise;
  MultiplierInit dual_init;
  DescentMetric metric = DescentMetric::gradient;
  double alpha = 0.98;
  double beta = 0.95;
  double primal_lr = 1e-4;
  double dual_lr = 7e-4;
  double primal_meta_lr = 1e-4;
  double dual_meta_lr = 1e-3;
  int primal_batch = 8;
  int dual_batch = 256;
  int multipliers_per_problem = 32;
  int dual_epochs_per_iteration = 15;
  int iterations = 400;
  bool constrained = true;  // false freezes mu = nu = 0 (unconstrained ablation)
  double gate_factor = 1.5;
  double grad_clip = 0.0;   // global-norm clipping, 0 disables
  double head_scale = 0.1;
  MultiplierSampler sampler;
  std::uint64_t seed = 0;
  std::uint64_t eval_seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Per-layer descent constraint values for k = 1..K:
/// value mode L_k - alpha L_{k-1}; gradient mode ||grad L_k|| - alpha ||grad L_{k-1}||.
Vector descent_residual(const PrimalTrajectory& traj, DescentMetric metric, double alpha);
/// Per-layer ascent constraint values ||f(x_l)|| - beta ||f(x_{l-1})|| for l = 1..L.
Vector ascent_residual(const DualTrajectory& traj, double beta);

struct MetaMultipliers {
  Vector mu;  // primal descent constraints, length K
  Vector nu;  // dual ascent constraints, length L
};

struct PrimalSample {
  const ProblemInstance* z = nullptr;
  Vector lambda;
};

struct MetaValue {
  double value = 0.0;      // meta-Lagrangian
  double objective = 0.0;  // its objective part alone
  Vector residuals;        // batch-mean constraint values per layer
};

/// Mean over samples of L(x~_K, lambda) + sum_k mu_k * residual_k. When
/// `grads` is given, d/dtheta_P is accumulated into it.
MetaValue meta_lagrangian_primal(std::span<const PrimalSample> batch, const PrimalNet& primal, const Vector& mu,
                                 const TrainConfig& cfg, const ForwardContext& ctx,
                                 std::vector<Matrix>* grads = nullptr);

/// Mean over instances of -L(x_L, lambda_L) + sum_l nu_l * residual_l. When
/// `grads` is given, d/dtheta_D is accumulated into it; the primal network
/// is held fixed.
MetaValue meta_lagrangian_dual(std::span<const ProblemInstance* const> batch, const DualNet& dual,
                               const PrimalNet& primal, const Vector& nu, const TrainConfig& cfg,
                               const ForwardContext& ctx, std::vector<Matrix>* grads = nullptr);

/// M nonnegative multipliers for z, split across the sampler's sources.
std::vector<Vector> sample_multipliers(const DualNet& dual, const PrimalNet& primal, const MultiplierSampler& sampler,
                                       const ProblemInstance& z, int M, Rng& rng);

struct TrainStreams {
  Rng shuffle;
  Rng sampling;
  Rng noise;
};

struct EpochStats {
  double loss = 0.0;
  double objective = 0.0;
  Vector residuals;
  int batches = 0;
};

/// One epoch of primal training; updates theta_P, mu (when constrained) and
/// the optimizer state. The dual network is only read.
EpochStats train_primal(PrimalNet& primal, const DualNet& dual, Vector& mu, Adam& opt, const TrainConfig& cfg,
                        const std::vector<ProblemInstance>& data, TrainStreams& rngs);

/// One epoch of dual training; updates theta_D and nu (when constrained).
EpochStats train_dual(DualNet& dual, const PrimalNet& primal, Vector& nu, Adam& opt, const TrainConfig& cfg,
                      const std::vector<ProblemInstance>& data, TrainStreams& rngs);

/// Mean violation of the recovered solutions in eval mode.
double validation_violation(const DualNet& dual, const PrimalNet& primal, const std::vector<ProblemInstance>& data,
                            std::uint64_t eval_seed);

struct TrainingData {
  std::vector<ProblemInstance> primal_train;
  std::vector<ProblemInstance> dual_train;
  std::vector<ProblemInstance> validation;
};

struct HistoryRecord {
  int iteration = 0;
  int epoch = 0;
  std::string phase;  // "primal" or "dual"
  double loss = 0.0;
  double objective = 0.0;
  Vector residuals;
  Vector mu;
  Vector nu;
  double validation = std::numeric_limits<double>::quiet_NaN();  // dual epochs only
  bool saved = false;
};

/// Everything needed to continue a run exactly where it stopped.
struct TrainState {
  PrimalNet primal;
  DualNet dual;
  MetaMultipliers meta;
  Adam primal_opt;
  Adam dual_opt;
  TrainStreams rngs;
  int iteration = 0;  // completed outer iterations
  int epoch = 0;      // completed epochs of either kind
  double best_validation = std::numeric_limits<double>::infinity();
  std::optional<PrimalNet> gated_primal;
  std::optional<DualNet> gated_dual;
  std::vector<HistoryRecord> history;
};

TrainState initial_train_state(const TrainConfig& cfg);

class TrainObserver {
public:
  virtual ~TrainObserver() = default;
  virtual void on_epoch(const HistoryRecord&, const TrainState&) {}
  virtual void on_iteration(const TrainState&) {}
  /// Called with the state at the start of the failing iteration.
  virtual void on_abort(const TrainState&, const std::string&) {}
};

/// Alternates one primal epoch and `dual_epochs_per_iteration` dual epochs
/// until `cfg.iterations` outer iterations are complete. After every dual
/// epoch the validation violation v is measured; the nets are saved as the
/// gated checkpoint when v <= gate_factor * best so far. Non-finite losses
/// throw NumericalError after notifying the observer.
void joint_train(TrainState& state, const TrainConfig& cfg, const TrainingData& data, TrainObserver* observer = nullptr);

}  // namespace cdu
