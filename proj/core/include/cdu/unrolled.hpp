#pragma once

// Primal and dual unrolled graph networks.
//
// Every unrolled layer is a block of T graph sub-layers
//   X_l = act(sum_h S^h X_{l-1} Theta_{l,h})
// followed by a per-node linear head (weight W in R^F, scalar bias c).
//
//   MIQP primal:  x_k = x_{k-1} + [X_T W + c]_{variable nodes}
//   MIQP dual:    lam_l = relu(lam_{l-1} + [X_T W + c]_{constraint nodes})
//   power primal: p_k = Pmax * sigmoid(p_{k-1}/Pmax + X_T W + c)
//   power dual:   lam_l = relu(lam_{l-1} + m .* (X_T W + c))
//
// Training-time Gaussian noise is added to the head output before the
// output nonlinearity.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdu/autodiff.hpp"
#include "cdu/problem.hpp"
#include "cdu/rng.hpp"
#include "cdu/trajectory.hpp"

namespace cdu {

enum class Activation { identity, tanh, relu, leaky_relu };

std::string_view to_string(Activation act);
Activation activation_from_string(std::string_view name);

/// Taps Theta_{l,h} for each sub-layer l (outer) and hop h (inner).
struct GraphBlockParams {
  std::vector<std::vector<Matrix>> taps;
  Activation activation = Activation::tanh;
  double leaky_slope = 0.01;
};

/// Plain evaluation of a graph block; validates the shape chain.
Matrix graph_block(const Matrix& x0, const Matrix& shift, const GraphBlockParams& params);

/// Taped graph block. `taps[l][h]` are tape nodes.
ad::Var graph_block(ad::Var x0, ad::Var shift, const std::vector<std::vector<ad::Var>>& taps,
                    Activation activation, double leaky_slope);

struct NetSpec {
  Family family = Family::miqp;
  int layers = 1;      // K (primal) or L (dual)
  int sublayers = 1;   // T
  int hops = 1;        // K_h
  int features = 16;   // F
  Activation activation = Activation::tanh;
  double leaky_slope = 0.01;
  int inputs = 0;  // input feature width; 0 selects the family default

  int input_features() const { return inputs > 0 ? inputs : (family == Family::miqp ? 2 : 3); }
  void validate() const;
  bool operator==(const NetSpec&) const = default;
};

/// sigma_k = initial * decay^k for layer k = 1..K.
struct NoiseSchedule {
  double initial = 0.05;
  double decay = 0.7;
  double at(int layer) const;
  bool operator==(const NoiseSchedule&) const = default;
};

/// Initial multipliers: Unif[0, upper] kept with `keep_probability`
/// (zero otherwise). For the power family the draw is restricted to the
/// constrained users.
struct MultiplierInit {
  double upper = 1.0;
  double keep_probability = 0.7;
  bool operator==(const MultiplierInit&) const = default;
};

Vector draw_initial_primal(const ProblemInstance& z, Rng& rng);
Vector draw_initial_multipliers(const ProblemInstance& z, const MultiplierInit& init, Rng& rng);

/// Parameter storage shared by the primal and dual networks: a flat list of
/// tensors, per unrolled layer T*(K_h+1) taps then head weight and bias.
class UnrolledNet {
public:
  UnrolledNet() = default;
  UnrolledNet(NetSpec spec, NoiseSchedule noise);
  UnrolledNet(const UnrolledNet&) = default;
  UnrolledNet(UnrolledNet&&) = default;
  UnrolledNet& operator=(const UnrolledNet&) = default;
  UnrolledNet& operator=(UnrolledNet&&) = default;
  virtual ~UnrolledNet() = default;

  const NetSpec& spec() const noexcept { return spec_; }
  const NoiseSchedule& noise() const noexcept { return noise_; }
  int layers() const noexcept { return spec_.layers; }

  std::vector<Matrix>& params() noexcept { return params_; }
  const std::vector<Matrix>& params() const noexcept { return params_; }
  int tensors_per_layer() const { return spec_.sublayers * (spec_.hops + 1) + 2; }
  int tap_index(int layer, int sublayer, int hop) const;
  int head_weight_index(int layer) const { return layer * tensors_per_layer() + tensors_per_layer() - 2; }
  int head_bias_index(int layer) const { return layer * tensors_per_layer() + tensors_per_layer() - 1; }
  /// "layer{k}/sub{l}/tap{h}", "layer{k}/head/W", "layer{k}/head/c".
  std::string param_name(int index) const;
  Eigen::Index scalar_count() const;

  /// Glorot-uniform taps, head weights scaled by `head_scale`, zero biases.
  void initialize(Rng& rng, double head_scale = 0.1);
  void zero_heads();
  GraphBlockParams block(int layer) const;
  /// Gradient buffers shaped like params(), zero-filled.
  std::vector<Matrix> zero_like() const;

private:
  NetSpec spec_;
  NoiseSchedule noise_;
  std::vector<Matrix> params_;
};

class PrimalNet : public UnrolledNet {
public:
  using UnrolledNet::UnrolledNet;
};

class DualNet : public UnrolledNet {
public:
  DualNet() = default;
  DualNet(NetSpec spec, NoiseSchedule noise, MultiplierInit init) : UnrolledNet(spec, noise), init_(init) {}
  const MultiplierInit& init() const noexcept { return init_; }

private:
  MultiplierInit init_;
};

/// train: random x~_0 / lambda_0 and noise; explore: random initial points
/// without noise; eval: initial points drawn from a fresh RNG seeded with
/// `eval_seed` on every call, no noise.
enum class Mode { train, explore, eval };

struct ForwardContext {
  Mode mode = Mode::eval;
  Rng* rng = nullptr;  // required for train/explore
  std::uint64_t eval_seed = 0;
  std::optional<Vector> initial_primal;      // overrides the x~_0 draw
  std::optional<Vector> initial_multiplier;  // overrides the lambda_0 draw

  static ForwardContext eval(std::uint64_t seed) { return {Mode::eval, nullptr, seed, {}, {}}; }
  static ForwardContext train(Rng& rng) { return {Mode::train, &rng, 0, {}, {}}; }
  static ForwardContext explore(Rng& rng) { return {Mode::explore, &rng, 0, {}, {}}; }
};

/// Binds network parameters as tape leaves, once per tape. When `grads` is
/// given, gradients are accumulated there; otherwise parameters are fixed.
class Binder {
public:
  Binder(ad::Tape& tape, const UnrolledNet& net, std::vector<Matrix>* grads = nullptr);
  ad::Var operator()(int index);
  const UnrolledNet& net() const noexcept { return net_; }

private:
  ad::Tape& tape_;
  const UnrolledNet& net_;
  std::vector<Matrix>* grads_;
  std::vector<ad::Var> bound_;
};

/// Graph block of unrolled layer `layer` followed by its head: X_T W + c.
ad::Var layer_output(Binder& net, int layer, ad::Var features, ad::Var shift);

/// Instance data placed on a tape once and reused by every layer.
struct TapedInstance {
  TapedInstance(ad::Tape& tape, const ProblemInstance& z);
  const ProblemInstance& z;
  ad::Var shift;
  ad::Var var_feature;   // miqp: q
  ad::Var con_feature;   // miqp: b; power: rate targets s
  ad::Var mask;          // power: constrained-user mask
};

/// x~_0..x~_K on the tape.
std::vector<ad::Var> primal_forward(ad::Tape& tape, Binder& primal, ad::Var lambda, const TapedInstance& zi,
                                    const ForwardContext& ctx);

struct TapedDualPass {
  std::vector<ad::Var> multipliers;  // lambda_0..lambda_L
  std::vector<ad::Var> primals;      // x_0..x_L (x_L is the recovered solution)
  int primal_queries = 0;
};

TapedDualPass dual_forward(ad::Tape& tape, Binder& dual, Binder& primal, const TapedInstance& zi,
                           const ForwardContext& ctx);

/// Plain (value-only) forward passes with recomputed diagnostics.
PrimalTrajectory primal_forward(const Vector& lambda, const ProblemInstance& z, const PrimalNet& net,
                                const ForwardContext& ctx);
DualTrajectory dual_forward(const ProblemInstance& z, const DualNet& dual, const PrimalNet& primal,
                            const ForwardContext& ctx);
/// x_L = Phi_P(Phi_D(z), z), the primal answer at the final multiplier.
Vector recover_solution(const ProblemInstance& z, const DualNet& dual, const PrimalNet& primal, std::uint64_t eval_seed);

}  // namespace cdu
