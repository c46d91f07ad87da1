#include "cdu/unrolled.hpp"

#include <cmath>
#include <random>

#include "cdu/errors.hpp"

namespace cdu {

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  if (name == "leaky_relu") return Activation::leaky_relu;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

namespace {

Matrix activate(const Matrix& x, Activation act, double slope) {
  switch (act) {
    case Activation::identity: return x;
    case Activation::tanh: return x.array().tanh().matrix();
    case Activation::relu: return x.cwiseMax(0.0);
    case Activation::leaky_relu: return x.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
  }
  return x;
}

ad::Var activate(ad::Var x, Activation act, double slope) {
  switch (act) {
    case Activation::identity: return x;
    case Activation::tanh: return ad::tanh(x);
    case Activation::relu: return ad::relu(x);
    case Activation::leaky_relu: return ad::leaky_relu(x, slope);
  }
  return x;
}

}  // namespace

Matrix graph_block(const Matrix& x0, const Matrix& shift, const GraphBlockParams& params) {
  if (shift.rows() != shift.cols()) throw DimensionError("shift columns", shift.rows(), shift.cols());
  if (x0.rows() != shift.rows()) throw DimensionError("node features rows", shift.rows(), x0.rows());
  Matrix x = x0;
  for (std::size_t l = 0; l < params.taps.size(); ++l) {
    const auto& taps = params.taps[l];
    if (taps.empty()) throw DimensionError("graph filter taps", 1, 0);
    Matrix z = x;
    Matrix acc = Matrix::Zero(x.rows(), taps.front().cols());
    for (std::size_t h = 0; h < taps.size(); ++h) {
      if (taps[h].rows() != x.cols()) throw DimensionError("filter tap rows", x.cols(), taps[h].rows());
      if (taps[h].cols() != acc.cols()) throw DimensionError("filter tap columns", acc.cols(), taps[h].cols());
      if (h > 0) z = shift * z;
      acc.noalias() += z * taps[h];
    }
    x = activate(acc, params.activation, params.leaky_slope);
  }
  return x;
}

ad::Var graph_block(ad::Var x0, ad::Var shift, const std::vector<std::vector<ad::Var>>& taps, Activation activation,
                    double leaky_slope) {
  if (x0.rows() != shift.rows()) throw DimensionError("node features rows", shift.rows(), x0.rows());
  ad::Var x = x0;
  for (const auto& layer : taps) {
    if (layer.empty()) throw DimensionError("graph filter taps", 1, 0);
    ad::Var z = x;
    ad::Var acc = matmul(z, layer[0]);
    for (std::size_t h = 1; h < layer.size(); ++h) {
      z = matmul(shift, z);
      acc = acc + matmul(z, layer[h]);
    }
    x = activate(acc, activation, leaky_slope);
  }
  return x;
}

void NetSpec::validate() const {
  if (layers < 1) throw ConfigError("network needs at least one unrolled layer");
  if (sublayers < 1) throw ConfigError("graph block needs at least one sub-layer");
  if (hops < 0) throw ConfigError("filter order must be nonnegative");
  if (features < 1) throw ConfigError("feature width must be positive");
  if (!(leaky_slope >= 0.0)) throw ConfigError("leaky slope must be nonnegative");
}

double NoiseSchedule::at(int layer) const { return initial * std::pow(decay, layer); }

Vector draw_initial_primal(const ProblemInstance& z, Rng& rng) {
  Vector x(z.n_vars());
  if (z.family() == Family::miqp) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : x) v = u(rng);
  } else {
    std::uniform_real_distribution<double> u(0.0, z.network().p_max());
    for (auto& v : x) v = u(rng);
  }
  return x;
}

Vector draw_initial_multipliers(const ProblemInstance& z, const MultiplierInit& init, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector lambda(z.n_cons());
  for (auto& v : lambda) {
    const double value = init.upper * u(rng);
    v = u(rng) < init.keep_probability ? value : 0.0;
  }
  if (z.family() == Family::power) lambda = lambda.cwiseProduct(z.network().mask());
  return lambda;
}

UnrolledNet::UnrolledNet(NetSpec spec, NoiseSchedule noise) : spec_(spec), noise_(noise) {
  spec_.validate();
  params_.reserve(static_cast<std::size_t>(spec_.layers * tensors_per_layer()));
  for (int k = 0; k < spec_.layers; ++k) {
    for (int l = 0; l < spec_.sublayers; ++l) {
      const int fin = l == 0 ? spec_.input_features() : spec_.features;
      for (int h = 0; h <= spec_.hops; ++h) params_.push_back(Matrix::Zero(fin, spec_.features));
    }
    params_.push_back(Matrix::Zero(spec_.features, 1));
    params_.push_back(Matrix::Zero(1, 1));
  }
}

int UnrolledNet::tap_index(int layer, int sublayer, int hop) const {
  return layer * tensors_per_layer() + sublayer * (spec_.hops + 1) + hop;
}

std::string UnrolledNet::param_name(int index) const {
  const int per = tensors_per_layer();
  const int layer = index / per;
  const int local = index % per;
  const std::string prefix = "layer" + std::to_string(layer);
  if (local == per - 2) return prefix + "/head/W";
  if (local == per - 1) return prefix + "/head/c";
  return prefix + "/sub" + std::to_string(local / (spec_.hops + 1)) + "/tap" + std::to_string(local % (spec_.hops + 1));
}

Eigen::Index UnrolledNet::scalar_count() const {
  Eigen::Index n = 0;
  for (const Matrix& p : params_) n += p.size();
  return n;
}

void UnrolledNet::initialize(Rng& rng, double head_scale) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < spec_.layers; ++k) {
    for (int l = 0; l < spec_.sublayers; ++l) {
      for (int h = 0; h <= spec_.hops; ++h) {
        Matrix& t = params_[tap_index(k, l, h)];
        const double limit = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols())) / (spec_.hops + 1);
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = limit * u(rng);
      }
    }
    Matrix& w = params_[head_weight_index(k)];
    const double limit = head_scale * std::sqrt(6.0 / static_cast<double>(w.rows() + 1));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = limit * u(rng);
    params_[head_bias_index(k)].setZero();
  }
}

void UnrolledNet::zero_heads() {
  for (int k = 0; k < spec_.layers; ++k) {
    params_[head_weight_index(k)].setZero();
    params_[head_bias_index(k)].setZero();
  }
}

GraphBlockParams UnrolledNet::block(int layer) const {
  GraphBlockParams b;
  b.activation = spec_.activation;
  b.leaky_slope = spec_.leaky_slope;
  for (int l = 0; l < spec_.sublayers; ++l) {
    std::vector<Matrix> taps;
    for (int h = 0; h <= spec_.hops; ++h) taps.push_back(params_[tap_index(layer, l, h)]);
    b.taps.push_back(std::move(taps));
  }
  return b;
}

std::vector<Matrix> UnrolledNet::zero_like() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const Matrix& p : params_) out.push_back(Matrix::Zero(p.rows(), p.cols()));
  return out;
}

Binder::Binder(ad::Tape& tape, const UnrolledNet& net, std::vector<Matrix>* grads)
    : tape_(tape), net_(net), grads_(grads), bound_(net.params().size()) {
  if (grads_ && grads_->size() != net.params().size()) {
    throw DimensionError("gradient buffers", static_cast<long>(net.params().size()), static_cast<long>(grads_->size()));
  }
}

ad::Var Binder::operator()(int index) {
  ad::Var& v = bound_.at(static_cast<std::size_t>(index));
  if (!v.valid()) {
    Matrix* sink = grads_ ? &(*grads_)[static_cast<std::size_t>(index)] : nullptr;
    v = tape_.parameter(net_.params()[static_cast<std::size_t>(index)], sink);
  }
  return v;
}

ad::Var layer_output(Binder& net, int layer, ad::Var features, ad::Var shift) {
  const UnrolledNet& n = net.net();
  const auto& spec = n.spec();
  if (features.cols() != spec.input_features()) {
    throw DimensionError("input features", spec.input_features(), features.cols());
  }
  std::vector<std::vector<ad::Var>> taps(static_cast<std::size_t>(spec.sublayers));
  for (int l = 0; l < spec.sublayers; ++l) {
    for (int h = 0; h <= spec.hops; ++h) taps[static_cast<std::size_t>(l)].push_back(net(n.tap_index(layer, l, h)));
  }
  const ad::Var x = graph_block(features, shift, taps, spec.activation, spec.leaky_slope);
  return add_broadcast(matmul(x, net(n.head_weight_index(layer))), net(n.head_bias_index(layer)));
}

TapedInstance::TapedInstance(ad::Tape& tape, const ProblemInstance& instance) : z(instance) {
  shift = tape.constant(instance.gso());
  if (instance.family() == Family::miqp) {
    var_feature = tape.constant(instance.qp().q());
    con_feature = tape.constant(instance.qp().b());
  } else {
    con_feature = tape.constant(instance.network().rate_targets());
    mask = tape.constant(instance.network().mask());
  }
}

namespace {

void check_family(const UnrolledNet& net, const ProblemInstance& z) {
  if (net.spec().family != z.family()) {
    throw ConfigError("network configured for " + std::string(to_string(net.spec().family)) +
                      " applied to a " + std::string(to_string(z.family())) + " instance");
  }
}

ad::Var layer_features(ad::Var x, ad::Var lambda, const TapedInstance& zi) {
  if (zi.z.family() == Family::miqp) {
    return vstack(hstack(x, zi.var_feature), hstack(lambda, zi.con_feature));
  }
  const double scale = 1.0 / zi.z.network().p_max();
  return hstack(hstack(scale * x, lambda), zi.con_feature);
}

Vector gaussian(Eigen::Index n, double sigma, Rng& rng) {
  std::normal_distribution<double> g(0.0, sigma);
  Vector v(n);
  for (auto& e : v) e = g(rng);
  return v;
}

Vector initial_primal(const ProblemInstance& z, const ForwardContext& ctx) {
  if (ctx.initial_primal) {
    if (ctx.initial_primal->size() != z.n_vars()) {
      throw DimensionError("initial primal", z.n_vars(), ctx.initial_primal->size());
    }
    return *ctx.initial_primal;
  }
  if (ctx.mode == Mode::eval) {
    Rng rng(ctx.eval_seed);
    return draw_initial_primal(z, rng);
  }
  if (!ctx.rng) throw ContractError("training forward pass needs a random stream");
  return draw_initial_primal(z, *ctx.rng);
}

Vector initial_multiplier(const ProblemInstance& z, const MultiplierInit& init, const ForwardContext& ctx) {
  if (ctx.initial_multiplier) {
    const Vector& l = *ctx.initial_multiplier;
    if (l.size() != z.n_cons()) throw DimensionError("initial multiplier", z.n_cons(), l.size());
    if ((l.array() < 0.0).any()) throw ContractError("multipliers must be nonnegative");
    return z.family() == Family::power ? Vector(l.cwiseProduct(z.network().mask())) : l;
  }
  if (ctx.mode == Mode::eval) {
    Rng rng(mix_seed(ctx.eval_seed, 1));
    return draw_initial_multipliers(z, init, rng);
  }
  if (!ctx.rng) throw ContractError("training forward pass needs a random stream");
  return draw_initial_multipliers(z, init, *ctx.rng);
}

std::vector<ad::Var> primal_pass(ad::Tape& tape, Binder& primal, ad::Var lambda, const TapedInstance& zi,
                                 const ForwardContext& ctx, bool noisy) {
  const UnrolledNet& net = primal.net();
  check_family(net, zi.z);
  const ProblemInstance& z = zi.z;
  std::vector<ad::Var> xs;
  xs.reserve(static_cast<std::size_t>(net.layers() + 1));
  xs.push_back(tape.constant(initial_primal(z, ctx)));
  const bool power = z.family() == Family::power;
  const double pmax = power ? z.network().p_max() : 1.0;
  for (int k = 0; k < net.layers(); ++k) {
    const ad::Var prev = xs.back();
    ad::Var out = layer_output(primal, k, layer_features(prev, lambda, zi), zi.shift);
    if (!power) out = rows(out, 0, z.n_vars());
    if (noisy) out = out + tape.constant(gaussian(z.n_vars(), net.noise().at(k + 1), *ctx.rng));
    if (power) {
      xs.push_back(pmax * sigmoid((1.0 / pmax) * prev + out));
    } else {
      xs.push_back(prev + out);
    }
  }
  return xs;
}

}  // namespace

std::vector<ad::Var> primal_forward(ad::Tape& tape, Binder& primal, ad::Var lambda, const TapedInstance& zi,
                                    const ForwardContext& ctx) {
  if (lambda.rows() != zi.z.n_cons()) throw DimensionError("lambda", zi.z.n_cons(), lambda.rows());
  return primal_pass(tape, primal, lambda, zi, ctx, ctx.mode == Mode::train);
}

TapedDualPass dual_forward(ad::Tape& tape, Binder& dual, Binder& primal, const TapedInstance& zi,
                           const ForwardContext& ctx) {
  const auto* dnet = dynamic_cast<const DualNet*>(&dual.net());
  if (!dnet) throw ContractError("dual binder must wrap a dual network");
  check_family(*dnet, zi.z);
  check_family(primal.net(), zi.z);
  const ProblemInstance& z = zi.z;
  const bool power = z.family() == Family::power;
  const bool noisy = ctx.mode == Mode::train;

  TapedDualPass pass;
  pass.multipliers.push_back(tape.constant(initial_multiplier(z, dnet->init(), ctx)));
  auto query = [&](ad::Var lambda) {
    pass.primals.push_back(primal_pass(tape, primal, lambda, zi, ctx, false).back());
  };
  query(pass.multipliers.back());
  for (int l = 0; l < dnet->layers(); ++l) {
    const ad::Var prev = pass.multipliers.back();
    ad::Var out = layer_output(dual, l, layer_features(pass.primals.back(), prev, zi), zi.shift);
    ++pass.primal_queries;
    if (!power) out = rows(out, z.n_vars(), z.n_cons());
    if (noisy) out = out + tape.constant(gaussian(z.n_cons(), dnet->noise().at(l + 1), *ctx.rng));
    if (power) out = hadamard(zi.mask, out);
    pass.multipliers.push_back(relu(prev + out));
    query(pass.multipliers.back());
  }
  return pass;
}

PrimalTrajectory primal_forward(const Vector& lambda, const ProblemInstance& z, const PrimalNet& net,
                                const ForwardContext& ctx) {
  if (lambda.size() != z.n_cons()) throw DimensionError("lambda", z.n_cons(), lambda.size());
  if ((lambda.array() < 0.0).any()) throw ContractError("multipliers must be nonnegative");
  ad::Tape tape;
  Binder binder(tape, net);
  const TapedInstance zi(tape, z);
  const auto xs = primal_forward(tape, binder, tape.constant(lambda), zi, ctx);
  std::vector<Vector> iterates;
  iterates.reserve(xs.size());
  for (const ad::Var& x : xs) iterates.emplace_back(x.value());
  return make_primal_trajectory(lambda, std::move(iterates), z);
}

DualTrajectory dual_forward(const ProblemInstance& z, const DualNet& dual, const PrimalNet& primal,
                            const ForwardContext& ctx) {
  ad::Tape tape;
  Binder dbind(tape, dual);
  Binder pbind(tape, primal);
  const TapedInstance zi(tape, z);
  const TapedDualPass pass = dual_forward(tape, dbind, pbind, zi, ctx);
  std::vector<Vector> lambdas;
  std::vector<Vector> xs;
  for (const ad::Var& v : pass.multipliers) lambdas.emplace_back(v.value());
  for (const ad::Var& v : pass.primals) xs.emplace_back(v.value());
  return make_dual_trajectory(std::move(lambdas), std::move(xs), z, pass.primal_queries);
}

Vector recover_solution(const ProblemInstance& z, const DualNet& dual, const PrimalNet& primal, std::uint64_t eval_seed) {
  return dual_forward(z, dual, primal, ForwardContext::eval(eval_seed)).solution();
}

}  // namespace cdu
