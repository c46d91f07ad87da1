#include "cdu/power.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cdu/errors.hpp"

namespace cdu {

double PathLossModel::attenuation(double distance_m) const {
  const double d = std::max(distance_m, 1.0);
  if (d <= breakpoint_m) return std::pow(d, -alpha_near);
  return std::pow(breakpoint_m, alpha_far - alpha_near) * std::pow(d, -alpha_far);
}

NetworkInstance::NetworkInstance(Matrix H, Vector mask, RadioParams radio, std::optional<NodePositions> positions)
    : H_(std::move(H)), mask_(std::move(mask)), radio_(radio), positions_(std::move(positions)) {
  const int nv = n();
  if (nv < 1) throw ParameterError("network needs at least one pair");
  if (H_.cols() != nv) throw DimensionError("H cols", nv, H_.cols());
  if (mask_.size() != nv) throw DimensionError("mask", nv, mask_.size());
  if (!(H_.array() >= 0.0).all()) throw ParameterError("channel gains must be nonnegative");
  if (!(H_.diagonal().array() > 0.0).all()) throw ParameterError("direct-link gains must be positive");
  if (!(radio_.r_min > 0.0)) throw ParameterError("r_min must be positive");
  if (!(radio_.p_max_w > 0.0)) throw ParameterError("P_max must be positive");
  if (!(radio_.noise_power_w() > 0.0)) throw ParameterError("noise power must be positive");
  for (int i = 0; i < nv; ++i) {
    if (mask_(i) != 0.0 && mask_(i) != 1.0) throw ParameterError("mask entries must be 0 or 1");
    if (mask_(i) == 1.0) constrained_.push_back(i);
  }
  if (positions_) {
    if (positions_->tx.rows() != nv || positions_->tx.cols() != 2) throw DimensionError("tx positions", nv, positions_->tx.rows());
    if (positions_->rx.rows() != nv || positions_->rx.cols() != 2) throw DimensionError("rx positions", nv, positions_->rx.rows());
  }
  snr_gains_ = H_.array().square().matrix() * (radio_.p_max_w / radio_.noise_power_w());
  snr_cross_ = snr_gains_;
  snr_cross_.diagonal().setZero();
}

Matrix NetworkInstance::gso() const {
  Eigen::JacobiSVD<Matrix> svd(H_);
  return H_ / svd.singularValues()(0);
}

namespace {

struct RateTerms {
  Vector interference;  // 1 + sum_{j != i} g_ji u_j
  Vector total;         // interference + g_ii u_i
};

RateTerms rate_terms(const Vector& p, const NetworkInstance& net) {
  if (p.size() != net.n()) throw DimensionError("power vector", net.n(), p.size());
  if ((p.array() < 0.0).any()) throw ContractError("transmit power must be nonnegative");
  const Vector u = p / net.p_max();
  RateTerms t;
  t.interference = (net.snr_cross_gains().transpose() * u).array() + 1.0;
  t.total = t.interference + net.snr_gains().diagonal().cwiseProduct(u);
  return t;
}

}  // namespace

Vector rates(const Vector& p, const NetworkInstance& net) {
  const RateTerms t = rate_terms(p, net);
  return net.log_scale() * (t.total.array().log() - t.interference.array().log()).matrix();
}

double power_lagrangian(const Vector& p, const Vector& lambda, const NetworkInstance& net) {
  if (lambda.size() != net.n()) throw DimensionError("lambda", net.n(), lambda.size());
  if ((lambda.array() < 0.0).any()) throw ContractError("multipliers must be nonnegative");
  const Vector r = rates(p, net);
  return -r.sum() + lambda.dot(net.rate_targets() - r);
}

Vector power_lagrangian_gradient(const Vector& p, const Vector& lambda, const NetworkInstance& net) {
  if (lambda.size() != net.n()) throw DimensionError("lambda", net.n(), lambda.size());
  const RateTerms t = rate_terms(p, net);
  const Vector w = lambda.array() + 1.0;
  const Vector grad_u = -net.log_scale() * (net.snr_gains() * w.cwiseQuotient(t.total) -
                                            net.snr_cross_gains() * w.cwiseQuotient(t.interference));
  return grad_u / net.p_max();
}

NetworkInstance generate_network(int n, double constrained_fraction, std::uint64_t seed,
                                 const NetworkGeometry& geometry, const RadioParams& radio) {
  if (n < 1) throw ParameterError("n must be >= 1");
  if (constrained_fraction < 0.0 || constrained_fraction > 1.0) {
    throw ParameterError("constrained fraction must lie in [0, 1]");
  }
  if (geometry.max_link_m < geometry.min_link_m || geometry.min_link_m < 0.0) {
    throw ParameterError("link distance range is invalid");
  }

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x9fu};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr double kTwoPi = 6.283185307179586;

  NodePositions pos{Matrix(n, 2), Matrix(n, 2)};
  for (int i = 0; i < n; ++i) {
    const double x = unit(rng);
    const double y = unit(rng);
    const double dist = unit(rng);
    const double angle = unit(rng) * kTwoPi;
    pos.tx(i, 0) = x * geometry.area_side_m;
    pos.tx(i, 1) = y * geometry.area_side_m;
    const double d = geometry.min_link_m + dist * (geometry.max_link_m - geometry.min_link_m);
    pos.rx(i, 0) = pos.tx(i, 0) + d * std::cos(angle);
    pos.rx(i, 1) = pos.tx(i, 1) + d * std::sin(angle);
  }

  const PathLossModel& pl = geometry.path_loss;
  const double g0 = std::pow(10.0, pl.reference_snr_db / 10.0) * radio.noise_power_w() /
                    (radio.p_max_w * pl.attenuation(pl.reference_distance_m));
  Matrix H(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double d = (pos.tx.row(i) - pos.rx.row(j)).norm();
      const double shadow_db = geometry.shadowing_db * normal(rng);
      const double gain = g0 * pl.attenuation(d) * std::pow(10.0, shadow_db / 10.0);
      H(i, j) = std::sqrt(gain);
    }
  }

  const int n_constrained = static_cast<int>(std::lround(constrained_fraction * n));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  Vector mask = Vector::Zero(n);
  for (int i = 0; i < n_constrained; ++i) mask(order[i]) = 1.0;

  return NetworkInstance(std::move(H), std::move(mask), radio, std::move(pos));
}

Vector full_power(const NetworkInstance& net) { return Vector::Constant(net.n(), net.p_max()); }

}  // namespace cdu
