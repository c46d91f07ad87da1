#pragma once

// Interference networks of transmitter/receiver pairs and the sum-rate
// problem with per-user minimum-rate constraints, stored in minimization form.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "cdu/types.hpp"

namespace cdu {

enum class RateBase { two, e };

struct RadioParams {
  double p_max_w = 1e-3;                 // 0 dBm
  double bandwidth_hz = 20e6;            // 20 MHz
  double noise_psd_w_per_hz = 3.981071705534973e-21;  // -174 dBm/Hz
  double r_min = 1.5;
  RateBase base = RateBase::two;

  double noise_power_w() const { return bandwidth_hz * noise_psd_w_per_hz; }
  bool operator==(const RadioParams&) const = default;
};

/// Dual-slope path loss: G0 d^-a1 up to the breakpoint, G0 d_bp^(a2-a1) d^-a2
/// beyond it. G0 is chosen so that a link of `reference_distance_m` reaches
/// `reference_snr_db` at P_max.
struct PathLossModel {
  double alpha_near = 2.0;
  double alpha_far = 4.0;
  double breakpoint_m = 100.0;
  double reference_distance_m = 40.0;
  double reference_snr_db = 30.0;

  /// Distance-dependent part without G0; distances below 1 m are clamped.
  double attenuation(double distance_m) const;
  bool operator==(const PathLossModel&) const = default;
};

struct NetworkGeometry {
  double area_side_m = 1500.0;
  double min_link_m = 20.0;
  double max_link_m = 60.0;
  double shadowing_db = 7.0;
  PathLossModel path_loss;
  bool operator==(const NetworkGeometry&) const = default;
};

struct NodePositions {
  Matrix tx;  // n x 2, meters
  Matrix rx;  // n x 2, meters
};

/// Channel state H (amplitudes, h_ij from transmitter i to receiver j) with
/// the constrained-user mask. Immutable; caches SNR-normalized power gains.
class NetworkInstance {
public:
  NetworkInstance(Matrix H, Vector mask, RadioParams radio, std::optional<NodePositions> positions = std::nullopt);

  int n() const noexcept { return static_cast<int>(H_.rows()); }
  const Matrix& H() const noexcept { return H_; }
  const Vector& mask() const noexcept { return mask_; }
  const std::vector<int>& constrained() const noexcept { return constrained_; }
  const RadioParams& radio() const noexcept { return radio_; }
  double r_min() const noexcept { return radio_.r_min; }
  double p_max() const noexcept { return radio_.p_max_w; }
  const std::optional<NodePositions>& positions() const noexcept { return positions_; }

  /// |h_ij|^2 P_max / (W N0): gains in units of SNR at full power.
  const Matrix& snr_gains() const noexcept { return snr_gains_; }
  /// snr_gains with a zeroed diagonal.
  const Matrix& snr_cross_gains() const noexcept { return snr_cross_; }
  /// r_min on constrained users, 0 elsewhere.
  Vector rate_targets() const { return radio_.r_min * mask_; }
  double log_scale() const noexcept { return radio_.base == RateBase::two ? 1.0 / std::log(2.0) : 1.0; }
  /// H / ||H||_2, used as the graph shift operator.
  Matrix gso() const;

private:
  Matrix H_;
  Vector mask_;
  RadioParams radio_;
  std::optional<NodePositions> positions_;
  std::vector<int> constrained_;
  Matrix snr_gains_;
  Matrix snr_cross_;
};

/// r_i = log(1 + |h_ii|^2 p_i / (W N0 + sum_{j != i} |h_ji|^2 p_j)).
/// Throws ContractError on negative power.
Vector rates(const Vector& p, const NetworkInstance& net);

/// -1'r + sum_{i in I} lambda_i (r_min - r_i) - sum_{i not in I} lambda_i r_i.
double power_lagrangian(const Vector& p, const Vector& lambda, const NetworkInstance& net);

/// Gradient of power_lagrangian with respect to p (per watt).
Vector power_lagrangian_gradient(const Vector& p, const Vector& lambda, const NetworkInstance& net);

/// Transmitters uniform over the square area, each receiver at a uniform
/// distance in [min_link, max_link] and uniform angle from its transmitter,
/// i.i.d. log-normal shadowing on every link, round(fraction * n) users
/// constrained. All random draws are independent of the geometry scale.
NetworkInstance generate_network(int n, double constrained_fraction, std::uint64_t seed,
                                 const NetworkGeometry& geometry = {}, const RadioParams& radio = {});

/// P_max on every user.
Vector full_power(const NetworkInstance& net);

}  // namespace cdu
