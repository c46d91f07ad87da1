#pragma once

#include <vector>

#include "cdu/types.hpp"

namespace cdu {

/// Adam over a list of parameter tensors. Moment buffers are created lazily
/// on the first step and are part of the resumable training state.
class Adam {
public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<Matrix>& params, const std::vector<Matrix>& grads);

  double lr() const noexcept { return lr_; }
  void set_lr(double lr) noexcept { lr_ = lr; }
  long steps() const noexcept { return t_; }
  const std::vector<Matrix>& first_moment() const noexcept { return m_; }
  const std::vector<Matrix>& second_moment() const noexcept { return v_; }
  void restore(long steps, std::vector<Matrix> m, std::vector<Matrix> v);

private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

/// Scales all gradients jointly so their global norm is at most `max_norm`
/// (no-op for max_norm <= 0). Returns the norm before scaling.
double clip_global_norm(std::vector<Matrix>& grads, double max_norm);

}  // namespace cdu
