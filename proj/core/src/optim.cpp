#include "cdu/optim.hpp"

#include <cmath>

#include "cdu/errors.hpp"

namespace cdu {

void Adam::step(std::vector<Matrix>& params, const std::vector<Matrix>& grads) {
  if (grads.size() != params.size()) {
    throw DimensionError("gradient tensors", static_cast<long>(params.size()), static_cast<long>(grads.size()));
  }
  if (m_.empty()) {
    for (const Matrix& p : params) {
      m_.push_back(Matrix::Zero(p.rows(), p.cols()));
      v_.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseProduct(grads[i]);
    params[i].array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

void Adam::restore(long steps, std::vector<Matrix> m, std::vector<Matrix> v) {
  if (m.size() != v.size()) throw DimensionError("optimizer moments", static_cast<long>(m.size()), static_cast<long>(v.size()));
  t_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

double clip_global_norm(std::vector<Matrix>& grads, double max_norm) {
  double sq = 0.0;
  for (const Matrix& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    for (Matrix& g : grads) g *= max_norm / norm;
  }
  return norm;
}

}  // namespace cdu
