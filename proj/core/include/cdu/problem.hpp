#pragma once

// Family-agnostic view of a constrained problem
//   min f0(x; z)  s.t.  f(x; z) <= 0
// with Lagrangian L = f0 + lambda' f. The power family is stored pre-negated
// (objective = -sum rate), so every consumer sees a minimization.

#include <memory>
#include <variant>

#include "cdu/autodiff.hpp"
#include "cdu/miqp.hpp"
#include "cdu/power.hpp"
#include "cdu/types.hpp"

namespace cdu {

struct ViolationSummary {
  double mean = 0.0;
  double max = 0.0;
};

/// One realization z of a problem family. Cheap to copy; the payload is
/// shared and immutable.
class ProblemInstance {
public:
  explicit ProblemInstance(RelaxedQp qp);
  explicit ProblemInstance(NetworkInstance net);

  Family family() const noexcept;
  int n_vars() const noexcept { return n_vars_; }
  int n_cons() const noexcept { return n_cons_; }

  const RelaxedQp& qp() const;
  const NetworkInstance& network() const;
  /// Graph shift operator used by the graph networks (cached).
  const Matrix& gso() const noexcept { return *gso_; }

private:
  std::variant<std::shared_ptr<const RelaxedQp>, std::shared_ptr<const NetworkInstance>> payload_;
  std::shared_ptr<const Matrix> gso_;
  int n_vars_ = 0;
  int n_cons_ = 0;
};

double objective(const Vector& x, const ProblemInstance& z);
Vector constraints(const Vector& x, const ProblemInstance& z);
/// Throws ContractError when any multiplier is negative.
double lagrangian(const Vector& x, const Vector& lambda, const ProblemInstance& z);
Vector lagrangian_gradient(const Vector& x, const Vector& lambda, const ProblemInstance& z);
/// max(0, f_i) elementwise.
Vector violation(const Vector& x, const ProblemInstance& z);
ViolationSummary summarize(const Vector& violations);
/// lambda' max(0, f(x)).
double complementary_slackness(const Vector& lambda, const Vector& x, const ProblemInstance& z);

/// Same quantities recorded on an autodiff tape. Multipliers may be either
/// constants or tracked nodes.
namespace taped {
ad::Var constraints(ad::Var x, const ProblemInstance& z);
ad::Var lagrangian(ad::Var x, ad::Var lambda, const ProblemInstance& z);
ad::Var lagrangian_gradient(ad::Var x, ad::Var lambda, const ProblemInstance& z);
}  // namespace taped

}  // namespace cdu
