#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>

namespace cdu {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Family { miqp, power };

std::string_view to_string(Family family);
Family family_from_string(std::string_view name);

}  // namespace cdu
