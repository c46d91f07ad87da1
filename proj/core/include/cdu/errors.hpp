#pragma once

#include <stdexcept>
#include <string>

namespace cdu {

/// Array shapes disagree; `axis()` names the offending dimension.
class DimensionError : public std::invalid_argument {
public:
  DimensionError(std::string axis, long expected, long actual);
  const std::string& axis() const noexcept { return axis_; }

private:
  std::string axis_;
};

/// A precondition on values (not shapes) was violated, e.g. a negative multiplier.
class ContractError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Generator or solver parameters out of range.
class ParameterError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A reference solver failed to reach its tolerance or hit a singular system.
class OracleError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values appeared during training or evaluation.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration, preset, or file.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace cdu
