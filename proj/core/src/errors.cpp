#include "cdu/errors.hpp"

namespace cdu {

DimensionError::DimensionError(std::string axis, long expected, long actual)
    : std::invalid_argument("dimension mismatch on " + axis + ": expected " + std::to_string(expected) + ", got " +
                            std::to_string(actual)),
      axis_(std::move(axis)) {}

}  // namespace cdu
