#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace cdu {

using Rng = std::mt19937_64;

/// Splits one root seed into independent, named sub-streams
/// ("data", "init", "noise", "sampling", ...). The same (root, name, index)
/// triple always yields the same stream.
class RngStreams {
public:
  explicit RngStreams(std::uint64_t root) : root_(root) {}

  std::uint64_t root() const noexcept { return root_; }
  std::uint64_t seed_for(std::string_view name, std::uint64_t index = 0) const;
  Rng stream(std::string_view name, std::uint64_t index = 0) const;

private:
  std::uint64_t root_;
};

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

std::string serialize_rng(const Rng& rng);
Rng deserialize_rng(const std::string& state);

}  // namespace cdu
