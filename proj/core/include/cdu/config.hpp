#pragma once

// Run configuration: one structured document that fully determines a run,
// with named presets and a JSON representation.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cdu/baselines.hpp"
#include "cdu/evaluation.hpp"
#include "cdu/training.hpp"

namespace cdu {

struct DataConfig {
  int primal_train = 400;
  int dual_train = 800;
  int validation = 200;
  int test = 400;
  MiqpShape miqp{80, 45, 10};
  PowerShape power;
  bool operator==(const DataConfig&) const = default;
};

struct EvalConfig {
  DaConfig da;                                // classical dual ascent baseline
  DaConfig sa = state_augmented_defaults();   // state-augmented baseline and network references
  bool operator==(const EvalConfig& o) const;
};

struct NaiveConfig {
  NaiveGnnSpec spec;
  SupervisedConfig train;
  bool operator==(const NaiveConfig& o) const;
};

struct RunConfig {
  std::string preset;
  Family family = Family::miqp;
  Method method = Method::cdu;
  std::uint64_t seed = 0;
  DataConfig data;
  TrainConfig train;
  EvalConfig eval;
  NaiveConfig naive;
  OodSpec sweep;

  /// Derives the per-component seeds and families from the root seed and
  /// family: data, train, eval and naive streams.
  void finalize();
  void validate() const;
  std::uint64_t data_seed() const;
  bool operator==(const RunConfig&) const = default;
};

/// Names of the built-in presets.
std::vector<std::string> preset_names();
/// Finalized preset; throws ConfigError for an unknown name.
RunConfig preset(std::string_view name);

/// JSON text with sorted keys; derived seeds are omitted.
std::string to_json_text(const RunConfig& cfg, int indent = 2);
/// Reads a config, starting from the named preset ("preset" key, default
/// by family) and overriding the keys present. Unknown keys are errors.
RunConfig config_from_json_text(std::string_view text);

RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& cfg);

/// SHA-256 of the canonical JSON text; stable under key reordering.
std::string config_hash(const RunConfig& cfg);

}  // namespace cdu
