#pragma once

// Experiment stages on disk: dataset generation, training, evaluation,
// sweeps and figures, each leaving a manifest next to its outputs.

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cdu/config.hpp"
#include "cdu/io.hpp"

namespace cdu {

namespace fs = std::filesystem;

/// Progress sink; null means silent.
using Log = std::function<void(const std::string&)>;

struct Datasets {
  std::vector<ProblemInstance> primal;
  std::vector<ProblemInstance> dual;
  std::vector<ProblemInstance> validation;
  std::vector<ProblemInstance> test;

  TrainingData training() const { return {primal, dual, validation}; }
};

inline const std::vector<std::string>& split_names() {
  static const std::vector<std::string> names{"primal", "dual", "validation", "test"};
  return names;
}

int split_size(const RunConfig& cfg, std::string_view split);

/// Writes <dir>/<split>.bin and <dir>/manifest.json.
void stage_generate(const RunConfig& cfg, const fs::path& dir, const Log& log = {});

/// Loads the splits from `dir` when its manifest matches the data settings
/// of `cfg` and the file digests agree; otherwise generates them there.
Datasets prepare_datasets(const RunConfig& cfg, const fs::path& dir, const Log& log = {});

struct TrainOptions {
  std::optional<fs::path> resume;  // checkpoint to continue from
  bool reuse = false;              // skip when <dir> already holds a finished run of this config
};

/// Writes config.json, checkpoint.bin (after every iteration), history.jsonl
/// and manifest.json into `dir`. Returns the final state.
TrainState stage_train(const RunConfig& cfg, const fs::path& data_dir, const fs::path& dir,
                       const TrainOptions& options = {}, const Log& log = {});

/// The gated nets when a gate fired, else the last ones.
std::pair<PrimalNet, DualNet> selected_nets(const TrainState& state);

/// Supervised baseline on the primal split; labels are the references
/// (the state-augmented solution with `sa_primal` for networks).
NaiveGnn stage_train_naive(const RunConfig& cfg, const fs::path& data_dir, const fs::path& dir,
                           const PrimalNet* sa_primal, const Log& log = {});

/// Paths of trained artifacts for evaluation.
struct ModelPaths {
  std::optional<fs::path> checkpoint;  // constrained run
  std::optional<fs::path> ablation;    // unconstrained run
  std::optional<fs::path> naive;
  std::optional<fs::path> reference;   // primal net for network references; defaults to `checkpoint`
  bool last = false;                   // final nets instead of the gated ones
};

/// Owns the loaded models behind a ModelSet.
struct LoadedModels {
  std::optional<PrimalNet> primal, ablation_primal, reference_primal;
  std::optional<DualNet> dual, ablation_dual;
  std::optional<NaiveGnn> naive;
  std::vector<std::string> manifests;  // manifests of the loaded artifacts

  ModelSet set() const;
  const PrimalNet* reference() const;
};

LoadedModels load_models(const ModelPaths& paths);

MethodSettings method_settings(const RunConfig& cfg);
ReferenceOptions reference_options(const RunConfig& cfg);

/// Evaluates each method on the test split and writes
/// <dir>/<method>/{instances.csv, layers.csv, summary.json}, plus
/// <dir>/layers.csv, <dir>/trajectories.csv and <dir>/manifest.json.
/// `split` selects the evaluated dataset (test by default).
std::vector<EvalReport> stage_eval(const RunConfig& cfg, const std::vector<Method>& methods, const fs::path& data_dir,
                                   const ModelPaths& paths, const fs::path& dir, const Log& log = {},
                                   std::string_view split = "test");

/// Writes <dir>/sweep.csv and <dir>/manifest.json.
std::vector<SweepRow> stage_sweep(const RunConfig& cfg, const ModelPaths& paths, const fs::path& dir,
                                  const Log& log = {});

/// Renders <table> as <out>; an empty table is a ConfigError.
void stage_plot(Figure figure, const fs::path& table, const fs::path& out);

/// Long format: method, instance, metric, layer (-1 for final values), value, seed.
Table instances_table(const EvalReport& report, std::uint64_t seed = 0);
std::string summary_json(const EvalReport& report, const std::string& config_hash);

struct ReproduceOptions {
  Family family = Family::miqp;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  fs::path out;
  bool naive = true;
  bool sweep = true;
  /// Preset overrides; empty means the desk presets of the family.
  std::string constrained_preset;
  std::string unconstrained_preset;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::map<Method, EvalAggregate> test;  // every method on the test split
  EvalAggregate validation;              // constrained model on the validation split
};

/// Desk pipeline per seed: data, constrained and unconstrained training,
/// supervised baseline, evaluation, sweep and figures. Finished stages are
/// reused. Writes <out>/summary.csv.
std::vector<SeedOutcome> reproduce(const ReproduceOptions& options, const Log& log = {});

}  // namespace cdu
