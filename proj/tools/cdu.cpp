// cdu: generate datasets, train, evaluate, sweep, plot and reproduce.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cdu/errors.hpp"
#include "cdu/pipeline.hpp"

namespace fs = std::filesystem;
using namespace cdu;

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

struct Common {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string family;
  std::vector<std::string> methods;
  bool dry_run = false;
};

struct Models {
  std::string checkpoint, ablation, naive, reference;
  bool last = false;

  ModelPaths paths() const {
    ModelPaths p;
    if (!checkpoint.empty()) p.checkpoint = checkpoint;
    if (!ablation.empty()) p.ablation = ablation;
    if (!naive.empty()) p.naive = naive;
    if (!reference.empty()) p.reference = reference;
    p.last = last;
    return p;
  }
};

void add_common(CLI::App* app, Common& c, bool with_method = true) {
  app->add_option("--config", c.config, "JSON run config (overrides the preset it names)");
  app->add_option("--preset", c.preset, "named preset")->check(CLI::IsMember(preset_names()));
  app->add_option("--seed", c.seed, "root seed");
  app->add_option("--out", c.out, "output directory (default $CDU_OUT_ROOT or ./runs)");
  app->add_option("--family", c.family, "problem family")->check(CLI::IsMember({"miqp", "power"}));
  if (with_method) {
    app->add_option("--method", c.methods, "method(s)")
        ->check(CLI::IsMember({"cdu", "unconstrained", "da", "sa", "naive", "fullpower"}));
  }
  app->add_flag("--dry-run", c.dry_run, "validate the config and print it without computing");
}

fs::path out_root(const Common& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("CDU_OUT_ROOT"); env && *env) return env;
  return "runs";
}

Method primary_method(const Common& c) {
  return c.methods.empty() ? Method::cdu : method_from_string(c.methods.front());
}

RunConfig resolve(const Common& c) {
  RunConfig cfg;
  if (!c.config.empty()) {
    cfg = load_config(c.config);
    if (!c.preset.empty() && c.preset != cfg.preset) throw ConfigError("--preset contradicts the config file");
  } else {
    std::string name = c.preset;
    if (name.empty()) {
      const std::string fam = c.family.empty() ? "miqp" : c.family;
      name = fam + (primary_method(c) == Method::unconstrained ? "-desk-unconstrained" : "-desk-constrained");
    }
    cfg = preset(name);
  }
  if (!c.family.empty() && family_from_string(c.family) != cfg.family) {
    throw ConfigError("--family " + c.family + " contradicts preset " + cfg.preset);
  }
  if (c.seed) cfg.seed = *c.seed;
  if (!c.methods.empty()) {
    cfg.method = primary_method(c);
    if (cfg.method == Method::unconstrained) cfg.train.constrained = false;
    if (cfg.method == Method::cdu) cfg.train.constrained = true;
  }
  cfg.finalize();
  cfg.validate();
  return cfg;
}

std::vector<Method> methods_of(const Common& c, const RunConfig& cfg) {
  if (c.methods.empty()) return {cfg.method};
  std::vector<Method> out;
  for (const std::string& m : c.methods) out.push_back(method_from_string(m));
  return out;
}

Log stderr_log() {
  return [](const std::string& msg) { std::cerr << msg << '\n'; };
}

bool dry(const Common& c, const RunConfig& cfg, const std::string& plan) {
  if (!c.dry_run) return false;
  std::cout << to_json_text(cfg) << '\n';
  std::cerr << "config hash " << config_hash(cfg) << '\n' << plan << '\n';
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained dual unrolling: learned primal-dual solvers for constrained optimization"};
  app.require_subcommand(1);
  app.set_version_flag("--version", code_version());

  Common gen_c;
  auto* gen = app.add_subcommand("generate", "generate the dataset splits");
  add_common(gen, gen_c, false);

  Common train_c;
  std::string train_data, resume, train_reference;
  auto* train = app.add_subcommand("train", "train the unrolled nets (or the supervised baseline with --method naive)");
  add_common(train, train_c);
  train->add_option("--data", train_data, "dataset directory (default <out>/data)");
  train->add_option("--resume", resume, "checkpoint to continue from");
  train->add_option("--reference", train_reference, "trained checkpoint whose primal net labels network data");

  Common eval_c;
  Models eval_m;
  std::string eval_data, eval_split = "test";
  auto* eval = app.add_subcommand("eval", "evaluate methods on a dataset split");
  add_common(eval, eval_c);
  eval->add_option("--data", eval_data, "dataset directory (default <out>/data)");
  eval->add_option("--split", eval_split, "dataset split")->check(CLI::IsMember(split_names()));
  eval->add_option("--checkpoint", eval_m.checkpoint, "constrained training checkpoint");
  eval->add_option("--ablation", eval_m.ablation, "unconstrained training checkpoint");
  eval->add_option("--naive", eval_m.naive, "supervised baseline model");
  eval->add_option("--reference", eval_m.reference, "checkpoint whose primal net defines network references");
  eval->add_flag("--last", eval_m.last, "use the final nets instead of the validation-gated ones");

  Common sweep_c;
  Models sweep_m;
  auto* sweep = app.add_subcommand("sweep", "out-of-distribution sweep");
  add_common(sweep, sweep_c);
  sweep->add_option("--checkpoint", sweep_m.checkpoint, "constrained training checkpoint");
  sweep->add_option("--ablation", sweep_m.ablation, "unconstrained training checkpoint");
  sweep->add_option("--naive", sweep_m.naive, "supervised baseline model");
  sweep->add_option("--reference", sweep_m.reference, "checkpoint whose primal net defines network references");
  sweep->add_flag("--last", sweep_m.last, "use the final nets instead of the validation-gated ones");

  std::string plot_table, plot_figure, plot_file;
  auto* plot = app.add_subcommand("plot", "render a figure from a table");
  plot->add_option("--table", plot_table, "CSV table")->required();
  plot->add_option("--figure", plot_figure, "figure id")
      ->required()
      ->check(CLI::IsMember({"trajectories", "layers", "ood", "rate-histogram"}));
  plot->add_option("--file", plot_file, "output SVG (default next to the table)");

  Common rep_c;
  std::vector<std::uint64_t> rep_seeds{0, 1, 2};
  bool no_naive = false, no_sweep = false;
  auto* rep = app.add_subcommand("reproduce", "desk-scale pipeline end to end for every seed");
  add_common(rep, rep_c, false);
  rep->add_option("--seeds", rep_seeds, "seeds");
  rep->add_flag("--no-naive", no_naive, "skip the supervised baseline");
  rep->add_flag("--no-sweep", no_sweep, "skip the out-of-distribution sweep");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (gen->parsed()) {
      const RunConfig cfg = resolve(gen_c);
      const fs::path dir = out_root(gen_c) / "data";
      if (dry(gen_c, cfg, "would write splits to " + dir.string())) return 0;
      stage_generate(cfg, dir, stderr_log());
    } else if (train->parsed()) {
      const RunConfig cfg = resolve(train_c);
      const fs::path root = out_root(train_c);
      const fs::path data = train_data.empty() ? root / "data" : fs::path(train_data);
      const bool naive = cfg.method == Method::naive;
      const fs::path dir = root / (naive ? "naive" : cfg.train.constrained ? "constrained" : "unconstrained");
      if (dry(train_c, cfg, "would train into " + dir.string() + " from " + data.string())) return 0;
      if (naive) {
        if (!resume.empty()) throw ConfigError("--resume does not apply to the supervised baseline");
        std::optional<PrimalNet> ref;
        if (!train_reference.empty()) ref = selected_nets(load_checkpoint(train_reference).state).first;
        if (cfg.family == Family::power && !ref) throw ConfigError("network labels need --reference CHECKPOINT");
        stage_train_naive(cfg, data, dir, ref ? &*ref : nullptr, stderr_log());
      } else {
        TrainOptions opts;
        if (!resume.empty()) opts.resume = resume;
        const TrainState s = stage_train(cfg, data, dir, opts, stderr_log());
        std::cout << (dir / "checkpoint.bin").string() << " iteration " << s.iteration << " best validation "
                  << s.best_validation << '\n';
      }
    } else if (eval->parsed()) {
      const RunConfig cfg = resolve(eval_c);
      const fs::path root = out_root(eval_c);
      const fs::path data = eval_data.empty() ? root / "data" : fs::path(eval_data);
      const fs::path dir = root / "eval";
      const std::vector<Method> methods = methods_of(eval_c, cfg);
      if (dry(eval_c, cfg, "would evaluate into " + dir.string())) return 0;
      const auto reports = stage_eval(cfg, methods, data, eval_m.paths(), dir, stderr_log(), eval_split);
      for (const EvalReport& r : reports) std::cout << summary_json(r, config_hash(cfg));
    } else if (sweep->parsed()) {
      RunConfig cfg = resolve(sweep_c);
      if (!sweep_c.methods.empty()) cfg.sweep.methods = methods_of(sweep_c, cfg);
      const fs::path dir = out_root(sweep_c) / "sweep";
      if (dry(sweep_c, cfg, "would sweep into " + dir.string())) return 0;
      const auto rows = stage_sweep(cfg, sweep_m.paths(), dir, stderr_log());
      std::cout << (dir / "sweep.csv").string() << " rows " << rows.size() << '\n';
    } else if (plot->parsed()) {
      const fs::path table(plot_table);
      const fs::path file = plot_file.empty() ? table.parent_path() / (plot_figure + ".svg") : fs::path(plot_file);
      stage_plot(figure_from_string(plot_figure), table, file);
      std::cout << file.string() << '\n';
    } else if (rep->parsed()) {
      ReproduceOptions opts;
      opts.out = out_root(rep_c);
      opts.seeds = rep_seeds;
      opts.naive = !no_naive;
      opts.sweep = !no_sweep;
      const std::vector<Family> families =
          rep_c.family.empty() ? std::vector<Family>{Family::miqp, Family::power}
                               : std::vector<Family>{family_from_string(rep_c.family)};
      if (!rep_c.config.empty() || rep_c.seed) throw ConfigError("reproduce takes --seeds and --preset only");
      for (Family f : families) {
        opts.family = f;
        if (!rep_c.preset.empty()) {
          const RunConfig p = preset(rep_c.preset);
          if (p.family != f) continue;
          opts.constrained_preset = rep_c.preset;
        }
        if (rep_c.dry_run) {
          std::cerr << "would reproduce " << to_string(f) << " into " << opts.out.string() << '\n';
          continue;
        }
        reproduce(opts, stderr_log());
        std::cout << (opts.out / std::string(to_string(f)) / "summary.csv").string() << '\n';
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ParameterError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const OracleError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
