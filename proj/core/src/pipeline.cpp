#include "cdu/pipeline.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "cdu/errors.hpp"

namespace cdu {

using json = nlohmann::json;

namespace {

std::string manifest_path(const fs::path& dir) { return (dir / "manifest.json").string(); }

RunManifest new_manifest(const std::string& kind, const RunConfig& cfg) {
  RunManifest m;
  m.kind = kind;
  m.config_json = to_json_text(cfg, -1);
  m.config_hash = config_hash(cfg);
  m.seeds = {{"root", cfg.seed}, {"data", cfg.data_seed()}};
  m.code_version = code_version();
  m.started = timestamp_now();
  return m;
}

void finish_manifest(RunManifest& m, const fs::path& dir) {
  m.finished = timestamp_now();
  save_manifest(manifest_path(dir), m);
}

void note(const Log& log, const std::string& msg) {
  if (log) log(msg);
}

void add_parent(RunManifest& m, const fs::path& dir) {
  const std::string p = manifest_path(dir);
  if (fs::exists(p)) m.parents.push_back(p);
}

double json_safe(double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::quiet_NaN(); }

json layers_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(json_safe(x));
  return out;
}

}  // namespace

int split_size(const RunConfig& cfg, std::string_view split) {
  if (split == "primal") return cfg.data.primal_train;
  if (split == "dual") return cfg.data.dual_train;
  if (split == "validation") return cfg.data.validation;
  if (split == "test") return cfg.data.test;
  throw ConfigError("unknown dataset split '" + std::string(split) + "'");
}

void stage_generate(const RunConfig& cfg, const fs::path& dir, const Log& log) {
  cfg.validate();
  RunManifest m = new_manifest("generate", cfg);
  for (const std::string& split : split_names()) {
    const fs::path file = dir / (split + ".bin");
    save_dataset(file.string(), generate_split(cfg, split, split_size(cfg, split)));
    m.outputs.push_back(artifact(file.string()));
    note(log, "wrote " + file.string());
  }
  finish_manifest(m, dir);
}

namespace {

bool datasets_match(const RunConfig& cfg, const fs::path& dir) {
  const std::string path = manifest_path(dir);
  if (!fs::exists(path)) return false;
  const RunManifest m = load_manifest(path);
  if (m.kind != "generate") return false;
  const RunConfig made = config_from_json_text(m.config_json);
  if (made.family != cfg.family || !(made.data == cfg.data) || made.data_seed() != cfg.data_seed()) return false;
  for (const ArtifactRef& ref : m.outputs) {
    if (!fs::exists(ref.path) || sha256_file(ref.path) != ref.sha256) return false;
  }
  return m.outputs.size() == split_names().size();
}

}  // namespace

Datasets prepare_datasets(const RunConfig& cfg, const fs::path& dir, const Log& log) {
  if (!datasets_match(cfg, dir)) stage_generate(cfg, dir, log);
  Datasets d;
  d.primal = load_dataset((dir / "primal.bin").string());
  d.dual = load_dataset((dir / "dual.bin").string());
  d.validation = load_dataset((dir / "validation.bin").string());
  d.test = load_dataset((dir / "test.bin").string());
  return d;
}

std::pair<PrimalNet, DualNet> selected_nets(const TrainState& state) {
  if (state.gated_primal && state.gated_dual) return {*state.gated_primal, *state.gated_dual};
  return {state.primal, state.dual};
}

namespace {

class DiskObserver : public TrainObserver {
public:
  DiskObserver(const RunConfig& cfg, const fs::path& dir, const Log& log) : cfg_(cfg), dir_(dir), log_(log) {}

  void on_epoch(const HistoryRecord& h, const TrainState&) override {
    append_history((dir_ / "history.jsonl").string(), h);
    if (h.phase == "dual" && std::isfinite(h.validation)) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "iter %d epoch %d loss %.5g validation %.5g%s", h.iteration, h.epoch, h.loss,
                    h.validation, h.saved ? " saved" : "");
      note(log_, buf);
    }
  }

  void on_iteration(const TrainState& s) override { save_checkpoint((dir_ / "checkpoint.bin").string(), cfg_, s); }

  void on_abort(const TrainState& s, const std::string& why) override {
    save_checkpoint((dir_ / "checkpoint.bin").string(), cfg_, s);
    note(log_, "aborted: " + why);
  }

private:
  const RunConfig& cfg_;
  fs::path dir_;
  Log log_;
};

RunConfig with_iterations(RunConfig c, int iterations) {
  c.train.iterations = iterations;
  return c;
}

}  // namespace

TrainState stage_train(const RunConfig& cfg, const fs::path& data_dir, const fs::path& dir,
                       const TrainOptions& options, const Log& log) {
  cfg.validate();
  const fs::path ckpt = dir / "checkpoint.bin";
  if (options.reuse && fs::exists(ckpt) && fs::exists(manifest_path(dir))) {
    const RunManifest m = load_manifest(manifest_path(dir));
    if (m.kind == "train" && m.config_hash == config_hash(cfg)) {
      Checkpoint done = load_checkpoint(ckpt.string());
      if (done.state.iteration >= cfg.train.iterations) {
        note(log, "reusing finished run in " + dir.string());
        return std::move(done.state);
      }
    }
  }

  const Datasets data = prepare_datasets(cfg, data_dir, log);
  fs::create_directories(dir);
  RunManifest m = new_manifest("train", cfg);
  m.seeds["train"] = cfg.train.seed;
  m.seeds["eval"] = cfg.train.eval_seed;
  add_parent(m, data_dir);
  for (const char* split : {"primal", "dual", "validation"}) {
    m.inputs.push_back(artifact((data_dir / (split + std::string(".bin"))).string()));
  }

  TrainState state = initial_train_state(cfg.train);
  if (options.resume) {
    Checkpoint from = load_checkpoint(options.resume->string());
    if (!(with_iterations(from.config, cfg.train.iterations) == cfg)) {
      throw ConfigError("checkpoint " + options.resume->string() + " was written by a different config");
    }
    state = std::move(from.state);
    m.inputs.push_back(artifact(options.resume->string()));
    note(log, "resuming at iteration " + std::to_string(state.iteration));
  }

  save_config((dir / "config.json").string(), cfg);
  std::string history;
  for (const HistoryRecord& h : state.history) history += history_line(h) + "\n";
  write_file((dir / "history.jsonl").string(), history);

  DiskObserver observer(cfg, dir, log);
  joint_train(state, cfg.train, data.training(), &observer);
  save_checkpoint(ckpt.string(), cfg, state);

  m.outputs = {artifact(ckpt.string()), artifact((dir / "history.jsonl").string()),
               artifact((dir / "config.json").string())};
  finish_manifest(m, dir);
  return state;
}

NaiveGnn stage_train_naive(const RunConfig& cfg, const fs::path& data_dir, const fs::path& dir,
                           const PrimalNet* sa_primal, const Log& log) {
  cfg.validate();
  const Datasets data = prepare_datasets(cfg, data_dir, log);
  RunManifest m = new_manifest("train-naive", cfg);
  m.seeds["naive"] = cfg.naive.train.seed;
  add_parent(m, data_dir);
  m.inputs.push_back(artifact((data_dir / "primal.bin").string()));

  note(log, "computing supervised labels");
  const std::vector<ReferenceSolution> refs = compute_references(data.primal, sa_primal, reference_options(cfg));
  std::vector<Vector> labels;
  for (const ReferenceSolution& r : refs) labels.push_back(r.x);
  std::vector<double> losses;
  NaiveGnn model = naive_gnn_train(cfg.naive.spec, data.primal, labels, cfg.naive.train, &losses);

  fs::create_directories(dir);
  const fs::path model_path = dir / "naive.bin";
  save_naive(model_path.string(), model);
  Table t{{"epoch", "loss"}, {}};
  for (std::size_t i = 0; i < losses.size(); ++i) t.rows.push_back({static_cast<double>(i + 1), losses[i]});
  save_table((dir / "losses.csv").string(), t);
  if (!losses.empty()) note(log, "final supervised loss " + std::to_string(losses.back()));
  m.outputs = {artifact(model_path.string()), artifact((dir / "losses.csv").string())};
  finish_manifest(m, dir);
  return model;
}

ModelSet LoadedModels::set() const {
  ModelSet s;
  if (primal) s.primal = &*primal;
  if (dual) s.dual = &*dual;
  if (ablation_primal) s.ablation_primal = &*ablation_primal;
  if (ablation_dual) s.ablation_dual = &*ablation_dual;
  if (naive) s.naive = &*naive;
  s.sa_primal = reference();
  return s;
}

const PrimalNet* LoadedModels::reference() const {
  if (reference_primal) return &*reference_primal;
  if (primal) return &*primal;
  return nullptr;
}

LoadedModels load_models(const ModelPaths& paths) {
  LoadedModels out;
  auto pick = [&](const fs::path& p) {
    TrainState s = load_checkpoint(p.string()).state;
    return paths.last ? std::pair<PrimalNet, DualNet>{s.primal, s.dual} : selected_nets(s);
  };
  auto note_manifest = [&](const fs::path& artifact_path) {
    const std::string p = manifest_path(artifact_path.parent_path());
    if (fs::exists(p)) out.manifests.push_back(p);
  };
  if (paths.checkpoint) {
    auto [p, d] = pick(*paths.checkpoint);
    out.primal = std::move(p);
    out.dual = std::move(d);
    note_manifest(*paths.checkpoint);
  }
  if (paths.ablation) {
    auto [p, d] = pick(*paths.ablation);
    out.ablation_primal = std::move(p);
    out.ablation_dual = std::move(d);
    note_manifest(*paths.ablation);
  }
  if (paths.naive) {
    out.naive = load_naive(paths.naive->string());
    note_manifest(*paths.naive);
  }
  if (paths.reference) {
    out.reference_primal = pick(*paths.reference).first;
    note_manifest(*paths.reference);
  }
  return out;
}

MethodSettings method_settings(const RunConfig& cfg) { return {cfg.eval.da, cfg.eval.sa, cfg.train.eval_seed}; }

ReferenceOptions reference_options(const RunConfig& cfg) {
  ReferenceOptions o;
  o.sa = cfg.eval.sa;
  return o;
}

Table instances_table(const EvalReport& report, std::uint64_t seed) {
  Table t{{"method", "instance", "metric", "layer", "value", "seed"}, {}};
  const std::string method(to_string(report.method));
  const double s = static_cast<double>(seed);
  for (const InstanceMetrics& r : report.rows) {
    const double id = r.instance;
    auto scalar = [&](const char* name, double v) { t.rows.push_back({method, id, std::string(name), -1.0, v, s}); };
    auto layers = [&](const char* name, const std::vector<double>& v) {
      for (std::size_t l = 0; l < v.size(); ++l) {
        t.rows.push_back({method, id, std::string(name), static_cast<double>(l), v[l], s});
      }
    };
    scalar("mse_x", r.mse_x);
    scalar("mse_lambda", r.mse_lambda);
    scalar("objective", r.objective);
    scalar("sum_rate", r.sum_rate);
    scalar("violation_mean", r.violation_mean);
    scalar("violation_max", r.violation_max);
    scalar("reference_objective", r.reference_objective);
    scalar("reference_kkt", r.reference_kkt);
    layers("mse_x", r.mse_x_layers);
    layers("mse_lambda", r.mse_lambda_layers);
    layers("objective", r.objective_layers);
    layers("violation", r.violation_layers);
    layers("slackness", r.slackness_layers);
    layers("constraint_norm", r.constraint_norm_layers);
    layers("descent_residual", r.descent_residual);
    layers("ascent_residual", r.ascent_residual);
  }
  return t;
}


std::string summary_json(const EvalReport& report, const std::string& hash) {
  const EvalAggregate a = report.aggregate();
  const json j = {{"method", to_string(report.method)},
                  {"family", to_string(report.family)},
                  {"config_hash", hash},
                  {"dataset_hash", report.dataset_hash},
                  {"reference_method", report.reference},
                  {"instances", a.instances},
                  {"mse_x", json_safe(a.mse_x)},
                  {"mse_lambda", json_safe(a.mse_lambda)},
                  {"objective", json_safe(a.objective)},
                  {"sum_rate", json_safe(a.sum_rate)},
                  {"violation_mean", json_safe(a.violation_mean)},
                  {"violation_max", json_safe(a.violation_max)},
                  {"reference_objective", json_safe(a.reference_objective)},
                  {"max_reference_kkt", json_safe(a.max_reference_kkt)},
                  {"descent_residual", json_safe(a.descent_residual)},
                  {"ascent_residual", json_safe(a.ascent_residual)},
                  {"slackness_decrease_fraction", json_safe(a.slackness_decrease_fraction)},
                  {"violation_layers", layers_json(a.violation_layers)},
                  {"slackness_layers", layers_json(a.slackness_layers)},
                  {"descent_residual_layers", layers_json(a.descent_residual_layers)},
                  {"ascent_residual_layers", layers_json(a.ascent_residual_layers)}};
  return j.dump(2) + "\n";
}

std::vector<EvalReport> stage_eval(const RunConfig& cfg, const std::vector<Method>& methods, const fs::path& data_dir,
                                   const ModelPaths& paths, const fs::path& dir, const Log& log, std::string_view split) {
  cfg.validate();
  if (methods.empty()) throw ConfigError("no methods to evaluate");
  split_size(cfg, split);
  Datasets data = prepare_datasets(cfg, data_dir, log);
  if (split == "primal") data.test = data.primal;
  if (split == "dual") data.test = data.dual;
  if (split == "validation") data.test = data.validation;
  const fs::path test_path = data_dir / (std::string(split) + ".bin");
  const LoadedModels models = load_models(paths);
  const ModelSet set = models.set();
  const MethodSettings settings = method_settings(cfg);
  if (cfg.family == Family::power && !models.reference()) {
    throw ConfigError("network references need a trained primal net (--checkpoint or --reference)");
  }

  RunManifest m = new_manifest("eval", cfg);
  m.seeds["eval"] = cfg.train.eval_seed;
  add_parent(m, data_dir);
  for (const std::string& p : models.manifests) m.parents.push_back(p);
  m.inputs.push_back(artifact(test_path.string()));
  for (const auto& p : {paths.checkpoint, paths.ablation, paths.naive, paths.reference}) {
    if (p) m.inputs.push_back(artifact(p->string()));
  }

  note(log, "computing references for " + std::to_string(data.test.size()) + " " + std::string(split) + " instances");
  const std::vector<ReferenceSolution> refs = compute_references(data.test, models.reference(), reference_options(cfg));
  EvalOptions opts{cfg.train.metric, cfg.train.alpha, cfg.train.beta, sha256_file(test_path.string())};
  const std::string hash = config_hash(cfg);

  std::vector<EvalReport> reports;
  for (Method method : methods) {
    note(log, "evaluating " + std::string(to_string(method)));
    reports.push_back(evaluate(method, data.test, refs, set, settings, opts));
    const fs::path sub = dir / std::string(to_string(method));
    save_table((sub / "instances.csv").string(), instances_table(reports.back(), cfg.seed));
    save_table((sub / "layers.csv").string(), layers_table({reports.back()}));
    write_file((sub / "summary.json").string(), summary_json(reports.back(), hash));
    for (const char* f : {"instances.csv", "layers.csv", "summary.json"}) m.outputs.push_back(artifact((sub / f).string()));
  }
  save_table((dir / "layers.csv").string(), layers_table(reports));
  m.outputs.push_back(artifact((dir / "layers.csv").string()));

  if (!data.test.empty()) {
    const ProblemInstance& z = data.test.front();
    std::vector<NamedTrajectory> runs;
    for (Method method : methods) {
      if (!has_multipliers(method)) continue;
      NamedTrajectory run{std::string(to_string(method)), run_method(method, z, set, settings), {}};
      const PrimalNet* net = method == Method::cdu ? set.primal : method == Method::unconstrained ? set.ablation_primal : nullptr;
      if (net) run.primal = primal_forward(run.trajectory.multipliers.back(), z, *net, ForwardContext::eval(settings.eval_seed));
      runs.push_back(std::move(run));
    }
    if (!runs.empty()) {
      const int axis = cfg.family == Family::miqp ? settings.da.iterations : settings.sa.iterations;
      save_table((dir / "trajectories.csv").string(), trajectories_table(runs, z, axis));
      m.outputs.push_back(artifact((dir / "trajectories.csv").string()));
    }
  }

  if (cfg.family == Family::power) {
    std::vector<std::pair<std::string, std::vector<Vector>>> allocations;
    for (Method method : methods) {
      std::vector<Vector> xs;
      for (std::size_t i = 0; i < data.test.size(); ++i) {
        xs.push_back(method == Method::sa ? refs[i].x : run_method(method, data.test[i], set, settings).primals.back());
      }
      allocations.emplace_back(std::string(to_string(method)), std::move(xs));
    }
    save_table((dir / "rates.csv").string(), rate_histogram_table(allocations, data.test));
    m.outputs.push_back(artifact((dir / "rates.csv").string()));
  }
  finish_manifest(m, dir);
  return reports;
}

std::vector<SweepRow> stage_sweep(const RunConfig& cfg, const ModelPaths& paths, const fs::path& dir, const Log& log) {
  cfg.validate();
  const LoadedModels models = load_models(paths);
  RunManifest m = new_manifest("sweep", cfg);
  m.seeds["eval"] = cfg.train.eval_seed;
  for (const std::string& p : models.manifests) m.parents.push_back(p);
  for (const auto& p : {paths.checkpoint, paths.ablation, paths.naive, paths.reference}) {
    if (p) m.inputs.push_back(artifact(p->string()));
  }
  note(log, "sweeping " + std::string(to_string(cfg.sweep.axis)) + " over " + std::to_string(cfg.sweep.grid.size()) +
                " values");
  const std::vector<SweepRow> rows = ood_sweep(cfg.sweep, models.set(), method_settings(cfg));
  save_table((dir / "sweep.csv").string(), sweep_table(rows));
  m.outputs.push_back(artifact((dir / "sweep.csv").string()));
  finish_manifest(m, dir);
  return rows;
}

void stage_plot(Figure figure, const fs::path& table, const fs::path& out) {
  const Table t = load_table(table.string());
  if (t.rows.empty()) throw ConfigError("table " + table.string() + " is empty; nothing to plot");
  write_file(out.string(), render_svg(figure, t));
  RunManifest m;
  m.kind = "plot";
  m.code_version = code_version();
  m.started = timestamp_now();
  const std::string parent = manifest_path(table.parent_path());
  if (fs::exists(parent)) m.parents.push_back(parent);
  m.inputs.push_back(artifact(table.string()));
  m.outputs.push_back(artifact(out.string()));
  m.finished = timestamp_now();
  save_manifest(out.string() + ".manifest.json", m);
}

std::vector<SeedOutcome> reproduce(const ReproduceOptions& options, const Log& log) {
  if (options.seeds.empty()) throw ConfigError("reproduce needs at least one seed");
  const bool miqp = options.family == Family::miqp;
  const std::string stem = miqp ? "miqp-desk-" : "power-desk-";
  const std::string cname = options.constrained_preset.empty() ? stem + "constrained" : options.constrained_preset;
  std::string uname = options.unconstrained_preset;
  if (uname.empty()) {
    const std::string suffix = "-constrained";
    if (cname.ends_with(suffix)) uname = cname.substr(0, cname.size() - suffix.size()) + "-unconstrained";
  }

  std::vector<Method> methods{Method::cdu, Method::unconstrained, miqp ? Method::da : Method::sa};
  if (!miqp) methods.push_back(Method::fullpower);
  if (options.naive) methods.push_back(Method::naive);

  std::vector<SeedOutcome> outcomes;
  for (std::uint64_t seed : options.seeds) {
    RunConfig con = preset(cname);
    RunConfig abl = con;
    if (uname.empty()) {
      abl.train.constrained = false;
      abl.method = Method::unconstrained;
    } else {
      abl = preset(uname);
    }
    if (con.family != options.family || abl.family != options.family) throw ConfigError("preset family mismatch");
    con.seed = seed;
    abl.seed = seed;
    con.finalize();
    abl.finalize();
    const fs::path root = options.out / std::string(to_string(options.family)) / ("seed" + std::to_string(seed));
    auto tagged = [&](const std::string& tag) {
      return Log([&log, tag](const std::string& msg) {
        if (log) log("[" + tag + "] " + msg);
      });
    };
    const std::string tag = std::string(to_string(options.family)) + " seed " + std::to_string(seed);

    prepare_datasets(con, root / "data", tagged(tag + " data"));
    stage_train(con, root / "data", root / "constrained", {std::nullopt, true}, tagged(tag + " constrained"));
    stage_train(abl, root / "data", root / "unconstrained", {std::nullopt, true}, tagged(tag + " unconstrained"));

    ModelPaths paths;
    paths.checkpoint = root / "constrained" / "checkpoint.bin";
    paths.ablation = root / "unconstrained" / "checkpoint.bin";
    if (options.naive) {
      const fs::path naive = root / "naive" / "naive.bin";
      bool fresh = fs::exists(naive) && fs::exists(manifest_path(naive.parent_path()));
      if (fresh) fresh = load_manifest(manifest_path(naive.parent_path())).config_hash == config_hash(con);
      if (!fresh) {
        const LoadedModels ref = load_models({paths.checkpoint, std::nullopt, std::nullopt, std::nullopt});
        stage_train_naive(con, root / "data", naive.parent_path(), ref.reference(), tagged(tag + " naive"));
      }
      paths.naive = naive;
    }

    SeedOutcome out;
    out.seed = seed;
    const std::vector<EvalReport> reports = stage_eval(con, methods, root / "data", paths, root / "eval", tagged(tag + " eval"));
    for (const EvalReport& r : reports) out.test[r.method] = r.aggregate();
    out.validation =
        stage_eval(con, {Method::cdu}, root / "data", paths, root / "eval-validation", tagged(tag + " eval"), "validation")
            .front()
            .aggregate();

    const fs::path figs = root / "figures";
    stage_plot(Figure::layers, root / "eval" / "layers.csv", figs / "layers.svg");
    stage_plot(Figure::trajectories, root / "eval" / "trajectories.csv", figs / "trajectories.svg");
    if (!miqp) stage_plot(Figure::rate_histogram, root / "eval" / "rates.csv", figs / "rate-histogram.svg");
    if (options.sweep) {
      RunConfig sw = con;
      sw.sweep.methods.clear();
      for (Method m : con.sweep.methods) {
        if (m != Method::naive || options.naive) sw.sweep.methods.push_back(m);
      }
      stage_sweep(sw, paths, root / "sweep", tagged(tag + " sweep"));
      stage_plot(Figure::ood, root / "sweep" / "sweep.csv", figs / "ood.svg");
    }
    outcomes.push_back(std::move(out));
  }

  Table t{{"seed", "method", "split", "mse_x", "violation_mean", "objective", "sum_rate", "descent_residual",
           "ascent_residual", "slackness_decrease_fraction"},
          {}};
  auto row = [&](std::uint64_t seed, Method m, const char* split, const EvalAggregate& a) {
    t.rows.push_back({static_cast<double>(seed), std::string(to_string(m)), std::string(split), a.mse_x,
                      a.violation_mean, a.objective, a.sum_rate, a.descent_residual, a.ascent_residual,
                      a.slackness_decrease_fraction});
  };
  for (const SeedOutcome& o : outcomes) {
    for (const auto& [m, a] : o.test) row(o.seed, m, "test", a);
    row(o.seed, Method::cdu, "validation", o.validation);
  }
  save_table((options.out / std::string(to_string(options.family)) / "summary.csv").string(), t);
  return outcomes;
}

}  // namespace cdu
