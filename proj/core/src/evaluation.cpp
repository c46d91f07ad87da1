#include "cdu/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "cdu/errors.hpp"

namespace cdu {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

constexpr std::array<std::pair<Method, std::string_view>, 6> kMethodNames{{
    {Method::cdu, "cdu"},
    {Method::unconstrained, "unconstrained"},
    {Method::da, "da"},
    {Method::sa, "sa"},
    {Method::naive, "naive"},
    {Method::fullpower, "fullpower"},
}};

constexpr std::array<std::pair<OodAxis, std::string_view>, 5> kAxisNames{{
    {OodAxis::n, "n"},
    {OodAxis::m, "m"},
    {OodAxis::r, "r"},
    {OodAxis::r_min, "r_min"},
    {OodAxis::fraction, "fraction"},
}};

constexpr std::array<std::pair<Figure, std::string_view>, 4> kFigureNames{{
    {Figure::trajectories, "trajectories"},
    {Figure::layers, "layers"},
    {Figure::ood, "ood"},
    {Figure::rate_histogram, "rate-histogram"},
}};

template <class E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E value) {
  for (const auto& [e, s] : table) {
    if (e == value) return s;
  }
  return "unknown";
}

template <class E, std::size_t N>
E parse_name(const std::array<std::pair<E, std::string_view>, N>& table, std::string_view name, const char* what) {
  for (const auto& [e, s] : table) {
    if (s == name) return e;
  }
  throw ConfigError(std::string("unknown ") + what + " '" + std::string(name) + "'");
}

/// Per-coordinate squared error; power allocations in units of P_max.
double mse(const Vector& a, const Vector& b, const ProblemInstance& z, bool primal) {
  if (a.size() != b.size()) throw DimensionError("reference", b.size(), a.size());
  if (a.size() == 0) return 0.0;
  const double scale = primal && z.family() == Family::power ? 1.0 / z.network().p_max() : 1.0;
  return (scale * (a - b)).squaredNorm() / static_cast<double>(a.size());
}

double dual_value(const Vector& lambda, const Vector& x, const ProblemInstance& z) {
  return z.family() == Family::miqp ? dual_function(lambda, z.qp()) : lagrangian(x, lambda, z);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Column-wise mean of equally long per-instance vectors; empty if any is empty.
std::vector<double> layer_means(const std::vector<InstanceMetrics>& rows,
                                std::vector<double> InstanceMetrics::*field) {
  if (rows.empty()) return {};
  std::size_t len = (rows.front().*field).size();
  for (const InstanceMetrics& r : rows) len = std::min(len, (r.*field).size());
  std::vector<double> out(len, 0.0);
  for (const InstanceMetrics& r : rows) {
    for (std::size_t l = 0; l < len; ++l) out[l] += (r.*field)[l];
  }
  for (double& v : out) v /= static_cast<double>(rows.size());
  return out;
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::string_view to_string(Method method) { return name_of(kMethodNames, method); }
Method method_from_string(std::string_view name) { return parse_name(kMethodNames, name, "method"); }

bool has_multipliers(Method method) {
  return method == Method::cdu || method == Method::unconstrained || method == Method::da || method == Method::sa;
}

std::string_view to_string(OodAxis axis) { return name_of(kAxisNames, axis); }
OodAxis ood_axis_from_string(std::string_view name) { return parse_name(kAxisNames, name, "sweep axis"); }

std::string_view to_string(Figure figure) { return name_of(kFigureNames, figure); }
Figure figure_from_string(std::string_view name) { return parse_name(kFigureNames, name, "figure"); }

std::string_view reference_method(Family family) { return family == Family::miqp ? "reference_solve" : "sa"; }

ReferenceSolution compute_reference(const ProblemInstance& z, const PrimalNet* sa_primal,
                                    const ReferenceOptions& options) {
  if (z.family() == Family::miqp) {
    const QpSolution sol = reference_solve(z.qp(), options.qp);
    const double kkt = std::max({sol.stationarity, sol.max_violation, sol.abs_complementarity});
    return {sol.x, sol.lambda, kkt};
  }
  if (!sa_primal) throw ConfigError("network references need a trained primal network");
  const DualTrajectory t = state_augmented_da(z, *sa_primal, options.sa);
  return {t.solution(), t.final_multiplier(), kNaN};
}

std::vector<ReferenceSolution> compute_references(const std::vector<ProblemInstance>& data,
                                                  const PrimalNet* sa_primal, const ReferenceOptions& options) {
  std::vector<ReferenceSolution> out;
  out.reserve(data.size());
  for (const ProblemInstance& z : data) out.push_back(compute_reference(z, sa_primal, options));
  return out;
}

DualTrajectory run_method(Method method, const ProblemInstance& z, const ModelSet& models,
                          const MethodSettings& settings) {
  auto require = [&](const void* p, const char* what) {
    if (!p) throw ConfigError(std::string(to_string(method)) + " needs " + what);
  };
  switch (method) {
    case Method::cdu:
      require(models.primal, "a primal network");
      require(models.dual, "a dual network");
      return dual_forward(z, *models.dual, *models.primal, ForwardContext::eval(settings.eval_seed));
    case Method::unconstrained:
      require(models.ablation_primal, "an unconstrained primal network");
      require(models.ablation_dual, "an unconstrained dual network");
      return dual_forward(z, *models.ablation_dual, *models.ablation_primal, ForwardContext::eval(settings.eval_seed));
    case Method::da:
      return dual_ascent(z, settings.da, models.primal);
    case Method::sa: {
      const PrimalNet* inner = models.sa_primal ? models.sa_primal : models.primal;
      require(inner, "a primal network");
      return state_augmented_da(z, *inner, settings.sa);
    }
    case Method::naive:
      require(models.naive, "a supervised model");
      return make_dual_trajectory({Vector::Zero(z.n_cons())}, {models.naive->predict(z)}, z);
    case Method::fullpower:
      if (z.family() != Family::power) throw ConfigError("full power applies to networks only");
      return make_dual_trajectory({Vector::Zero(z.n_cons())}, {full_power(z.network())}, z);
  }
  throw ConfigError("unknown method");
}

std::vector<LayerDiagnostics> layer_diagnostics(const DualTrajectory& traj, const ProblemInstance& z) {
  std::vector<LayerDiagnostics> out;
  out.reserve(traj.multipliers.size());
  for (std::size_t l = 0; l < traj.multipliers.size(); ++l) out.push_back(diagnose(traj.primals[l], traj.multipliers[l], z));
  return out;
}

std::vector<LayerDiagnostics> layer_diagnostics(const PrimalTrajectory& traj, const ProblemInstance& z) {
  std::vector<LayerDiagnostics> out;
  out.reserve(traj.iterates.size());
  for (const Vector& x : traj.iterates) out.push_back(diagnose(x, traj.multiplier, z));
  return out;
}

EvalReport evaluate(Method method, const std::vector<ProblemInstance>& data,
                    const std::vector<ReferenceSolution>& references, const ModelSet& models,
                    const MethodSettings& settings, const EvalOptions& options) {
  if (data.size() != references.size()) {
    throw DimensionError("references", static_cast<long>(data.size()), static_cast<long>(references.size()));
  }
  EvalReport report;
  report.method = method;
  report.family = data.empty() ? Family::miqp : data.front().family();
  report.dataset_hash = options.dataset_hash;
  report.reference = std::string(reference_method(report.family));

  const bool learned = method == Method::cdu || method == Method::unconstrained;
  const PrimalNet* primal = method == Method::cdu ? models.primal : models.ablation_primal;
  const bool multipliers = has_multipliers(method);

  for (std::size_t i = 0; i < data.size(); ++i) {
    const ProblemInstance& z = data[i];
    const ReferenceSolution& ref = references[i];
    const DualTrajectory traj = run_method(method, z, models, settings);
    const std::vector<LayerDiagnostics> diag = layer_diagnostics(traj, z);

    InstanceMetrics m;
    m.instance = static_cast<int>(i);
    const Vector& x = traj.solution();
    m.mse_x = mse(x, ref.x, z, true);
    if (multipliers) m.mse_lambda = mse(traj.final_multiplier(), ref.lambda, z, false);
    m.objective = objective(x, z);
    if (z.family() == Family::power) m.sum_rate = -m.objective;
    const ViolationSummary v = summarize(violation(x, z));
    m.violation_mean = v.mean;
    m.violation_max = v.max;
    m.reference_objective = objective(ref.x, z);
    m.reference_kkt = ref.kkt_residual;

    for (std::size_t l = 0; l < traj.multipliers.size(); ++l) {
      m.mse_x_layers.push_back(mse(traj.primals[l], ref.x, z, true));
      m.mse_lambda_layers.push_back(multipliers ? mse(traj.multipliers[l], ref.lambda, z, false) : kNaN);
      m.objective_layers.push_back(objective(traj.primals[l], z));
      m.violation_layers.push_back(diag[l].violation_mean);
      m.slackness_layers.push_back(diag[l].slackness);
      m.constraint_norm_layers.push_back(diag[l].constraint_norm);
    }
    if (multipliers && traj.layers() > 0) m.ascent_residual = to_std(ascent_residual(traj, options.beta));

    if (learned) {
      const ForwardContext ctx = ForwardContext::eval(settings.eval_seed);
      const PrimalTrajectory last = primal_forward(traj.final_multiplier(), z, *primal, ctx);
      for (const LayerDiagnostics& d : layer_diagnostics(last, z)) {
        m.primal_lagrangian_layers.push_back(d.lagrangian);
        m.primal_grad_norm_layers.push_back(d.grad_norm);
      }
      Vector descent = Vector::Zero(primal->layers());
      for (const Vector& lambda : traj.multipliers) {
        descent += descent_residual(primal_forward(lambda, z, *primal, ctx), options.metric, options.alpha);
      }
      m.descent_residual = to_std(descent / static_cast<double>(traj.multipliers.size()));
    }
    report.rows.push_back(std::move(m));
  }
  return report;
}

EvalAggregate EvalReport::aggregate() const {
  EvalAggregate a;
  a.instances = static_cast<int>(rows.size());
  if (rows.empty()) return a;
  auto mean_field = [&](double InstanceMetrics::*field) {
    double s = 0.0;
    for (const InstanceMetrics& r : rows) s += r.*field;
    return s / static_cast<double>(rows.size());
  };
  a.mse_x = mean_field(&InstanceMetrics::mse_x);
  a.mse_lambda = mean_field(&InstanceMetrics::mse_lambda);
  a.objective = mean_field(&InstanceMetrics::objective);
  a.sum_rate = mean_field(&InstanceMetrics::sum_rate);
  a.violation_mean = mean_field(&InstanceMetrics::violation_mean);
  a.violation_max = mean_field(&InstanceMetrics::violation_max);
  a.reference_objective = mean_field(&InstanceMetrics::reference_objective);
  if (family == Family::miqp) {
    a.max_reference_kkt = 0.0;
    for (const InstanceMetrics& r : rows) a.max_reference_kkt = std::max(a.max_reference_kkt, r.reference_kkt);
  }

  a.mse_x_layers = layer_means(rows, &InstanceMetrics::mse_x_layers);
  a.mse_lambda_layers = layer_means(rows, &InstanceMetrics::mse_lambda_layers);
  a.objective_layers = layer_means(rows, &InstanceMetrics::objective_layers);
  a.violation_layers = layer_means(rows, &InstanceMetrics::violation_layers);
  a.slackness_layers = layer_means(rows, &InstanceMetrics::slackness_layers);
  a.primal_grad_norm_layers = layer_means(rows, &InstanceMetrics::primal_grad_norm_layers);
  a.descent_residual_layers = layer_means(rows, &InstanceMetrics::descent_residual);
  a.ascent_residual_layers = layer_means(rows, &InstanceMetrics::ascent_residual);
  a.descent_residual = mean_of(a.descent_residual_layers);
  a.ascent_residual = mean_of(a.ascent_residual_layers);

  if (rows.front().slackness_layers.size() >= 2) {
    int decreased = 0;
    for (const InstanceMetrics& r : rows) decreased += r.slackness_layers.back() <= r.slackness_layers.front() ? 1 : 0;
    a.slackness_decrease_fraction = static_cast<double>(decreased) / static_cast<double>(rows.size());
  }
  return a;
}

void OodSpec::validate() const {
  const bool miqp_axis = axis == OodAxis::n || axis == OodAxis::m || axis == OodAxis::r;
  const bool power_axis = axis == OodAxis::n || axis == OodAxis::r_min || axis == OodAxis::fraction;
  if ((family == Family::miqp && !miqp_axis) || (family == Family::power && !power_axis)) {
    throw ConfigError("sweep axis '" + std::string(to_string(axis)) + "' does not apply to " +
                      std::string(to_string(family)));
  }
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  if (std::find(grid.begin(), grid.end(), in_distribution) == grid.end()) {
    throw ConfigError("sweep grid must contain the in-distribution value");
  }
  if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
  if (instances < 1) throw ConfigError("sweep needs at least one instance per point");
  if (methods.empty()) throw ConfigError("sweep needs at least one method");
  if (da_iterations < 1) throw ConfigError("dual-ascent budget must be positive");
}

std::vector<ProblemInstance> ood_instances(const OodSpec& spec, double value, std::uint64_t seed) {
  std::vector<ProblemInstance> out;
  out.reserve(static_cast<std::size_t>(spec.instances));
  const int as_int = static_cast<int>(std::lround(value));
  for (int i = 0; i < spec.instances; ++i) {
    const std::uint64_t s = mix_seed(seed, static_cast<std::uint64_t>(i));
    if (spec.family == Family::miqp) {
      MiqpShape shape = spec.miqp;
      if (spec.axis == OodAxis::n) shape.n = as_int;
      if (spec.axis == OodAxis::m) shape.m = as_int;
      if (spec.axis == OodAxis::r) shape.r = as_int;
      out.emplace_back(relax(generate_instance(shape.n, shape.m, shape.r, s)));
    } else {
      PowerShape shape = spec.power;
      if (spec.axis == OodAxis::n) shape.n = as_int;
      if (spec.axis == OodAxis::fraction) shape.fraction = value;
      if (spec.axis == OodAxis::r_min) shape.radio.r_min = value;
      out.emplace_back(generate_network(shape.n, shape.fraction, s, shape.geometry, shape.radio));
    }
  }
  return out;
}

std::vector<SweepRow> ood_sweep(const OodSpec& spec, const ModelSet& models, const MethodSettings& settings) {
  spec.validate();
  MethodSettings s = settings;
  s.da.iterations = spec.da_iterations;
  const PrimalNet* sa_primal = models.sa_primal ? models.sa_primal : models.primal;
  std::vector<SweepRow> rows;
  for (std::uint64_t seed : spec.seeds) {
    for (double value : spec.grid) {
      const std::vector<ProblemInstance> data = ood_instances(spec, value, seed);
      const std::vector<ReferenceSolution> refs = compute_references(data, sa_primal);
      for (Method method : spec.methods) {
        const EvalReport report = evaluate(method, data, refs, models, s);
        rows.push_back({method, spec.axis, value, seed, value == spec.in_distribution, report.aggregate()});
      }
    }
  }
  return rows;
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == name) return c;
  }
  throw ConfigError("table has no column '" + std::string(name) + "'");
}

double Table::number(std::size_t row, std::string_view name) const {
  const Cell& cell = rows.at(row).at(column(name));
  if (const double* d = std::get_if<double>(&cell)) return *d;
  throw ConfigError("column '" + std::string(name) + "' is not numeric");
}

std::string Table::text(std::size_t row, std::string_view name) const {
  const Cell& cell = rows.at(row).at(column(name));
  if (const std::string* s = std::get_if<std::string>(&cell)) return *s;
  return format_number(std::get<double>(cell));
}

Table trajectories_table(const std::vector<NamedTrajectory>& runs, const ProblemInstance& z, int axis_length) {
  if (axis_length < 1) throw ConfigError("trajectory axis length must be positive");
  Table t{{"method", "panel", "step", "value"}, {}};
  auto spread = [&](std::size_t i, std::size_t count) {
    return count <= 1 ? 0.0 : static_cast<double>(i) * axis_length / static_cast<double>(count - 1);
  };
  for (const NamedTrajectory& run : runs) {
    const DualTrajectory& d = run.trajectory;
    if (!run.primal.iterates.empty()) {
      const std::size_t count = run.primal.iterates.size();
      for (std::size_t k = 0; k < count; ++k) {
        t.rows.push_back({run.method, std::string("lagrangian"), spread(k, count),
                          lagrangian(run.primal.iterates[k], run.primal.multiplier, z)});
      }
    } else {
      for (std::size_t l = 0; l < d.multipliers.size(); ++l) {
        t.rows.push_back({run.method, std::string("lagrangian"), spread(l, d.multipliers.size()),
                          lagrangian(d.primals[l], d.multipliers[l], z)});
      }
    }
    for (std::size_t l = 0; l < d.multipliers.size(); ++l) {
      t.rows.push_back({run.method, std::string("dual"), spread(l, d.multipliers.size()),
                        dual_value(d.multipliers[l], d.primals[l], z)});
    }
  }
  return t;
}

Table layers_table(const std::vector<EvalReport>& reports) {
  Table t{{"method", "step", "layer", "mse_x", "mse_lambda", "objective", "violation", "slackness"}, {}};
  std::size_t axis = 1;
  std::vector<EvalAggregate> aggs;
  for (const EvalReport& r : reports) {
    aggs.push_back(r.aggregate());
    if (aggs.back().mse_x_layers.size() > 1) axis = std::max(axis, aggs.back().mse_x_layers.size() - 1);
  }
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const EvalAggregate& a = aggs[i];
    const std::size_t count = a.mse_x_layers.size();
    for (std::size_t l = 0; l < count; ++l) {
      const double step = count <= 1 ? static_cast<double>(axis) : static_cast<double>(l * axis) / (count - 1);
      t.rows.push_back({std::string(to_string(reports[i].method)), step, static_cast<double>(l), a.mse_x_layers[l],
                        a.mse_lambda_layers[l], a.objective_layers[l], a.violation_layers[l], a.slackness_layers[l]});
    }
  }
  return t;
}

Table sweep_table(const std::vector<SweepRow>& rows) {
  Table t{{"method", "axis", "value", "seed", "in_distribution", "mse_x", "mse_lambda", "objective", "sum_rate",
           "violation_mean", "violation_max"},
          {}};
  for (const SweepRow& r : rows) {
    t.rows.push_back({std::string(to_string(r.method)), std::string(to_string(r.axis)), r.value,
                      static_cast<double>(r.seed), r.in_distribution ? 1.0 : 0.0, r.metrics.mse_x,
                      r.metrics.mse_lambda, r.metrics.objective, r.metrics.sum_rate, r.metrics.violation_mean,
                      r.metrics.violation_max});
  }
  return t;
}

Table rate_histogram_table(const std::vector<std::pair<std::string, std::vector<Vector>>>& allocations,
                           const std::vector<ProblemInstance>& data) {
  Table t{{"method", "instance", "user", "rate", "r_min"}, {}};
  for (const auto& [method, powers] : allocations) {
    if (powers.size() != data.size()) {
      throw DimensionError("allocations", static_cast<long>(data.size()), static_cast<long>(powers.size()));
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      const NetworkInstance& net = data[i].network();
      const Vector r = rates(powers[i], net);
      for (int u : net.constrained()) {
        t.rows.push_back({method, static_cast<double>(i), static_cast<double>(u), r[u], net.r_min()});
      }
    }
  }
  return t;
}

namespace {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct Panel {
  std::string title;
  std::vector<Series> series;
  std::vector<double> markers;  // vertical reference lines
  bool bars = false;
};

constexpr std::array<const char*, 6> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

std::string render_panels(const std::vector<Panel>& panels) {
  constexpr double w = 320.0, h = 240.0, pad = 40.0;
  std::map<std::string, std::size_t> colors;
  for (const Panel& p : panels) {
    for (const Series& s : p.series) colors.emplace(s.name, colors.size());
  }
  const double total_w = w * static_cast<double>(std::max<std::size_t>(1, panels.size()));
  const double total_h = h + 20.0 * static_cast<double>(colors.size()) + 10.0;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << total_w << "\" height=\"" << total_h
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    const Panel& p = panels[pi];
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const Series& s : p.series) {
      for (auto [x, y] : s.points) {
        if (!std::isfinite(x) || !std::isfinite(y)) continue;
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    }
    for (double m : p.markers) {
      xmin = std::min(xmin, m);
      xmax = std::max(xmax, m);
    }
    if (!std::isfinite(xmin)) xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
    if (p.bars) ymin = std::min(ymin, 0.0);
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;
    const double ox = w * static_cast<double>(pi);
    auto sx = [&](double x) { return ox + pad + (x - xmin) / (xmax - xmin) * (w - 1.5 * pad); };
    auto sy = [&](double y) { return h - pad + (ymin - y) / (ymax - ymin) * (h - 1.5 * pad); };
    os << "<text x=\"" << ox + w / 2 << "\" y=\"14\" text-anchor=\"middle\">" << svg_escape(p.title) << "</text>\n";
    os << "<rect x=\"" << ox + pad << "\" y=\"" << pad / 2 << "\" width=\"" << w - 1.5 * pad << "\" height=\""
       << h - 1.5 * pad << "\" fill=\"none\" stroke=\"#444\"/>\n";
    os << "<text x=\"" << ox + pad << "\" y=\"" << h - pad + 14 << "\">" << format_number(xmin) << "</text>\n";
    os << "<text x=\"" << ox + w - pad / 2 << "\" y=\"" << h - pad + 14 << "\" text-anchor=\"end\">"
       << format_number(xmax) << "</text>\n";
    os << "<text x=\"" << ox + pad - 2 << "\" y=\"" << h - pad << "\" text-anchor=\"end\">" << format_number(ymin)
       << "</text>\n";
    os << "<text x=\"" << ox + pad - 2 << "\" y=\"" << pad / 2 + 10 << "\" text-anchor=\"end\">"
       << format_number(ymax) << "</text>\n";
    for (double m : p.markers) {
      os << "<line x1=\"" << sx(m) << "\" x2=\"" << sx(m) << "\" y1=\"" << pad / 2 << "\" y2=\"" << h - pad
         << "\" stroke=\"red\" stroke-dasharray=\"3,3\"/>\n";
    }
    for (const Series& s : p.series) {
      const char* color = kPalette[colors[s.name] % kPalette.size()];
      if (p.bars) {
        for (auto [x, y] : s.points) {
          if (!std::isfinite(x) || !std::isfinite(y)) continue;
          os << "<line x1=\"" << sx(x) << "\" x2=\"" << sx(x) << "\" y1=\"" << sy(0.0) << "\" y2=\"" << sy(y)
             << "\" stroke=\"" << color << "\" stroke-width=\"3\" stroke-opacity=\"0.6\"/>\n";
        }
        continue;
      }
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
      for (auto [x, y] : s.points) {
        if (std::isfinite(x) && std::isfinite(y)) os << sx(x) << ',' << sy(y) << ' ';
      }
      os << "\"/>\n";
    }
  }
  for (const auto& [name, idx] : colors) {
    const double y = h + 14.0 + 20.0 * static_cast<double>(idx);
    os << "<rect x=\"10\" y=\"" << y - 9 << "\" width=\"10\" height=\"10\" fill=\"" << kPalette[idx % kPalette.size()]
       << "\"/><text x=\"26\" y=\"" << y << "\">" << svg_escape(name) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Groups rows by method into (x, mean y) series, averaging duplicate x.
Series grouped_series(const Table& t, const std::string& method, std::string_view xcol, std::string_view ycol,
                      std::string_view filter_col = {}, const std::string& filter_value = {}) {
  std::map<double, std::pair<double, int>> acc;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.text(r, "method") != method) continue;
    if (!filter_col.empty() && t.text(r, filter_col) != filter_value) continue;
    auto& [sum, n] = acc[t.number(r, xcol)];
    sum += t.number(r, ycol);
    ++n;
  }
  Series s{method, {}};
  for (const auto& [x, sn] : acc) s.points.emplace_back(x, sn.first / sn.second);
  return s;
}

std::vector<std::string> methods_of(const Table& t) {
  std::vector<std::string> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string m = t.text(r, "method");
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  return out;
}

}  // namespace

std::string render_svg(Figure figure, const Table& table) {
  if (table.rows.empty()) throw ConfigError("cannot plot an empty table");
  const std::vector<std::string> methods = methods_of(table);
  std::vector<Panel> panels;
  switch (figure) {
    case Figure::trajectories:
      for (const char* panel : {"lagrangian", "dual"}) {
        Panel p{panel == std::string("dual") ? "dual value" : "Lagrangian", {}, {}, false};
        for (const std::string& m : methods) p.series.push_back(grouped_series(table, m, "step", "value", "panel", panel));
        panels.push_back(std::move(p));
      }
      break;
    case Figure::layers:
      for (const char* col : {"mse_x", "mse_lambda", "violation", "slackness"}) {
        Panel p{col, {}, {}, false};
        for (const std::string& m : methods) p.series.push_back(grouped_series(table, m, "step", col));
        panels.push_back(std::move(p));
      }
      break;
    case Figure::ood: {
      std::vector<double> markers;
      for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (table.number(r, "in_distribution") != 0.0) markers.push_back(table.number(r, "value"));
      }
      for (const char* col : {"mse_x", "violation_mean", "objective"}) {
        Panel p{std::string(col) + " vs " + table.text(0, "axis"), {}, markers, false};
        for (const std::string& m : methods) p.series.push_back(grouped_series(table, m, "value", col));
        panels.push_back(std::move(p));
      }
      break;
    }
    case Figure::rate_histogram: {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t r = 0; r < table.rows.size(); ++r) {
        lo = std::min(lo, table.number(r, "rate"));
        hi = std::max(hi, table.number(r, "rate"));
      }
      const int bins = 30;
      if (hi <= lo) hi = lo + 1.0;
      const double width = (hi - lo) / bins;
      Panel p{"rate of constrained users", {}, {table.number(0, "r_min")}, true};
      for (const std::string& m : methods) {
        std::vector<double> counts(bins, 0.0);
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
          if (table.text(r, "method") != m) continue;
          const int b = std::min(bins - 1, static_cast<int>((table.number(r, "rate") - lo) / width));
          counts[static_cast<std::size_t>(b)] += 1.0;
        }
        Series s{m, {}};
        for (int b = 0; b < bins; ++b) s.points.emplace_back(lo + (b + 0.5) * width, counts[static_cast<std::size_t>(b)]);
        p.series.push_back(std::move(s));
      }
      panels.push_back(std::move(p));
      break;
    }
  }
  return render_panels(panels);
}

}  // namespace cdu
