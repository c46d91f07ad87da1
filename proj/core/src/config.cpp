#include "cdu/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cdu/errors.hpp"
#include "cdu/io.hpp"

namespace cdu {

using json = nlohmann::json;

namespace {

/// Strict section reader: keys are optional, unknown keys are errors.
class Section {
public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where() + "." + key + ": " + e.what());
    }
  }

  void sub(const char* key, const std::function<void(Section&)>& fn) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    Section s(j_.at(key), path_.empty() ? key : path_ + "." + key);
    fn(s);
    s.finish();
  }

  template <class E>
  void named(const char* key, E& out, E (*parse)(std::string_view)) {
    std::string s;
    get(key, s);
    if (j_.contains(key)) out = parse(s);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) throw ConfigError("unknown key " + (path_.empty() ? k : path_ + "." + k));
    }
  }

private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

Activation parse_activation(std::string_view s) { return activation_from_string(s); }
InnerMinimizer parse_inner(std::string_view s) {
  if (s == "analytic") return InnerMinimizer::analytic;
  if (s == "primal_net") return InnerMinimizer::primal_net;
  if (s == "grid") return InnerMinimizer::grid;
  throw ConfigError("unknown inner minimizer '" + std::string(s) + "'");
}
std::string_view inner_name(InnerMinimizer m) {
  switch (m) {
    case InnerMinimizer::analytic: return "analytic";
    case InnerMinimizer::primal_net: return "primal_net";
    case InnerMinimizer::grid: return "grid";
  }
  return "analytic";
}
RateBase parse_base(std::string_view s) {
  if (s == "2") return RateBase::two;
  if (s == "e") return RateBase::e;
  throw ConfigError("log base must be \"2\" or \"e\"");
}

json net_json(const NetSpec& s) {
  return {{"layers", s.layers},       {"sublayers", s.sublayers},
          {"hops", s.hops},           {"features", s.features},
          {"activation", std::string(to_string(s.activation))}, {"leaky_slope", s.leaky_slope}};
}
void read_net(Section& s, NetSpec& n) {
  s.get("layers", n.layers);
  s.get("sublayers", n.sublayers);
  s.get("hops", n.hops);
  s.get("features", n.features);
  s.named("activation", n.activation, parse_activation);
  s.get("leaky_slope", n.leaky_slope);
}

json da_json(const DaConfig& d) {
  return {{"step", d.step},
          {"iterations", d.iterations},
          {"inner", std::string(inner_name(d.inner))},
          {"grid_points", d.grid_points}};
}
void read_da(Section& s, DaConfig& d) {
  s.get("step", d.step);
  s.get("iterations", d.iterations);
  s.named("inner", d.inner, parse_inner);
  s.get("grid_points", d.grid_points);
}

json to_json(const RunConfig& c) {
  const TrainConfig& t = c.train;
  const MultiplierSampler& sm = t.sampler;
  const PowerShape& p = c.data.power;
  const PathLossModel& pl = p.geometry.path_loss;
  json training = {
      {"primal_net", net_json(t.primal_net)},
      {"dual_net", net_json(t.dual_net)},
      {"primal_noise", {{"initial", t.primal_noise.initial}, {"decay", t.primal_noise.decay}}},
      {"dual_noise", {{"initial", t.dual_noise.initial}, {"decay", t.dual_noise.decay}}},
      {"dual_init", {{"upper", t.dual_init.upper}, {"keep_probability", t.dual_init.keep_probability}}},
      {"metric", std::string(to_string(t.metric))},
      {"alpha", t.alpha},
      {"beta", t.beta},
      {"primal_lr", t.primal_lr},
      {"dual_lr", t.dual_lr},
      {"primal_meta_lr", t.primal_meta_lr},
      {"dual_meta_lr", t.dual_meta_lr},
      {"primal_batch", t.primal_batch},
      {"dual_batch", t.dual_batch},
      {"multipliers_per_problem", t.multipliers_per_problem},
      {"dual_epochs_per_iteration", t.dual_epochs_per_iteration},
      {"iterations", t.iterations},
      {"constrained", t.constrained},
      {"gate_factor", t.gate_factor},
      {"grad_clip", t.grad_clip},
      {"head_scale", t.head_scale},
      {"sampler",
       {{"dual_weight", sm.dual_weight},
        {"uniform_sparse_weight", sm.uniform_sparse_weight},
        {"da_weight", sm.da_weight},
        {"uniform_box_weight", sm.uniform_box_weight},
        {"sparse_upper", sm.sparse_upper},
        {"keep_probability", sm.keep_probability},
        {"box_upper", sm.box_upper},
        {"da_step", sm.da_step},
        {"da_iterations", sm.da_iterations}}},
  };
  json data = {
      {"primal_train", c.data.primal_train},
      {"dual_train", c.data.dual_train},
      {"validation", c.data.validation},
      {"test", c.data.test},
      {"miqp", {{"n", c.data.miqp.n}, {"m", c.data.miqp.m}, {"r", c.data.miqp.r}}},
      {"power",
       {{"n", p.n},
        {"fraction", p.fraction},
        {"geometry",
         {{"area_side_m", p.geometry.area_side_m},
          {"min_link_m", p.geometry.min_link_m},
          {"max_link_m", p.geometry.max_link_m},
          {"shadowing_db", p.geometry.shadowing_db},
          {"path_loss",
           {{"alpha_near", pl.alpha_near},
            {"alpha_far", pl.alpha_far},
            {"breakpoint_m", pl.breakpoint_m},
            {"reference_distance_m", pl.reference_distance_m},
            {"reference_snr_db", pl.reference_snr_db}}}}},
        {"radio",
         {{"p_max_w", p.radio.p_max_w},
          {"bandwidth_hz", p.radio.bandwidth_hz},
          {"noise_psd_w_per_hz", p.radio.noise_psd_w_per_hz},
          {"r_min", p.radio.r_min},
          {"log_base", p.radio.base == RateBase::two ? "2" : "e"}}}}},
  };
  std::vector<std::string> methods;
  for (Method m : c.sweep.methods) methods.emplace_back(to_string(m));
  json sweep = {{"axis", std::string(to_string(c.sweep.axis))},
                {"grid", c.sweep.grid},
                {"in_distribution", c.sweep.in_distribution},
                {"instances", c.sweep.instances},
                {"seeds", c.sweep.seeds},
                {"methods", methods},
                {"da_iterations", c.sweep.da_iterations}};
  return {{"preset", c.preset},
          {"family", std::string(to_string(c.family))},
          {"method", std::string(to_string(c.method))},
          {"seed", c.seed},
          {"data", data},
          {"training", training},
          {"evaluation", {{"da", da_json(c.eval.da)}, {"sa", da_json(c.eval.sa)}}},
          {"naive",
           {{"depth", c.naive.spec.depth},
            {"features", c.naive.spec.features},
            {"hops", c.naive.spec.hops},
            {"epochs", c.naive.train.epochs},
            {"batch", c.naive.train.batch},
            {"lr", c.naive.train.lr}}},
          {"sweep", sweep}};
}

void read_training(Section& s, TrainConfig& t) {
  s.sub("primal_net", [&](Section& n) { read_net(n, t.primal_net); });
  s.sub("dual_net", [&](Section& n) { read_net(n, t.dual_net); });
  s.sub("primal_noise", [&](Section& n) {
    n.get("initial", t.primal_noise.initial);
    n.get("decay", t.primal_noise.decay);
  });
  s.sub("dual_noise", [&](Section& n) {
    n.get("initial", t.dual_noise.initial);
    n.get("decay", t.dual_noise.decay);
  });
  s.sub("dual_init", [&](Section& n) {
    n.get("upper", t.dual_init.upper);
    n.get("keep_probability", t.dual_init.keep_probability);
  });
  s.named("metric", t.metric, descent_metric_from_string);
  s.get("alpha", t.alpha);
  s.get("beta", t.beta);
  s.get("primal_lr", t.primal_lr);
  s.get("dual_lr", t.dual_lr);
  s.get("primal_meta_lr", t.primal_meta_lr);
  s.get("dual_meta_lr", t.dual_meta_lr);
  s.get("primal_batch", t.primal_batch);
  s.get("dual_batch", t.dual_batch);
  s.get("multipliers_per_problem", t.multipliers_per_problem);
  s.get("dual_epochs_per_iteration", t.dual_epochs_per_iteration);
  s.get("iterations", t.iterations);
  s.get("constrained", t.constrained);
  s.get("gate_factor", t.gate_factor);
  s.get("grad_clip", t.grad_clip);
  s.get("head_scale", t.head_scale);
  s.sub("sampler", [&](Section& m) {
    MultiplierSampler& sm = t.sampler;
    m.get("dual_weight", sm.dual_weight);
    m.get("uniform_sparse_weight", sm.uniform_sparse_weight);
    m.get("da_weight", sm.da_weight);
    m.get("uniform_box_weight", sm.uniform_box_weight);
    m.get("sparse_upper", sm.sparse_upper);
    m.get("keep_probability", sm.keep_probability);
    m.get("box_upper", sm.box_upper);
    m.get("da_step", sm.da_step);
    m.get("da_iterations", sm.da_iterations);
  });
}

void read_data(Section& s, DataConfig& d) {
  s.get("primal_train", d.primal_train);
  s.get("dual_train", d.dual_train);
  s.get("validation", d.validation);
  s.get("test", d.test);
  s.sub("miqp", [&](Section& m) {
    m.get("n", d.miqp.n);
    m.get("m", d.miqp.m);
    m.get("r", d.miqp.r);
  });
  s.sub("power", [&](Section& p) {
    p.get("n", d.power.n);
    p.get("fraction", d.power.fraction);
    p.sub("geometry", [&](Section& g) {
      NetworkGeometry& geo = d.power.geometry;
      g.get("area_side_m", geo.area_side_m);
      g.get("min_link_m", geo.min_link_m);
      g.get("max_link_m", geo.max_link_m);
      g.get("shadowing_db", geo.shadowing_db);
      g.sub("path_loss", [&](Section& l) {
        l.get("alpha_near", geo.path_loss.alpha_near);
        l.get("alpha_far", geo.path_loss.alpha_far);
        l.get("breakpoint_m", geo.path_loss.breakpoint_m);
        l.get("reference_distance_m", geo.path_loss.reference_distance_m);
        l.get("reference_snr_db", geo.path_loss.reference_snr_db);
      });
    });
    p.sub("radio", [&](Section& r) {
      RadioParams& radio = d.power.radio;
      r.get("p_max_w", radio.p_max_w);
      r.get("bandwidth_hz", radio.bandwidth_hz);
      r.get("noise_psd_w_per_hz", radio.noise_psd_w_per_hz);
      r.get("r_min", radio.r_min);
      r.named("log_base", radio.base, parse_base);
    });
  });
}

RunConfig paper_miqp() {
  RunConfig c;
  c.preset = "miqp-constrained";
  c.family = Family::miqp;
  c.data = DataConfig{};
  NetSpec net;
  net.family = Family::miqp;
  net.layers = 14;
  net.sublayers = 3;
  net.hops = 1;
  net.features = 32;
  net.activation = Activation::tanh;
  c.train.primal_net = net;
  c.train.dual_net = net;
  c.train.dual_init = MultiplierInit{1.0, 0.7};
  c.train.metric = DescentMetric::gradient;
  c.train.alpha = 0.98;
  c.train.beta = 0.95;
  c.train.primal_lr = 1e-4;
  c.train.dual_lr = 7e-4;
  c.train.primal_meta_lr = 1e-4;
  c.train.dual_meta_lr = 1e-3;
  c.train.primal_batch = 8;
  c.train.dual_batch = 256;
  c.train.multipliers_per_problem = 32;
  c.train.dual_epochs_per_iteration = 15;
  c.train.iterations = 400;
  c.train.sampler = MultiplierSampler{};
  c.eval.da.step = 0.01;
  c.eval.da.iterations = 600;
  c.eval.da.inner = InnerMinimizer::analytic;
  c.naive.spec = NaiveGnnSpec{Family::miqp, 42, 32, 1};
  c.sweep.axis = OodAxis::n;
  c.sweep.grid = {60, 70, 80, 90, 100};
  c.sweep.in_distribution = 80;
  c.sweep.instances = 100;
  c.sweep.methods = {Method::cdu, Method::unconstrained, Method::da, Method::naive};
  c.sweep.da_iterations = 1400;
  return c;
}

RunConfig paper_power() {
  RunConfig c;
  c.preset = "power-constrained";
  c.family = Family::power;
  c.data.primal_train = 512;
  c.data.dual_train = 2048;
  c.data.validation = 128;
  c.data.test = 128;
  c.data.power.n = 100;
  c.data.power.fraction = 0.5;
  c.data.power.geometry.area_side_m = 1500.0;
  c.data.power.radio.r_min = 1.5;
  NetSpec net;
  net.family = Family::power;
  net.layers = 4;
  net.sublayers = 3;
  net.hops = 2;
  net.features = 64;
  net.activation = Activation::leaky_relu;
  c.train.primal_net = net;
  net.layers = 6;
  c.train.dual_net = net;
  c.train.dual_init = MultiplierInit{10.0, 1.0};
  c.train.metric = DescentMetric::value;
  c.train.alpha = 1.05;
  c.train.beta = 0.8;
  c.train.primal_lr = 1e-4;
  c.train.dual_lr = 1e-5;
  c.train.primal_meta_lr = 1e-3;
  c.train.dual_meta_lr = 1e-3;
  c.train.primal_batch = 1;
  c.train.dual_batch = 256;
  c.train.multipliers_per_problem = 128;
  c.train.dual_epochs_per_iteration = 5;
  c.train.iterations = 2000;
  MultiplierSampler& s = c.train.sampler;
  s.dual_weight = 0.25;
  s.uniform_sparse_weight = 0.0;
  s.da_weight = 0.25;
  s.uniform_box_weight = 0.5;
  s.box_upper = 1.0;
  s.da_step = 0.05;
  s.da_iterations = 100;
  c.eval.da.inner = InnerMinimizer::grid;
  c.eval.sa = state_augmented_defaults();
  c.naive.spec = NaiveGnnSpec{Family::power, 12, 64, 2};
  c.sweep.axis = OodAxis::r_min;
  c.sweep.grid = {1.0, 1.5, 2.0, 2.5};
  c.sweep.in_distribution = 1.5;
  c.sweep.instances = 64;
  c.sweep.methods = {Method::cdu, Method::unconstrained, Method::sa, Method::fullpower};
  c.sweep.da_iterations = 600;
  return c;
}

RunConfig desk_miqp() {
  RunConfig c = paper_miqp();
  c.data.primal_train = 200;
  c.data.dual_train = 400;
  c.data.validation = 100;
  c.data.test = 100;
  c.data.miqp = {20, 10, 4};
  for (NetSpec* n : {&c.train.primal_net, &c.train.dual_net}) {
    n->layers = 6;
    n->sublayers = 2;
    n->features = 16;
  }
  c.train.primal_lr = 1e-3;
  c.train.dual_lr = 1e-3;
  c.train.primal_meta_lr = 1e-3;
  c.train.dual_meta_lr = 1e-2;
  c.train.primal_batch = 8;
  c.train.dual_batch = 32;
  c.train.multipliers_per_problem = 8;
  c.train.dual_epochs_per_iteration = 3;
  c.train.iterations = 90;
  c.naive.spec = NaiveGnnSpec{Family::miqp, 12, 16, 1};
  c.naive.train.epochs = 60;
  c.sweep.grid = {10, 15, 20, 25, 30};
  c.sweep.in_distribution = 20;
  c.sweep.instances = 20;
  return c;
}

RunConfig desk_power() {
  RunConfig c = paper_power();
  c.data.primal_train = 128;
  c.data.dual_train = 256;
  c.data.validation = 64;
  c.data.test = 64;
  c.data.power.n = 20;
  c.data.power.geometry.area_side_m = 671.0;
  for (NetSpec* n : {&c.train.primal_net, &c.train.dual_net}) {
    n->sublayers = 2;
    n->features = 16;
  }
  c.train.primal_lr = 1e-3;
  c.train.dual_lr = 1e-3;
  c.train.primal_batch = 4;
  c.train.dual_batch = 32;
  c.train.multipliers_per_problem = 16;
  c.train.dual_epochs_per_iteration = 2;
  c.train.iterations = 400;
  c.train.sampler.da_iterations = 40;
  c.naive.spec = NaiveGnnSpec{Family::power, 6, 16, 2};
  c.naive.train.epochs = 60;
  c.sweep.instances = 16;
  return c;
}

RunConfig tiny(Family family) {
  RunConfig c = family == Family::miqp ? desk_miqp() : desk_power();
  c.data.primal_train = 4;
  c.data.dual_train = 4;
  c.data.validation = 2;
  c.data.test = 3;
  c.data.miqp = {6, 3, 2};
  c.data.power.n = 6;
  c.data.power.geometry.area_side_m = 300.0;
  for (NetSpec* n : {&c.train.primal_net, &c.train.dual_net}) {
    n->layers = 2;
    n->sublayers = 1;
    n->features = 4;
  }
  c.train.primal_batch = 2;
  c.train.dual_batch = 2;
  c.train.multipliers_per_problem = 4;
  c.train.dual_epochs_per_iteration = 1;
  c.train.iterations = 2;
  c.train.sampler.da_iterations = 5;
  c.eval.da.iterations = 50;
  c.eval.sa.iterations = 50;
  c.naive.spec.depth = 2;
  c.naive.spec.features = 4;
  c.naive.train.epochs = 3;
  c.sweep.grid = family == Family::miqp ? std::vector<double>{4, 6} : std::vector<double>{1.0, 1.5};
  c.sweep.in_distribution = family == Family::miqp ? 6 : 1.5;
  c.sweep.instances = 2;
  c.sweep.da_iterations = 30;
  return c;
}

RunConfig unconstrained(RunConfig c) {
  c.train.constrained = false;
  c.method = Method::unconstrained;
  if (c.family == Family::miqp) c.train.primal_lr *= 10.0;
  return c;
}

const std::map<std::string, std::function<RunConfig()>>& registry() {
  static const std::map<std::string, std::function<RunConfig()>> presets{
      {"miqp-constrained", [] { return paper_miqp(); }},
      {"miqp-unconstrained", [] { return unconstrained(paper_miqp()); }},
      {"power-constrained", [] { return paper_power(); }},
      {"power-unconstrained", [] { return unconstrained(paper_power()); }},
      {"miqp-desk-constrained", [] { return desk_miqp(); }},
      {"miqp-desk-unconstrained", [] { return unconstrained(desk_miqp()); }},
      {"power-desk-constrained", [] { return desk_power(); }},
      {"power-desk-unconstrained", [] { return unconstrained(desk_power()); }},
      {"miqp-tiny", [] { return tiny(Family::miqp); }},
      {"power-tiny", [] { return tiny(Family::power); }},
  };
  return presets;
}

bool same_da(const DaConfig& a, const DaConfig& b) {
  return a.step == b.step && a.iterations == b.iterations && a.inner == b.inner && a.seed == b.seed &&
         a.power_init == b.power_init && a.grid_points == b.grid_points &&
         a.initial.has_value() == b.initial.has_value() && (!a.initial || *a.initial == *b.initial);
}

}  // namespace

bool EvalConfig::operator==(const EvalConfig& o) const { return same_da(da, o.da) && same_da(sa, o.sa); }

bool NaiveConfig::operator==(const NaiveConfig& o) const {
  return spec == o.spec && train.epochs == o.train.epochs && train.batch == o.train.batch &&
         train.lr == o.train.lr && train.seed == o.train.seed;
}

std::uint64_t RunConfig::data_seed() const { return RngStreams(seed).seed_for("data"); }

void RunConfig::finalize() {
  const RngStreams streams(seed);
  train.family = family;
  train.primal_net.family = family;
  train.dual_net.family = family;
  train.seed = streams.seed_for("train");
  train.eval_seed = streams.seed_for("eval");
  eval.da.seed = train.eval_seed;
  eval.sa.seed = train.eval_seed;
  eval.da.power_init = train.dual_init;
  eval.sa.power_init = train.dual_init;
  naive.spec.family = family;
  naive.train.seed = streams.seed_for("naive");
  sweep.family = family;
  sweep.miqp = data.miqp;
  sweep.power = data.power;
}

void RunConfig::validate() const {
  train.validate();
  if (train.family != family) throw ConfigError("config is not finalized");
  for (int n : {data.primal_train, data.dual_train, data.validation, data.test}) {
    if (n < 0) throw ConfigError("dataset sizes must be nonnegative");
  }
  if (family == Family::miqp) {
    const MiqpShape& s = data.miqp;
    if (s.n < 1 || s.m < 0 || s.r < 0 || s.r > s.n) throw ConfigError("invalid QP shape");
  } else {
    const PowerShape& s = data.power;
    if (s.n < 1 || !(s.fraction >= 0.0 && s.fraction <= 1.0)) throw ConfigError("invalid network shape");
    if (!(s.radio.p_max_w > 0.0) || !(s.radio.r_min >= 0.0)) throw ConfigError("invalid radio parameters");
    if (!(s.geometry.area_side_m > 0.0)) throw ConfigError("area side must be positive");
  }
  eval.da.validate();
  eval.sa.validate();
  if (naive.spec.depth < 1 || naive.spec.features < 1 || naive.train.batch < 1 || !(naive.train.lr > 0.0)) {
    throw ConfigError("invalid supervised baseline settings");
  }
  sweep.validate();
  if (family == Family::miqp && method == Method::fullpower) throw ConfigError("full power applies to networks only");
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : registry()) out.push_back(k);
  return out;
}

RunConfig preset(std::string_view name) {
  const auto it = registry().find(std::string(name));
  if (it == registry().end()) throw ConfigError("unknown preset '" + std::string(name) + "'");
  RunConfig c = it->second();
  c.preset = std::string(name);
  c.finalize();
  return c;
}

std::string to_json_text(const RunConfig& cfg, int indent) { return to_json(cfg).dump(indent); }

RunConfig config_from_json_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Section root(j, "");
  std::string name;
  root.get("preset", name);
  std::string family;
  root.get("family", family);
  if (name.empty()) name = family == "power" ? "power-constrained" : "miqp-constrained";
  RunConfig c = preset(name);
  if (!family.empty()) {
    c.family = family_from_string(family);
    if (c.family != preset(name).family) throw ConfigError("family '" + family + "' contradicts preset " + name);
  }
  root.named("method", c.method, method_from_string);
  root.get("seed", c.seed);
  root.sub("data", [&](Section& s) { read_data(s, c.data); });
  root.sub("training", [&](Section& s) { read_training(s, c.train); });
  root.sub("evaluation", [&](Section& s) {
    s.sub("da", [&](Section& d) { read_da(d, c.eval.da); });
    s.sub("sa", [&](Section& d) { read_da(d, c.eval.sa); });
  });
  root.sub("naive", [&](Section& s) {
    s.get("depth", c.naive.spec.depth);
    s.get("features", c.naive.spec.features);
    s.get("hops", c.naive.spec.hops);
    s.get("epochs", c.naive.train.epochs);
    s.get("batch", c.naive.train.batch);
    s.get("lr", c.naive.train.lr);
  });
  root.sub("sweep", [&](Section& s) {
    s.named("axis", c.sweep.axis, ood_axis_from_string);
    s.get("grid", c.sweep.grid);
    s.get("in_distribution", c.sweep.in_distribution);
    s.get("instances", c.sweep.instances);
    s.get("seeds", c.sweep.seeds);
    std::vector<std::string> methods;
    s.get("methods", methods);
    if (!methods.empty()) {
      c.sweep.methods.clear();
      for (const std::string& m : methods) c.sweep.methods.push_back(method_from_string(m));
    }
    s.get("da_iterations", c.sweep.da_iterations);
  });
  root.finish();
  c.finalize();
  return c;
}

RunConfig load_config(const std::string& path) { return config_from_json_text(read_file(path)); }

void save_config(const std::string& path, const RunConfig& cfg) { write_file(path, to_json_text(cfg) + "\n"); }

std::string config_hash(const RunConfig& cfg) { return sha256_hex(to_json(cfg).dump()); }

}  // namespace cdu
