#include "cdu/io.hpp"

#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "cdu/errors.hpp"

#ifndef CDU_VERSION
#define CDU_VERSION "0.0.0"
#endif

namespace cdu {

using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little, "archives assume a little-endian host");

namespace {

constexpr std::string_view kDatasetMagic = "CDUDATA1";
constexpr std::string_view kCheckpointMagic = "CDUCKPT1";
constexpr std::string_view kNaiveMagic = "CDUNAIV1";

void expect_magic(ArchiveReader& r, std::string_view magic, const char* what) {
  if (r.text() != magic) throw ConfigError(std::string("not a ") + what + " archive");
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, std::string_view bytes) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ConfigError("write failed for " + path);
  }
  std::filesystem::rename(tmp, target);
}

void ArchiveWriter::u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }

void ArchiveWriter::u64(std::uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out_.append(b, 8);
}

void ArchiveWriter::i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
void ArchiveWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ArchiveWriter::text(std::string_view s) {
  u64(s.size());
  out_.append(s);
}

void ArchiveWriter::vector(const Vector& v) {
  i64(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
}

void ArchiveWriter::matrix(const Matrix& m) {
  i64(m.rows());
  i64(m.cols());
  for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
}

void ArchiveReader::need(std::size_t n) const {
  if (in_.size() - pos_ < n) throw ConfigError("archive is truncated");
}

std::uint8_t ArchiveReader::u8() {
  need(1);
  return static_cast<std::uint8_t>(in_[pos_++]);
}

std::uint64_t ArchiveReader::u64() {
  need(8);
  std::uint64_t v;
  std::memcpy(&v, in_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

std::int64_t ArchiveReader::i64() { return static_cast<std::int64_t>(u64()); }
double ArchiveReader::f64() { return std::bit_cast<double>(u64()); }

std::string ArchiveReader::text() {
  const std::uint64_t n = u64();
  need(n);
  std::string s(in_.substr(pos_, n));
  pos_ += n;
  return s;
}

Vector ArchiveReader::vector() {
  const std::int64_t n = i64();
  if (n < 0) throw ConfigError("archive has a negative length");
  need(static_cast<std::size_t>(n) * 8);
  Vector v(n);
  for (std::int64_t i = 0; i < n; ++i) v[i] = f64();
  return v;
}

Matrix ArchiveReader::matrix() {
  const std::int64_t r = i64();
  const std::int64_t c = i64();
  if (r < 0 || c < 0) throw ConfigError("archive has a negative shape");
  need(static_cast<std::size_t>(r * c) * 8);
  Matrix m(r, c);
  for (std::int64_t i = 0; i < r * c; ++i) m.data()[i] = f64();
  return m;
}

std::string encode_dataset(const std::vector<ProblemInstance>& data) {
  ArchiveWriter w;
  w.text(kDatasetMagic);
  w.u8(data.empty() ? 0 : static_cast<std::uint8_t>(data.front().family()));
  w.u64(data.size());
  for (const ProblemInstance& z : data) {
    w.u8(static_cast<std::uint8_t>(z.family()));
    if (z.family() == Family::miqp) {
      const RelaxedQp& qp = z.qp();
      w.i64(qp.linear_rows());
      w.u64(qp.binary().size());
      for (int i : qp.binary()) w.i64(i);
      w.matrix(qp.P());
      w.vector(qp.q());
      w.matrix(qp.A());
      w.vector(qp.b());
    } else {
      const NetworkInstance& net = z.network();
      w.matrix(net.H());
      w.vector(net.mask());
      const RadioParams& r = net.radio();
      w.f64(r.p_max_w);
      w.f64(r.bandwidth_hz);
      w.f64(r.noise_psd_w_per_hz);
      w.f64(r.r_min);
      w.u8(r.base == RateBase::two ? 0 : 1);
    }
  }
  return w.bytes();
}

std::vector<ProblemInstance> decode_dataset(std::string_view bytes) {
  ArchiveReader r(bytes);
  expect_magic(r, kDatasetMagic, "dataset");
  r.u8();
  const std::uint64_t count = r.u64();
  std::vector<ProblemInstance> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint8_t family = r.u8();
    if (family == static_cast<std::uint8_t>(Family::miqp)) {
      const int linear = static_cast<int>(r.i64());
      std::vector<int> binary(r.u64());
      for (int& b : binary) b = static_cast<int>(r.i64());
      Matrix P = r.matrix();
      Vector q = r.vector();
      Matrix A = r.matrix();
      Vector b = r.vector();
      out.emplace_back(RelaxedQp(std::move(P), std::move(q), std::move(A), std::move(b), std::move(binary), linear));
    } else if (family == static_cast<std::uint8_t>(Family::power)) {
      Matrix H = r.matrix();
      Vector mask = r.vector();
      RadioParams radio;
      radio.p_max_w = r.f64();
      radio.bandwidth_hz = r.f64();
      radio.noise_psd_w_per_hz = r.f64();
      radio.r_min = r.f64();
      radio.base = r.u8() == 0 ? RateBase::two : RateBase::e;
      out.emplace_back(NetworkInstance(std::move(H), std::move(mask), radio));
    } else {
      throw ConfigError("dataset has an unknown family tag");
    }
  }
  if (!r.done()) throw ConfigError("dataset has trailing bytes");
  return out;
}

void save_dataset(const std::string& path, const std::vector<ProblemInstance>& data) {
  write_file(path, encode_dataset(data));
}

std::vector<ProblemInstance> load_dataset(const std::string& path) { return decode_dataset(read_file(path)); }

namespace {

void write_spec(ArchiveWriter& w, const NetSpec& s, const NoiseSchedule& noise) {
  w.u8(static_cast<std::uint8_t>(s.family));
  w.i64(s.layers);
  w.i64(s.sublayers);
  w.i64(s.hops);
  w.i64(s.features);
  w.text(to_string(s.activation));
  w.f64(s.leaky_slope);
  w.i64(s.inputs);
  w.f64(noise.initial);
  w.f64(noise.decay);
}

std::pair<NetSpec, NoiseSchedule> read_spec(ArchiveReader& r) {
  NetSpec s;
  s.family = static_cast<Family>(r.u8());
  s.layers = static_cast<int>(r.i64());
  s.sublayers = static_cast<int>(r.i64());
  s.hops = static_cast<int>(r.i64());
  s.features = static_cast<int>(r.i64());
  s.activation = activation_from_string(r.text());
  s.leaky_slope = r.f64();
  s.inputs = static_cast<int>(r.i64());
  NoiseSchedule noise;
  noise.initial = r.f64();
  noise.decay = r.f64();
  return {s, noise};
}

void write_params(ArchiveWriter& w, const std::vector<Matrix>& params) {
  w.u64(params.size());
  for (const Matrix& m : params) w.matrix(m);
}

std::vector<Matrix> read_params(ArchiveReader& r) {
  std::vector<Matrix> out(r.u64());
  for (Matrix& m : out) m = r.matrix();
  return out;
}

void assign_params(UnrolledNet& net, std::vector<Matrix> params) {
  if (params.size() != net.params().size()) {
    throw DimensionError("parameter count", static_cast<long>(net.params().size()), static_cast<long>(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].rows() != net.params()[i].rows() || params[i].cols() != net.params()[i].cols()) {
      throw DimensionError(net.param_name(static_cast<int>(i)), net.params()[i].size(), params[i].size());
    }
  }
  net.params() = std::move(params);
}

void write_dual(ArchiveWriter& w, const DualNet& net) {
  write_net(w, net);
  w.f64(net.init().upper);
  w.f64(net.init().keep_probability);
}

PrimalNet read_primal(ArchiveReader& r) {
  const auto [spec, noise] = read_spec(r);
  PrimalNet net(spec, noise);
  assign_params(net, read_params(r));
  return net;
}

DualNet read_dual(ArchiveReader& r) {
  const auto [spec, noise] = read_spec(r);
  std::vector<Matrix> params = read_params(r);
  MultiplierInit init;
  init.upper = r.f64();
  init.keep_probability = r.f64();
  DualNet net(spec, noise, init);
  assign_params(net, std::move(params));
  return net;
}

void write_adam(ArchiveWriter& w, const Adam& a) {
  w.f64(a.lr());
  w.i64(a.steps());
  write_params(w, a.first_moment());
  write_params(w, a.second_moment());
}

Adam read_adam(ArchiveReader& r) {
  Adam a(r.f64());
  const long steps = static_cast<long>(r.i64());
  std::vector<Matrix> m = read_params(r);
  std::vector<Matrix> v = read_params(r);
  a.restore(steps, std::move(m), std::move(v));
  return a;
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vec(const json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = j[i].is_null() ? std::numeric_limits<double>::quiet_NaN() : j[i].get<double>();
  }
  return v;
}

double json_num(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

}  // namespace

void write_net(ArchiveWriter& w, const UnrolledNet& net) {
  write_spec(w, net.spec(), net.noise());
  write_params(w, net.params());
}

void read_net(ArchiveReader& r, UnrolledNet& net) {
  const auto [spec, noise] = read_spec(r);
  net = UnrolledNet(spec, noise);
  assign_params(net, read_params(r));
}

std::string encode_checkpoint(const RunConfig& cfg, const TrainState& s) {
  ArchiveWriter w;
  w.text(kCheckpointMagic);
  w.text(to_json_text(cfg, -1));
  write_net(w, s.primal);
  write_dual(w, s.dual);
  w.vector(s.meta.mu);
  w.vector(s.meta.nu);
  write_adam(w, s.primal_opt);
  write_adam(w, s.dual_opt);
  w.text(serialize_rng(s.rngs.shuffle));
  w.text(serialize_rng(s.rngs.sampling));
  w.text(serialize_rng(s.rngs.noise));
  w.i64(s.iteration);
  w.i64(s.epoch);
  w.f64(s.best_validation);
  w.u8(s.gated_primal && s.gated_dual ? 1 : 0);
  if (s.gated_primal && s.gated_dual) {
    write_net(w, *s.gated_primal);
    write_dual(w, *s.gated_dual);
  }
  w.u64(s.history.size());
  for (const HistoryRecord& h : s.history) w.text(history_line(h));
  return w.bytes();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  ArchiveReader r(bytes);
  expect_magic(r, kCheckpointMagic, "checkpoint");
  RunConfig cfg = config_from_json_text(r.text());
  PrimalNet primal = read_primal(r);
  DualNet dual = read_dual(r);
  MetaMultipliers meta;
  meta.mu = r.vector();
  meta.nu = r.vector();
  Adam popt = read_adam(r);
  Adam dopt = read_adam(r);
  TrainStreams rngs{deserialize_rng(r.text()), deserialize_rng(r.text()), deserialize_rng(r.text())};
  TrainState s{std::move(primal), std::move(dual), std::move(meta), std::move(popt), std::move(dopt),
               std::move(rngs), 0, 0, 0.0, std::nullopt, std::nullopt, {}};
  s.iteration = static_cast<int>(r.i64());
  s.epoch = static_cast<int>(r.i64());
  s.best_validation = r.f64();
  if (r.u8() == 1) {
    s.gated_primal = read_primal(r);
    s.gated_dual = read_dual(r);
  }
  const std::uint64_t n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) s.history.push_back(parse_history_line(r.text()));
  if (!r.done()) throw ConfigError("checkpoint has trailing bytes");
  return {std::move(cfg), std::move(s)};
}

void save_checkpoint(const std::string& path, const RunConfig& cfg, const TrainState& state) {
  write_file(path, encode_checkpoint(cfg, state));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

void save_naive(const std::string& path, const NaiveGnn& model) {
  ArchiveWriter w;
  w.text(kNaiveMagic);
  const NaiveGnnSpec& s = model.spec();
  w.u8(static_cast<std::uint8_t>(s.family));
  w.i64(s.depth);
  w.i64(s.features);
  w.i64(s.hops);
  write_params(w, model.net().params());
  write_file(path, w.bytes());
}

NaiveGnn load_naive(const std::string& path) {
  const std::string bytes = read_file(path);
  ArchiveReader r(bytes);
  expect_magic(r, kNaiveMagic, "supervised model");
  NaiveGnnSpec s;
  s.family = static_cast<Family>(r.u8());
  s.depth = static_cast<int>(r.i64());
  s.features = static_cast<int>(r.i64());
  s.hops = static_cast<int>(r.i64());
  NaiveGnn model(s);
  assign_params(model.net(), read_params(r));
  return model;
}

std::string history_line(const HistoryRecord& h) {
  const json j = {{"iteration", h.iteration}, {"epoch", h.epoch},   {"phase", h.phase},
                  {"loss", h.loss},           {"objective", h.objective}, {"residuals", vec_json(h.residuals)},
                  {"mu", vec_json(h.mu)},     {"nu", vec_json(h.nu)},     {"validation", h.validation},
                  {"saved", h.saved}};
  return j.dump();
}

HistoryRecord parse_history_line(std::string_view line) {
  try {
    const json j = json::parse(line);
    HistoryRecord h;
    h.iteration = j.at("iteration").get<int>();
    h.epoch = j.at("epoch").get<int>();
    h.phase = j.at("phase").get<std::string>();
    h.loss = json_num(j.at("loss"));
    h.objective = json_num(j.at("objective"));
    h.residuals = json_vec(j.at("residuals"));
    h.mu = json_vec(j.at("mu"));
    h.nu = json_vec(j.at("nu"));
    h.validation = json_num(j.at("validation"));
    h.saved = j.at("saved").get<bool>();
    return h;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed history record: ") + e.what());
  }
}

void append_history(const std::string& path, const HistoryRecord& record) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw ConfigError("cannot append to " + path);
  out << history_line(record) << '\n';
}

std::vector<HistoryRecord> read_history(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<HistoryRecord> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(parse_history_line(line));
  }
  return out;
}

namespace {

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cells.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cells.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back();
    } else {
      cells.back() += c;
    }
  }
  return cells;
}

std::optional<double> parse_number(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace

std::string table_to_csv(const Table& table) {
  std::string out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out += ',';
    out += csv_text(table.columns[c]);
  }
  out += '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size()) {
      throw DimensionError("table row", static_cast<long>(table.columns.size()), static_cast<long>(row.size()));
    }
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      if (const double* d = std::get_if<double>(&row[c])) out += csv_number(*d);
      else out += csv_text(std::get<std::string>(row[c]));
    }
    out += '\n';
  }
  return out;
}

Table table_from_csv(std::string_view text) {
  std::vector<std::vector<std::string>> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    if (end > start) lines.push_back(split_csv_line(text.substr(start, end - start)));
    start = end + 1;
  }
  if (lines.empty()) throw ConfigError("table has no header");
  Table t;
  t.columns = lines.front();
  std::vector<bool> numeric(t.columns.size(), true);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (lines[r].size() != t.columns.size()) {
      throw DimensionError("table row", static_cast<long>(t.columns.size()), static_cast<long>(lines[r].size()));
    }
    for (std::size_t c = 0; c < t.columns.size(); ++c) numeric[c] = numeric[c] && parse_number(lines[r][c]).has_value();
  }
  for (std::size_t r = 1; r < lines.size(); ++r) {
    std::vector<Cell> row;
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      if (numeric[c]) row.emplace_back(*parse_number(lines[r][c]));
      else row.emplace_back(lines[r][c]);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

void save_table(const std::string& path, const Table& table) { write_file(path, table_to_csv(table)); }
Table load_table(const std::string& path) { return table_from_csv(read_file(path)); }

std::string code_version() { return CDU_VERSION; }

std::string timestamp_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

ArtifactRef artifact(const std::string& path) { return {path, sha256_file(path)}; }

namespace {

json refs_json(const std::vector<ArtifactRef>& refs) {
  json out = json::array();
  for (const ArtifactRef& r : refs) out.push_back({{"path", r.path}, {"sha256", r.sha256}});
  return out;
}

std::vector<ArtifactRef> json_refs(const json& j) {
  std::vector<ArtifactRef> out;
  for (const json& r : j) out.push_back({r.at("path").get<std::string>(), r.at("sha256").get<std::string>()});
  return out;
}

}  // namespace

std::string manifest_to_json_text(const RunManifest& m) {
  json config = m.config_json.empty() ? json::object() : json::parse(m.config_json);
  const json j = {{"kind", m.kind},         {"config", config},         {"config_hash", m.config_hash},
                  {"seeds", m.seeds},       {"parents", m.parents},     {"inputs", refs_json(m.inputs)},
                  {"outputs", refs_json(m.outputs)}, {"code_version", m.code_version}, {"started", m.started},
                  {"finished", m.finished}};
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json_text(std::string_view text) {
  try {
    const json j = json::parse(text);
    RunManifest m;
    m.kind = j.at("kind").get<std::string>();
    m.config_json = j.at("config").empty() ? std::string() : j.at("config").dump();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
    m.parents = j.at("parents").get<std::vector<std::string>>();
    m.inputs = json_refs(j.at("inputs"));
    m.outputs = json_refs(j.at("outputs"));
    m.code_version = j.at("code_version").get<std::string>();
    m.started = j.at("started").get<std::string>();
    m.finished = j.at("finished").get<std::string>();
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
}

void save_manifest(const std::string& path, const RunManifest& m) { write_file(path, manifest_to_json_text(m)); }
RunManifest load_manifest(const std::string& path) { return manifest_from_json_text(read_file(path)); }

std::vector<ProblemInstance> generate_split(const RunConfig& cfg, std::string_view split, int count) {
  if (split != "primal" && split != "dual" && split != "validation" && split != "test") {
    throw ConfigError("unknown dataset split '" + std::string(split) + "'");
  }
  if (count < 0) throw ConfigError("dataset size must be nonnegative");
  const RngStreams streams(cfg.data_seed());
  std::vector<ProblemInstance> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const std::uint64_t s = streams.seed_for(split, static_cast<std::uint64_t>(i));
    if (cfg.family == Family::miqp) {
      const MiqpShape& q = cfg.data.miqp;
      out.emplace_back(relax(generate_instance(q.n, q.m, q.r, s)));
    } else {
      const PowerShape& p = cfg.data.power;
      out.emplace_back(generate_network(p.n, p.fraction, s, p.geometry, p.radio));
    }
  }
  return out;
}

}  // namespace cdu
