#pragma once

// Persistence: binary dataset and checkpoint archives, training history as
// line-delimited JSON, CSV tables, run manifests and SHA-256 digests.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cdu/baselines.hpp"
#include "cdu/config.hpp"
#include "cdu/evaluation.hpp"
#include "cdu/training.hpp"

namespace cdu {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

std::string read_file(const std::string& path);
/// Writes through a temporary file and renames it into place.
void write_file(const std::string& path, std::string_view bytes);

/// Little-endian byte archive.
class ArchiveWriter {
public:
  void u8(std::uint8_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v);
  void f64(double v);
  void text(std::string_view s);
  void vector(const Vector& v);
  void matrix(const Matrix& m);
  const std::string& bytes() const noexcept { return out_; }

private:
  std::string out_;
};

class ArchiveReader {
public:
  explicit ArchiveReader(std::string_view bytes) : in_(bytes) {}
  std::uint8_t u8();
  std::uint64_t u64();
  std::int64_t i64();
  double f64();
  std::string text();
  Vector vector();
  Matrix matrix();
  bool done() const noexcept { return pos_ == in_.size(); }

private:
  void need(std::size_t n) const;
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::string encode_dataset(const std::vector<ProblemInstance>& data);
std::vector<ProblemInstance> decode_dataset(std::string_view bytes);
void save_dataset(const std::string& path, const std::vector<ProblemInstance>& data);
std::vector<ProblemInstance> load_dataset(const std::string& path);

void write_net(ArchiveWriter& w, const UnrolledNet& net);
void read_net(ArchiveReader& r, UnrolledNet& net);

struct Checkpoint {
  RunConfig config;
  TrainState state;
};

std::string encode_checkpoint(const RunConfig& cfg, const TrainState& state);
Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::string& path, const RunConfig& cfg, const TrainState& state);
Checkpoint load_checkpoint(const std::string& path);

void save_naive(const std::string& path, const NaiveGnn& model);
NaiveGnn load_naive(const std::string& path);

std::string history_line(const HistoryRecord& record);
HistoryRecord parse_history_line(std::string_view line);
void append_history(const std::string& path, const HistoryRecord& record);
std::vector<HistoryRecord> read_history(const std::string& path);

/// Numbers are written with round-trip precision; a column whose cells all
/// parse as numbers reads back as numeric.
std::string table_to_csv(const Table& table);
Table table_from_csv(std::string_view text);
void save_table(const std::string& path, const Table& table);
Table load_table(const std::string& path);

struct ArtifactRef {
  std::string path;
  std::string sha256;
  bool operator==(const ArtifactRef&) const = default;
};

/// Provenance of one command invocation. `parents` lists the manifests of
/// the inputs, so eval manifests lead back to training and dataset manifests.
struct RunManifest {
  std::string kind;
  std::string config_json;
  std::string config_hash;
  std::map<std::string, std::uint64_t> seeds;
  std::vector<std::string> parents;
  std::vector<ArtifactRef> inputs;
  std::vector<ArtifactRef> outputs;
  std::string code_version;
  std::string started;
  std::string finished;
  bool operator==(const RunManifest&) const = default;
};

std::string code_version();
/// UTC timestamp in ISO-8601 form.
std::string timestamp_now();
ArtifactRef artifact(const std::string& path);

std::string manifest_to_json_text(const RunManifest& m);
RunManifest manifest_from_json_text(std::string_view text);
void save_manifest(const std::string& path, const RunManifest& m);
RunManifest load_manifest(const std::string& path);

/// Dataset split names: "primal", "dual", "validation", "test".
std::vector<ProblemInstance> generate_split(const RunConfig& cfg, std::string_view split, int count);

}  // namespace cdu
