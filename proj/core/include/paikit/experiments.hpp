#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "paikit/config.hpp"
#include "paikit/io.hpp"
#include "paikit/random.hpp"

namespace paikit {

/// Version string embedded in manifests.
std::string tool_version();

enum class RunStatus { pass = 0, assertion_failure = 1, config_error = 2, numerical_failure = 3 };

std::string status_name(RunStatus s);
/// Process exit code for a status.
int exit_code(RunStatus s);

struct Assertion {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double bound = 0.0;
  std::string detail;
};

struct Artifact {
  std::string path;  // relative to the run directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

/// Record of one experiment run: what was computed, what was written, what
/// was checked.
struct RunManifest {
  std::string kind;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version;
  std::string started;
  std::string finished;
  std::vector<Artifact> artifacts;
  std::vector<Assertion> assertions;
  Json constants = Json::object();
  std::vector<std::string> warnings;
  RunStatus status = RunStatus::pass;
  std::string error;

  bool all_passed() const;
  Json to_json() const;
  static RunManifest from_json(const Json& j);
};

/// Collects artifacts under one output directory and writes manifest.json.
class RunContext {
 public:
  RunContext(const ExperimentConfig& config, std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  const ExperimentConfig& config() const { return config_; }
  RunManifest& manifest() { return manifest_; }

  /// Metadata shared by every sidecar: config hash, grid, contrast.
  Json base_meta(const Domain& domain) const;

  void array(const std::string& name, std::span<const double> values,
             const std::vector<std::size_t>& shape, const Json& meta);
  void trace(const std::string& stem, const BoundaryTrace& trace, const Json& meta);
  void csv(const std::string& name, const CsvWriter& table);
  void json(const std::string& name, const Json& j);

  void check(std::string name, bool passed, double value, double bound, std::string detail = "");
  void warn(std::string message);
  void constant(const std::string& key, Json value) { manifest_.constants[key] = std::move(value); }

  /// Stamps the end time, derives the status and writes manifest.json.
  RunManifest finish();

 private:
  void record(const std::filesystem::path& p);

  ExperimentConfig config_;
  std::filesystem::path dir_;
  RunManifest manifest_;
};

/// Runs one experiment and writes its artifacts below `config.output`.
/// NumericalError is caught and recorded as status numerical_failure;
/// ConfigError, GeometryError and PreconditionError propagate.
RunManifest run_experiment(const ExperimentConfig& config);

RunManifest run_forward(const ExperimentConfig& config);
RunManifest run_observe(const ExperimentConfig& config);
RunManifest run_control(const ExperimentConfig& config);
RunManifest run_represent(const ExperimentConfig& config);
RunManifest run_invert(const ExperimentConfig& config);
RunManifest run_scan(const ExperimentConfig& config);

/// Reduced acceptance presets selected by --small.
void apply_small_preset(ExperimentConfig& config);
/// Switches dimension; inclusions fall back to their mean radius.
void set_dimension(ExperimentConfig& config, int dim);

/// Pairs of random star inclusions whose indicators differ by a full unit
/// somewhere on the mesh (the second is a strictly larger radius band).
std::vector<std::pair<StarInclusion, StarInclusion>> scan_pairs(const Domain& domain, const Point& x0,
                                                                std::size_t count, CounterRng& rng,
                                                                int max_mode = 3);

struct ReportSummary {
  CsvWriter table{{}};
  std::string text;
  std::size_t manifests = 0;
  std::size_t warnings = 0;
  RunStatus worst = RunStatus::pass;
};

/// Aggregates every manifest.json below `dir`. Throws ConfigError when none
/// is found. Unreadable manifests and digest mismatches count as warnings;
/// a digest mismatch also marks the summary as an assertion failure.
ReportSummary report(const std::filesystem::path& dir);

}  // namespace paikit
