#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "paikit/geometry.hpp"
#include "paikit/initial_data.hpp"
#include "paikit/io.hpp"
#include "paikit/mesh.hpp"

namespace paikit {

struct InclusionSpec {
  Point x0{};
  std::vector<double> radial_coeffs;
};

/// Validated experiment configuration (JSON on disk, see configs/schema.json).
struct ExperimentConfig {
  std::string kind = "forward";  // forward | observe | control | represent | invert | scan
  std::uint64_t seed = 1;
  std::string output = "out";

  // geometry
  std::string shape = "disk";  // disk | rectangle
  int dim = 2;
  Point center{0.5, 0.5, 0.5};
  double radius = 0.5;
  Point lo{0.0, 0.0, 0.0};
  Point hi{1.0, 1.0, 1.0};
  double a = 0.9;
  InclusionSpec inclusion;
  std::optional<InclusionSpec> second_inclusion;
  double smoothing_width = -1.0;

  OpticalCoefficients optics;

  // solver
  int resolution = 64;
  double cfl_factor = 0.5;
  std::optional<double> T;

  // experiment parameters (only the ones relevant to `kind` are read)
  int samples = 10;
  std::vector<double> contrasts;
  std::vector<double> eccentricities;
  std::vector<double> T_factors{1.0};
  bool with_source = false;
  std::optional<double> ratio_bound;
  double tol = 1e-4;
  int max_iter = 200;
  bool allow_degenerate = false;
  int probes = 10;
  double residual_tol = 5e-2;
  std::vector<double> guess_coeffs;
  double gamma = -1.0;  // < 0: 1e-6 J(guess) / |guess|^2
  int pairs = 25;

  /// Canonical JSON form (defaults filled in); its digest is the config hash.
  Json to_json() const;
  std::string hash() const;

  Domain make_domain() const;
  /// Star centre of the primary inclusion, unused coordinates zeroed.
  Point x0() const;
  StarInclusion make_inclusion(const InclusionSpec& spec) const;
  /// T override or 4 diam.
  double final_time(const Domain& domain) const;
};

/// Built-in defaults for a subcommand.
ExperimentConfig default_config(const std::string& kind);

/// Parses and validates a config document. Unknown keys, wrong types and
/// out-of-range values raise ConfigError with the field path and, where
/// the text allows it, the line and column.
ExperimentConfig parse_config(const std::string& text, const std::string& kind,
                              const std::string& source_name = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path, const std::string& kind);

}  // namespace paikit
