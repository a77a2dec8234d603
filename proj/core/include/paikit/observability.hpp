#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "paikit/geometry.hpp"
#include "paikit/random.hpp"
#include "paikit/wave_dirichlet.hpp"

namespace paikit {

/// Both sides of the observability inequality for one Dirichlet run.
struct ObservabilityReport {
  double lhs = 0.0;       // int |u1|^2 + c^2 |grad u0|^2
  double flux = 0.0;      // int_0^T int_boundary |dnu u|^2
  double source = 0.0;    // int_0^T int |F|^2
  double constant = 0.0;  // 2 C(x0) / (T a^2 - 2 C(x0))
  double ratio = 0.0;     // lhs / (constant (flux + source)); 0 for zero data
  /// Variant with the weights of the multiplier argument's last display:
  /// lhs (T - 2 C a^-2) / (C flux + 2 C source).
  double proof_ratio = 0.0;
  double T = 0.0;
  double a = 1.0;
  double C_x0 = 0.0;
  /// False when T <= 2 C(x0) a^-2: the numbers are exploratory only.
  bool certified = false;
  std::string warning;
};

struct ObservabilityOptions {
  double cfl_factor = 0.5;
  /// Accept a == 1 (constant speed) as a baseline run.
  bool allow_degenerate = true;
};

/// Runs the Dirichlet problem c^-2 u_tt - lap u = F with data (u0, u1) on
/// the unknowns and evaluates the inequality with star centre x0.
ObservabilityReport observability_ratio(const SpeedField& speed, const Domain& domain,
                                        std::span<const double> u0, std::span<const double> u1,
                                        const std::function<void(long, std::span<double>)>& F,
                                        double T, const Point& x0,
                                        const ObservabilityOptions& opts = {});

struct EnsembleRow {
  double a = 1.0;
  double eccentricity = 0.0;  // max radius / min radius - 1
  double T_over_Tmin = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t member = 0;
  ObservabilityReport report;
};

struct EnsembleSpec {
  std::vector<double> contrasts{0.8, 0.85, 0.9, 0.95};
  /// Inclusion radial coefficients about x0 (same for every member unless
  /// `eccentricities` is non-empty, in which case elliptic-like 2-mode
  /// perturbations r0 (1 + e cos 2 theta) are scanned).
  std::vector<double> inclusion_coeffs;
  std::vector<double> eccentricities;
  std::vector<double> T_factors{1.0};  // multiples of 4 diam
  int samples = 10;
  bool with_source = false;
  bool zero_data = false;
  std::uint64_t seed = 1;
  double cfl_factor = 0.5;
};

struct EnsembleStats {
  std::vector<EnsembleRow> rows;
  double max_ratio = 0.0;
  double max_certified_ratio = 0.0;
  double mean_ratio = 0.0;
};

/// Independent members over (a, shape, T, data) with counter-based seeds.
EnsembleStats observability_ensemble(const Domain& domain, const Point& x0, const EnsembleSpec& spec);

}  // namespace paikit
