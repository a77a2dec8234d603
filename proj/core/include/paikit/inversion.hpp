#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "paikit/geometry.hpp"
#include "paikit/initial_data.hpp"
#include "paikit/wave_forward.hpp"

namespace paikit {

/// Single-measurement shape identification: the inclusion is unknown, the
/// contrast a, the optical model and beta are known.
struct InverseProblem {
  Domain domain;
  double a = 0.9;
  OpticalCoefficients optics;
  BoundaryTrace observed;
  double T = 0.0;
  double cfl_factor = 0.5;
  /// Weight of the quadratic penalty on coefficients with index >= reg_from.
  double gamma = 0.0;
  std::size_t reg_from = 3;
  /// Template carrying x0, the number of coefficients and the smoothing width.
  StarInclusion guess;
  /// Width (in time) of a Gaussian low-pass applied to the trace residual
  /// before the norm is taken; 0 compares the raw traces.
  double time_filter = 0.0;
};

/// Everything the forward map produces for one inclusion.
struct ForwardState {
  SpeedField speed;
  Field fluence;
  InitialData data;
  ForwardResult result;
};

/// Forward map inclusion -> (c, f, g, trace). With `levels` every time
/// level of p is stored (needed by the adjoint).
ForwardState forward_state(const StarInclusion& inclusion, const InverseProblem& problem,
                           std::vector<Field>* levels = nullptr);

/// Squared H^1((0,T) x boundary) norm of a trace (values only) and its
/// gradient with respect to the values.
double trace_h1_sq(const BoundaryTrace& trace);
Field trace_h1_sq_gradient(const BoundaryTrace& trace);

/// J = 1/2 ||G (trace(params) - observed)||_H1^2 + gamma sum_{j >= reg_from} params_j^2,
/// G the time filter of the problem (identity by default).
/// Throws GeometryError for parameters that do not define a valid inclusion.
double misfit(std::span<const double> params, const InverseProblem& problem);

struct MisfitGradient {
  double J = 0.0;
  std::vector<double> grad;
};

/// Exact gradient of the discrete misfit: discrete adjoint of the damped
/// leapfrog chained through c^-2, the harmonic velocity datum, the diffusion
/// model and the smoothed indicator.
MisfitGradient adjoint_gradient(std::span<const double> params, const InverseProblem& problem);

struct ReconstructionOptions {
  int max_iter = 100;
  /// Stop when ||grad|| <= tol_g * ||grad at the initial guess||.
  double tol_g = 1e-6;
  /// Stop when J <= tol_J * ||observed||_H1^2.
  double tol_J = 1e-12;
  int memory = 8;
  int max_backtracks = 30;
  double armijo = 1e-4;
  double backtrack = 0.5;
  /// Frequency continuation: time-filter widths (fractions of the domain
  /// diameter) of the stages run before the unfiltered misfit. Each stage
  /// starts from the previous minimizer; iterations count against max_iter.
  std::vector<double> continuation{0.05, 0.0125};
  int stage_max_iter = 30;
  double stage_tol_g = 1e-3;
};

struct ReconstructionResult {
  StarInclusion inclusion_hat;
  std::vector<double> misfit_history;
  std::vector<double> grad_norm_history;
  /// Continuation stage of each history entry; the unfiltered misfit is
  /// stage continuation.size(). J is comparable only within a stage.
  std::vector<int> stage_history;
  int iterations = 0;
  std::string stop_reason;
  bool line_search_failed = false;
  std::optional<double> hausdorff_to_truth;
  Field f_hat;
};

/// Limited-memory quasi-Newton descent with Armijo backtracking, preceded
/// by continuation stages on time-filtered misfits.
ReconstructionResult reconstruct(const InverseProblem& problem, const ReconstructionOptions& opts = {},
                                 const StarInclusion* truth = nullptr);

struct ScanRow {
  std::size_t pair = 0;
  double a = 0.0;
  double indicator_diff_inf = 0.0;  // max |ind1 - ind2| on the mesh
  double one_minus_a = 0.0;
  double lhs1 = 0.0;                // (1 - a) ||ind1 - ind2||_inf
  double h1 = 0.0;                  // ||p1 - p2||_{H^1((0,T) x boundary)}
  double h32 = 0.0;
  double weighted = 0.0;            // ||t^{-1/2} (dt p1 - dt p2)||
  double f_diff_h1 = 0.0;           // ||f1 - f2||_{H^1}
  double hausdorff = 0.0;           // beyond the stated estimate
  double symmetric_difference = 0.0;
};

struct StabilityScanReport {
  std::vector<ScanRow> rows;
  double C_emp1 = 0.0;  // max (1 - a) ||ind diff|| / ||p diff||_H1
  double C_emp2 = 0.0;  // max ||f diff||_H1 / (H32 + weighted)
  double d_emp = 0.0;   // min ||f diff||_H1 / ||ind diff||_inf
  double a0_emp = 0.0;  // max(3/4, 1 - d_emp / (6 C_emp1))
  bool identifiable = true;  // every data difference above 1e-10
};

/// Paired forward solves for each inclusion pair and contrast.
StabilityScanReport stability_scan(std::span<const std::pair<StarInclusion, StarInclusion>> pairs,
                                   std::span<const double> contrasts, const OpticalCoefficients& model,
                                   const Domain& domain, double T, double cfl_factor = 0.5);

}  // namespace paikit
