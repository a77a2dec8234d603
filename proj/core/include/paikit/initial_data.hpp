#pragma once

#include <span>
#include <utility>
#include <vector>

#include "paikit/geometry.hpp"
#include "paikit/linalg.hpp"
#include "paikit/mesh.hpp"

namespace paikit {

/// Diffusion-approximation optical model with coefficients that jump across
/// the inclusion boundary. The illumination enters through the Robin
/// condition D du/dn + u/2 = q on the outer boundary.
struct OpticalCoefficients {
  double D_out = 0.05;
  double D_in = 0.03;
  double mu_out = 0.2;
  double mu_in = 1.0;
  double grueneisen = 1.0;
  double illumination = 1.0;
  /// Optional per-boundary-node illumination (overrides the constant).
  std::vector<double> illumination_profile;
  double beta = 1.0;   // boundary damping used for the velocity datum
  double M = 1.0e4;    // admissible bound on ||f||_{H^2}

  void validate() const;
  double illumination_at(std::size_t slot) const {
    return illumination_profile.empty() ? illumination : illumination_profile[slot];
  }
};

struct InitialData {
  Field f;
  Field g;
  Field beta;  // one value per boundary node of the closed mesh
  double f_h1 = 0.0;
  double f_h2 = 0.0;
};

/// Assembled diffusion operator for a given indicator.
SparseMatrix diffusion_matrix(const OpticalCoefficients& coeffs, std::span<const double> indicator,
                              const NeumannMesh& mesh);
Field diffusion_rhs(const OpticalCoefficients& coeffs, const NeumannMesh& mesh);

/// Solves the diffusion model and returns f = Gamma * mu * u. When `u_out`
/// is given the fluence u is stored there as well.
Field solve_diffusion(const OpticalCoefficients& coeffs, const SpeedField& speed,
                      const Domain& domain, Field* u_out = nullptr);

/// Given dJ/df, accumulate dJ/d(indicator) for f = solve_diffusion(...).
void diffusion_indicator_gradient(const OpticalCoefficients& coeffs,
                                  std::span<const double> indicator, const Domain& domain,
                                  std::span<const double> u, std::span<const double> dJ_df,
                                  std::span<double> dJ_dind);

/// Discrete outward normal derivative at a boundary node as a short stencil.
std::vector<std::pair<std::uint32_t, double>> normal_derivative_stencil(const NeumannMesh& mesh,
                                                                        std::size_t slot);
/// Outward normal derivative at every boundary node.
Field normal_derivative(const NeumannMesh& mesh, std::span<const double> u);

/// Harmonic velocity datum: discrete Laplace solve with boundary values
/// -dnu f / beta.
Field harmonic_g(std::span<const double> f, std::span<const double> beta, const Domain& domain);
/// Transpose of the linear map f -> harmonic_g(f, beta).
Field harmonic_g_transpose(std::span<const double> dJ_dg, std::span<const double> beta,
                           const Domain& domain);

/// Builds f from the optical model, checks the H^2 bound M, then g.
InitialData make_initial_data(const OpticalCoefficients& coeffs, const SpeedField& speed,
                              const Domain& domain);

// Discrete norms on the closed mesh.
double l2_norm(const NeumannMesh& mesh, std::span<const double> u);
double h1_norm(const NeumannMesh& mesh, std::span<const double> u);
double h2_norm(const NeumannMesh& mesh, std::span<const double> u);

struct CompatibilityReport {
  double p1a = 0.0;          // int c^-2 g + int_boundary beta f
  double p2a = 0.0;          // max |dnu f + beta g| on the boundary
  double p2a_relative = 0.0; // p2a / max(|dnu f|, |beta g|, max|f| / diam)
  bool global_compatible = false;    // both conditions hold (global well-posedness with decay)
  bool boundary_compatible = false;  // only the boundary condition is needed
};

CompatibilityReport check_compatibility(const InitialData& data, const SpeedField& speed,
                                        const Domain& domain, double tol = 1e-8);

struct ProbeResult {
  double d_emp = 0.0;
  std::vector<double> pair_norms;
  bool admissible = false;
};

/// Empirical lower bound d of ||f(c1) - f(c2)||_{H^1} over inclusion pairs.
ProbeResult reverse_inequality_probe(const OpticalCoefficients& model,
                                     std::span<const std::pair<StarInclusion, StarInclusion>> pairs,
                                     double a, const Domain& domain);

}  // namespace paikit
