#pragma once

#include <functional>
#include <span>
#include <vector>

#include "paikit/geometry.hpp"
#include "paikit/mesh.hpp"
#include "paikit/wave_forward.hpp"

namespace paikit {

/// Wave problem c^-2 u_tt - lap u = F with Dirichlet data u = g on the
/// boundary faces. All fields live on the DirichletMesh unknowns; boundary
/// data has one value per face.
///
/// Forward runs take (u0, u1) = (u(0), u_t(0)). Backward runs take final
/// data (u(T), u_t(T)) and are realized as forward runs under t -> T - t.
/// With `two_level` the second datum is the neighbouring time level
/// (u at step 1, or at step N-1 for backward runs) instead of a velocity.
struct DirichletProblem {
  Field u0;
  Field u1;
  /// Fill F at physical step n (length = unknowns).
  std::function<void(long, std::span<double>)> source;
  /// Fill g at physical step n (length = faces).
  std::function<void(long, std::span<double>)> boundary;
  double T = 1.0;
  double cfl_factor = 0.5;
  bool backward = false;
  bool two_level = false;
};

/// Outward normal derivative on the boundary faces, time-major.
struct NormalTrace {
  double dt = 0.0;
  long n_steps = 0;
  std::size_t n_faces = 0;
  std::vector<double> values;
  std::vector<double> weights;
  std::vector<Point> positions;
  std::vector<Point> normals;

  double value(long n, std::size_t f) const { return values[n * n_faces + f]; }
  /// int_0^T int_boundary |dnu u|^2 (trapezoid in time).
  double l2_norm_sq() const;
};

struct DirichletOptions {
  /// Store every `store_stride`-th level (0: none). Steps are physical.
  long store_stride = 0;
  bool record_trace = true;
  /// Called with (physical step, u) in the order the levels are computed.
  std::function<void(long, std::span<const double>)> observer;
};

struct DirichletResult {
  WaveTrajectory trajectory;
  NormalTrace trace;
  /// Conserved energy int c^-2 u_t^2 + |grad u|^2 at half levels, in
  /// physical time order (entry k at t = (k + 1/2) dt).
  std::vector<double> energy;
  /// Diagnostic int u_t^2 + c^2 |grad u|^2 at the same half levels.
  std::vector<double> energy_alt;
  double dt = 0.0;
  long n_steps = 0;
  // Levels at physical steps 0, 1, N-1, N and one-sided velocities.
  Field u_first, u_second, u_penultimate, u_last;
  Field velocity_start, velocity_end;
};

DirichletResult simulate_dirichlet(const SpeedField& speed, const Domain& domain,
                                   const DirichletProblem& problem,
                                   const DirichletOptions& opts = {});

/// Outward normal derivative at every face from unknown values `u` and face
/// values `g` (empty: zero). One-sided second-order along the face axis,
/// divided by nu . e (exact for affine fields on rectangles).
Field face_normal_derivative(const DirichletMesh& mesh, std::span<const double> u,
                             std::span<const double> g = {});

/// Recompute a NormalTrace from stored trajectory levels (stride 1 required).
NormalTrace normal_trace(const WaveTrajectory& trajectory, const Domain& domain,
                         const std::function<void(long, std::span<double>)>& boundary = {});

/// Conserved energy of a state on the Dirichlet unknowns.
double dirichlet_energy(const Domain& domain, const SpeedField& speed, std::span<const double> u,
                        std::span<const double> ut);

/// Speed-dependent coefficients restricted to the unknowns.
Field unknown_values(const Domain& domain, std::span<const double> closed_field);

struct TranspositionReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double term_psi0 = 0.0;   // -<psi0, dt v_F(0)>
  double term_psi1 = 0.0;   // <psi1, v_F(0)>
  double term_flux = 0.0;   // -int int dnu v_F g
  double defect_rel = 0.0;  // |lhs - rhs| / max(|lhs|, |terms|)
};

/// Checks the transposition identity for psi (data psi0, psi1, boundary g,
/// solving psi_tt - c^2 lap psi = 0) against v_F (solving
/// v_tt - c^2 lap v = F backward from zero final data). F is given in this
/// non-divergence form; pairings are c^-2 weighted.
TranspositionReport transposition_check(const SpeedField& speed, const Domain& domain,
                                        std::span<const double> psi0, std::span<const double> psi1,
                                        const std::function<void(long, std::span<double>)>& g,
                                        const std::function<void(long, std::span<double>)>& F,
                                        double T, double cfl_factor = 0.5);

}  // namespace paikit
