#pragma once

#include <string>
#include <vector>

#include "paikit/geometry.hpp"
#include "paikit/initial_data.hpp"
#include "paikit/mesh.hpp"
#include "paikit/random.hpp"
#include "paikit/wave_dirichlet.hpp"
#include "paikit/wave_forward.hpp"

namespace paikit {

/// Null-controllability problem for c^-2 phi_tt - lap phi = 0 with
/// phi(0) = 0, phi_t(0) = phi0 and Dirichlet control on the whole boundary.
struct ControlProblem {
  Domain domain;
  SpeedField speed;
  Field phi0;  // on the Dirichlet unknowns
  double T = 0.0;
  double tol = 1e-4;
  int max_iter = 200;
  double cfl_factor = 0.5;
  /// Admit a == 1 (constant speed); testing only.
  bool allow_degenerate = false;

  /// Content digest of everything that determines the control.
  std::string hash() const;
};

struct ControlCertificate {
  /// Boundary control, (n_steps + 1) x n_faces, time-major.
  std::vector<double> control;
  double dt = 0.0;
  long n_steps = 0;
  std::size_t n_faces = 0;
  int iterations = 0;
  bool converged = false;
  double free_energy = 0.0;       // final energy without control
  double final_energy = 0.0;      // final energy with control (CG residual)
  double final_energy_rel = 0.0;  // final_energy / free_energy
  double lambda_norm = 0.0;       // ||control||_{L^2((0,T) x boundary)}
  double phi0_norm = 0.0;         // ||phi0||_{L^2(c^-2)}
  double lambda_norm_emp = 0.0;   // lambda_norm / phi0_norm
  std::vector<double> residual_history;  // relative Q-norm^2 of the CG residual
  std::string problem_hash;
};

/// Linear map R from boundary data to the final pair (u^{N-1}, u^N) of the
/// zero-data Dirichlet leapfrog, with its exact transpose. Pairs are stored
/// as [u^{N-1}; u^N].
class HumOperator {
 public:
  HumOperator(const SpeedField& speed, const Domain& domain, double T, double cfl_factor);

  long n_steps() const { return N_; }
  double dt() const { return dt_; }
  std::size_t unknowns() const { return n_; }
  std::size_t faces() const { return nf_; }

  Field forward(const Field& lambda) const;
  /// Euclidean transpose of forward().
  Field transpose(const Field& pair) const;
  /// Adjoint in the L^2((0,T) x boundary) inner product.
  Field adjoint(const Field& pair) const;
  /// Energy matrix: <y, Q y> is the discrete energy of the pair.
  Field Q(const Field& pair) const;
  double q_dot(const Field& x, const Field& y) const;
  double lambda_dot(const Field& l, const Field& m) const;
  /// A = R R^dagger Q, self-adjoint in the Q inner product.
  Field gramian(const Field& pair) const;

 private:
  const DirichletMesh* mesh_;
  long N_;
  double dt_;
  std::size_t n_, nf_;
  Field W_, Winv_;
};

/// HUM by conjugate residuals (a Krylov method of the conjugate-gradient
/// family) in the energy inner product. Throws PreconditionError for a outside (3/4, 1)
/// (unless degenerate mode is allowed) or T <= 2 C a^-2 for every star
/// centre; NumericalError when max_iter is exhausted.
ControlCertificate hum_control(const ControlProblem& problem);

struct ControlledSolution {
  DirichletResult run;
  double final_energy_rel = 0.0;  // from re-simulation
  double max_l2 = 0.0;            // max_t ||phi(t)||_{L^2}
  double C_emp = 0.0;             // max_l2 / ||phi0||
};

/// Re-simulates phi with the certified control.
ControlledSolution controlled_solution(const ControlProblem& problem,
                                       const ControlCertificate& certificate,
                                       long store_stride = 0);

/// max over probes of |<Ax, y>_Q - <x, Ay>_Q| / (||Ax||_Q ||y||_Q).
double gramian_symmetry_defect(const ControlProblem& problem, CounterRng& rng, int probes = 3);

struct RepresentationResidual {
  double A = 0.0;  // <phi0, f>_{c2^-2}
  double B = 0.0;  // int int control * beta p_t
  double C = 0.0;  // int int dnu phi * p (one-sided differences)
  double D = 0.0;  // int int (c1^-2 - c2^-2) p1_tt phi
  double residual_rel = 0.0;
  /// Flux term from the discrete boundary residual of the Neumann scheme,
  /// and the residual obtained with it.
  double C_disc = 0.0;
  double residual_disc_rel = 0.0;
  double hum_energy_rel = 0.0;
  double boundary_mismatch = 0.0;  // max |f1 - f2| on the boundary / max |f|
};

/// Weak representation identity A + B + C = D for p = p2 - p1 and
/// f = f2 - f1, with phi the controlled solution under the speed of
/// `problem` (c2). Needs boundary-fitted faces (rectangular domains).
RepresentationResidual representation_residual(const ControlProblem& problem,
                                               const ControlCertificate& certificate,
                                               const SpeedField& c1, const InitialData& data1,
                                               const InitialData& data2,
                                               double boundary_tol = 0.1);

}  // namespace paikit
