#pragma once

#include <Eigen/Sparse>
#include <span>

#include "paikit/grid.hpp"

namespace paikit {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Preconditioned conjugate gradient for a symmetric positive definite
/// system. Throws NumericalError if the true relative residual ends above
/// `accept`.
Field solve_spd(const SparseMatrix& A, std::span<const double> b, double tol = 1e-12,
                double accept = 1e-8, SolveStats* stats = nullptr);

/// ||A x - b|| / ||b|| (0 when b == 0 and x == 0).
double relative_residual(const SparseMatrix& A, std::span<const double> x,
                         std::span<const double> b);

}  // namespace paikit
