#include "paikit/linalg.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <string>

#include "paikit/error.hpp"

namespace paikit {

double relative_residual(const SparseMatrix& A, std::span<const double> x,
                         std::span<const double> b) {
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::Map<const Eigen::VectorXd> bv(b.data(), static_cast<Eigen::Index>(b.size()));
  double nb = bv.norm();
  double nr = (A * xv - bv).norm();
  if (nb == 0.0) return nr;
  return nr / nb;
}

Field solve_spd(const SparseMatrix& A, std::span<const double> b, double tol, double accept,
                SolveStats* stats) {
  const auto n = static_cast<Eigen::Index>(b.size());
  Eigen::Map<const Eigen::VectorXd> bv(b.data(), n);
  Field x(b.size(), 0.0);
  if (bv.squaredNorm() == 0.0) {
    if (stats) *stats = {};
    return x;
  }
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper,
                           Eigen::IncompleteCholesky<double>>
      cg;
  cg.setTolerance(tol);
  cg.setMaxIterations(std::max<Eigen::Index>(100, 4 * n));
  cg.compute(A);
  if (cg.info() != Eigen::Success) throw NumericalError("preconditioner factorization failed");
  Eigen::VectorXd sol = cg.solve(bv);
  Eigen::Map<Eigen::VectorXd>(x.data(), n) = sol;
  double res = relative_residual(A, x, b);
  if (stats) *stats = {static_cast<int>(cg.iterations()), res};
  if (!(res <= accept))
    throw NumericalError("elliptic solve did not converge: relative residual " +
                         std::to_string(res) + " after " + std::to_string(cg.iterations()) +
                         " iterations");
  return x;
}

}  // namespace paikit
