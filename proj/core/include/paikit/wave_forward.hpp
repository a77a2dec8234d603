#pragma once

#include <functional>
#include <span>
#include <vector>

#include "paikit/geometry.hpp"
#include "paikit/initial_data.hpp"
#include "paikit/mesh.hpp"

namespace paikit {

/// Time-stamped interior fields. Snapshot k holds p and dp/dt at step
/// `steps[k]`.
struct WaveTrajectory {
  double dt = 0.0;
  long n_steps = 0;
  std::vector<long> steps;
  std::vector<Field> p;
  std::vector<Field> pt;
};

/// Boundary recordings, time-major: entry (n, b) at n * n_points + b.
struct BoundaryTrace {
  double dt = 0.0;
  long n_steps = 0;
  std::size_t n_points = 0;
  int dim = 2;
  std::vector<double> values;
  std::vector<double> dvalues;
  std::vector<double> weights;
  std::vector<Point> positions;
  std::vector<Point> normals;
  std::vector<BoundaryEdge> edges;

  double value(long n, std::size_t b) const { return values[n * n_points + b]; }
  double dvalue(long n, std::size_t b) const { return dvalues[n * n_points + b]; }
  double T() const { return dt * n_steps; }
};

/// Discrete energy history of a damped run.
///
/// `energy[k]` is the conserved-form energy at t = (k - 1/2) dt, k = 0..N;
/// it is exactly non-increasing without sources. `dissipation[k]` is the
/// boundary loss between energy[k] and energy[k+1].
struct EnergyReport {
  double E0 = 0.0;  // energy(f, g) at t = 0
  std::vector<double> energy;
  std::vector<double> dissipation;
  double max_increase = 0.0;       // max_k energy[k+1] - energy[k]
  double identity_defect = 0.0;    // |E_N - E0 + sum dissipation|
  double stability_constant = 0.0; // max energy / (||f||_H1^2 + ||g||_L2^2)
};

struct ForwardOptions {
  double cfl_factor = 0.5;
  /// Store interior snapshots every `snapshot_stride` steps (0: none).
  long snapshot_stride = 0;
  /// Replace the damped boundary by prescribed values g(t, x) on every
  /// boundary node (comparison mode for convergence tests).
  std::function<double(double, const Point&)> dirichlet_data;
  /// Optional interior source: fill `out` with S(t_n) at nodes.
  std::function<void(long, std::span<double>)> source;
  /// Called after p^n is known for n = 0..N.
  std::function<void(long, std::span<const double>)> observer;
};

struct ForwardResult {
  WaveTrajectory trajectory;
  BoundaryTrace trace;
  EnergyReport energy;
};

/// Time step and step count used for a run of length T.
struct TimeGrid {
  double dt;
  long n_steps;
};
TimeGrid time_grid(const Domain& domain, const SpeedField& speed, double T, double cfl_factor);

/// Damped-boundary wave equation c^-2 p_tt - lap p = S with
/// dnu p + beta p_t = 0, p(0) = f, p_t(0) = g.
ForwardResult simulate_forward(const SpeedField& speed, const InitialData& data,
                               const Domain& domain, double T, const ForwardOptions& opts = {});

/// E = int c^-2 |p_t|^2 + |grad p|^2 on the closed mesh.
double energy(const Domain& domain, const SpeedField& speed, std::span<const double> p,
              std::span<const double> pt);

struct TraceNorms {
  double H1 = 0.0;
  double H32 = 0.0;
  double weighted_t = 0.0;
};

/// Boundary norms of a trace on (0, T) x boundary.
TraceNorms trace_norms(const BoundaryTrace& trace);
/// Pointwise difference of two traces recorded on the same grid.
BoundaryTrace trace_difference(const BoundaryTrace& a, const BoundaryTrace& b);

}  // namespace paikit
