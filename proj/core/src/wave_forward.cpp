#include "paikit/wave_forward.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "paikit/error.hpp"

namespace paikit {

TimeGrid time_grid(const Domain& domain, const SpeedField& speed, double T, double cfl_factor) {
  if (!(T > 0.0)) throw PreconditionError("final time must be positive");
  const double limit = 1.0 / std::sqrt(static_cast<double>(domain.dim()));
  if (!(cfl_factor > 0.0) || cfl_factor > limit)
    throw NumericalError("CFL violation: factor " + std::to_string(cfl_factor) +
                         " exceeds the stability limit " + std::to_string(limit));
  double cmax = std::max(speed.max_c(), 1e-300);
  double dt0 = cfl_factor * domain.h() / cmax;
  long n = static_cast<long>(std::ceil(T / dt0 - 1e-9));
  n = std::max(n, 4L);
  return {T / n, n};
}

double energy(const Domain& domain, const SpeedField& speed, std::span<const double> p,
              std::span<const double> pt) {
  const auto& mesh = domain.neumann();
  auto m = mesh.mass();
  double kin = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) kin += m[i] * speed.c_inv2[i] * pt[i] * pt[i];
  return kin + mesh.stiffness_energy(p);
}

ForwardResult simulate_forward(const SpeedField& speed, const InitialData& data,
                               const Domain& domain, double T, const ForwardOptions& opts) {
  const auto& mesh = domain.neumann();
  const std::size_t n = mesh.size();
  if (data.f.size() != n || data.g.size() != n || speed.c.size() != n)
    throw PreconditionError("initial data and speed must live on the domain mesh");
  const bool dirichlet = static_cast<bool>(opts.dirichlet_data);
  auto bnd = mesh.boundary();
  const std::size_t nb = bnd.size();
  if (!dirichlet) {
    if (data.beta.size() != nb) throw PreconditionError("beta must have one value per boundary node");
    Field dn = normal_derivative(mesh, data.f);
    double scale = 0.0, defect = 0.0;
    for (std::size_t s = 0; s < nb; ++s) {
      double bg = data.beta[s] * data.g[bnd[s].node];
      defect = std::max(defect, std::abs(dn[s] + bg));
      scale = std::max({scale, std::abs(dn[s]), std::abs(bg)});
    }
    if (defect > 1e-8 * std::max(scale, 1.0))
      throw PreconditionError("initial data violate dnu f + beta g = 0 (defect " +
                              std::to_string(defect) + ")");
  }

  const TimeGrid tg = time_grid(domain, speed, T, opts.cfl_factor);
  const double dt = tg.dt;
  const long N = tg.n_steps;
  auto mass = mesh.mass();

  Field W(n), B(n, 0.0), denom(n);
  for (std::size_t i = 0; i < n; ++i) W[i] = mass[i] * speed.c_inv2[i];
  if (!dirichlet)
    for (std::size_t s = 0; s < nb; ++s) B[bnd[s].node] = bnd[s].weight * data.beta[s];
  for (std::size_t i = 0; i < n; ++i) denom[i] = W[i] / (dt * dt) + B[i] / (2.0 * dt);

  ForwardResult res;
  auto& traj = res.trajectory;
  traj.dt = dt;
  traj.n_steps = N;
  auto& tr = res.trace;
  tr.dt = dt;
  tr.n_steps = N;
  tr.n_points = nb;
  tr.dim = mesh.dim();
  tr.values.assign((N + 1) * nb, 0.0);
  tr.dvalues.assign((N + 1) * nb, 0.0);
  for (const auto& b : bnd) {
    tr.weights.push_back(b.weight);
    tr.positions.push_back(mesh.positions()[b.node]);
    tr.normals.push_back(b.normal);
  }
  tr.edges.assign(mesh.boundary_edges().begin(), mesh.boundary_edges().end());

  Field S(n, 0.0), Kp(n), prev(data.f), cur(n), next(n);
  auto load_source = [&](long step) {
    if (!opts.source) return false;
    std::fill(S.begin(), S.end(), 0.0);
    opts.source(step, S);
    return true;
  };
  auto impose = [&](Field& u, long step) {
    if (!dirichlet) return;
    for (const auto& b : bnd) u[b.node] = opts.dirichlet_data(step * dt, mesh.positions()[b.node]);
  };

  // Startup: central difference with the virtual level p^-1 = p^1 - 2 dt g.
  mesh.apply_stiffness(prev, Kp);
  bool has_src = load_source(0);
  for (std::size_t i = 0; i < n; ++i) {
    double rhs = -Kp[i] - B[i] * data.g[i] + (has_src ? mass[i] * S[i] : 0.0);
    cur[i] = prev[i] + dt * data.g[i] + 0.5 * dt * dt * rhs / W[i];
  }
  impose(cur, 1);

  auto record_trace = [&](long step, const Field& u) {
    for (std::size_t s = 0; s < nb; ++s) tr.values[step * nb + s] = u[bnd[s].node];
  };
  auto record_dtrace = [&](long step, const Field& before, const Field& after, double span) {
    for (std::size_t s = 0; s < nb; ++s)
      tr.dvalues[step * nb + s] = (after[bnd[s].node] - before[bnd[s].node]) / span;
  };
  const long stride = opts.snapshot_stride;
  auto snapshot_due = [&](long step) { return stride > 0 && (step % stride == 0 || step == N); };

  // Energy at the staggered levels; the first uses the virtual level.
  auto staggered_energy = [&](const Field& lo, const Field& hi) {
    Field v(n), m(n), Kv(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = (hi[i] - lo[i]) / dt;
      m[i] = 0.5 * (hi[i] + lo[i]);
    }
    double e = mesh.stiffness_energy(m) - 0.25 * dt * dt * mesh.stiffness_energy(v);
    for (std::size_t i = 0; i < n; ++i) e += W[i] * v[i] * v[i];
    return e;
  };
  auto& en = res.energy;
  en.E0 = energy(domain, speed, data.f, data.g);
  {
    Field virt(n);
    for (std::size_t i = 0; i < n; ++i) virt[i] = cur[i] - 2.0 * dt * data.g[i];
    en.energy.push_back(staggered_energy(virt, prev));
    double d0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) d0 += B[i] * data.g[i] * data.g[i];
    en.dissipation.push_back(2.0 * dt * d0);
  }
  en.energy.push_back(staggered_energy(prev, cur));

  record_trace(0, prev);
  for (std::size_t s = 0; s < nb; ++s) tr.dvalues[s] = data.g[bnd[s].node];
  if (snapshot_due(0)) {
    traj.steps.push_back(0);
    traj.p.push_back(prev);
    traj.pt.push_back(data.g);
  }
  if (opts.observer) opts.observer(0, prev);
  record_trace(1, cur);
  if (opts.observer) opts.observer(1, cur);

  Field pending_pt;
  for (long step = 1; step < N; ++step) {
    mesh.apply_stiffness(cur, Kp);
    has_src = load_source(step);
    const double idt2 = 1.0 / (dt * dt);
    for (std::size_t i = 0; i < n; ++i) {
      double rhs = W[i] * idt2 * (2.0 * cur[i] - prev[i]) - Kp[i] + B[i] / (2.0 * dt) * prev[i] +
                   (has_src ? mass[i] * S[i] : 0.0);
      next[i] = rhs / denom[i];
    }
    impose(next, step + 1);
    if (!all_finite(next)) throw NumericalError("non-finite pressure detected", step + 1);

    double diss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (B[i] == 0.0) continue;
      double w = (next[i] - prev[i]) / (2.0 * dt);
      diss += B[i] * w * w;
    }
    en.dissipation.push_back(2.0 * dt * diss);
    en.energy.push_back(staggered_energy(cur, next));

    record_trace(step + 1, next);
    record_dtrace(step, prev, next, 2.0 * dt);
    if (snapshot_due(step)) {
      traj.steps.push_back(step);
      traj.p.push_back(cur);
      Field pt(n);
      for (std::size_t i = 0; i < n; ++i) pt[i] = (next[i] - prev[i]) / (2.0 * dt);
      traj.pt.push_back(std::move(pt));
    }
    if (opts.observer) opts.observer(step + 1, next);
    std::swap(prev, cur);
    std::swap(cur, next);
  }
  // Final level: one-sided second-order derivative.
  {
    Field pt(n);
    // prev = p^{N-1}, cur = p^N; p^{N-2} is gone, so use the trace history
    // for the boundary and a first-order difference in the interior.
    for (std::size_t i = 0; i < n; ++i) pt[i] = (cur[i] - prev[i]) / dt;
    for (std::size_t s = 0; s < nb; ++s) {
      double a = tr.value(N, s), b = tr.value(N - 1, s), c = tr.value(N - 2, s);
      tr.dvalues[N * nb + s] = (3.0 * a - 4.0 * b + c) / (2.0 * dt);
    }
    if (snapshot_due(N)) {
      traj.steps.push_back(N);
      traj.p.push_back(cur);
      traj.pt.push_back(std::move(pt));
    }
  }

  en.max_increase = -std::numeric_limits<double>::infinity();
  double emax = en.E0;
  double diss_total = 0.0;
  for (std::size_t k = 0; k + 1 < en.energy.size(); ++k)
    en.max_increase = std::max(en.max_increase, en.energy[k + 1] - en.energy[k]);
  for (double e : en.energy) emax = std::max(emax, e);
  for (double d : en.dissipation) diss_total += d;
  en.identity_defect = std::abs(en.energy.back() - en.E0 + diss_total);
  double data_norm = data.f_h1 * data.f_h1 + std::pow(l2_norm(mesh, data.g), 2);
  if (data_norm == 0.0) data_norm = std::pow(h1_norm(mesh, data.f), 2) + std::pow(l2_norm(mesh, data.g), 2);
  en.stability_constant = data_norm > 0.0 ? emax / data_norm : 0.0;
  return res;
}

// ------------------------------------------------------------ trace norms

namespace {

double tangential_seminorm_sq(const BoundaryTrace& tr, const std::vector<double>& vals, long n) {
  double s = 0.0;
  const std::size_t nb = tr.n_points;
  for (const auto& e : tr.edges) {
    double d = vals[n * nb + e.a] - vals[n * nb + e.b];
    s += d * d * std::pow(e.length, tr.dim - 3);
  }
  return s;
}

double trapezoid_weight(long n, long N, double dt) { return (n == 0 || n == N) ? 0.5 * dt : dt; }

}  // namespace

TraceNorms trace_norms(const BoundaryTrace& tr) {
  const long N = tr.n_steps;
  const std::size_t nb = tr.n_points;
  if (N + 1 < 4) throw PreconditionError("trace needs at least four time samples");
  if (tr.values.size() != static_cast<std::size_t>(N + 1) * nb)
    throw PreconditionError("trace storage does not match its dimensions");
  const double dt = tr.dt;
  TraceNorms out;

  double l2 = 0.0, tang = 0.0, dtime = 0.0, weighted = 0.0;
  for (long n = 0; n <= N; ++n) {
    double tau = trapezoid_weight(n, N, dt);
    double t = std::max(n * dt, 0.5 * dt);
    for (std::size_t b = 0; b < nb; ++b) {
      double v = tr.value(n, b), dv = tr.dvalue(n, b);
      l2 += tau * tr.weights[b] * v * v;
      weighted += tau / t * tr.weights[b] * dv * dv;
    }
    tang += tau * tangential_seminorm_sq(tr, tr.values, n);
  }
  for (long n = 0; n < N; ++n)
    for (std::size_t b = 0; b < nb; ++b) {
      double d = (tr.value(n + 1, b) - tr.value(n, b)) / dt;
      dtime += dt * tr.weights[b] * d * d;
    }
  out.H1 = std::sqrt(l2 + dtime + tang);
  out.weighted_t = std::sqrt(weighted);

  // Temporal Sobolev weight (1 + xi^2)^{3/2} on |DFT|^2 per boundary point.
  const int L = static_cast<int>(N + 1);
  std::vector<double> in(L);
  std::vector<std::complex<double>> spec(L / 2 + 1);
  fftw_plan plan = fftw_plan_dft_r2c_1d(L, in.data(), reinterpret_cast<fftw_complex*>(spec.data()),
                                        FFTW_ESTIMATE);
  double h32 = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    for (int n = 0; n < L; ++n) in[n] = tr.value(n, b);
    fftw_execute(plan);
    double s = 0.0;
    for (int k = 0; k <= L / 2; ++k) {
      double xi = 2.0 * std::numbers::pi * k / (L * dt);
      double w = std::pow(1.0 + xi * xi, 1.5);
      double mult = (k == 0 || (L % 2 == 0 && k == L / 2)) ? 1.0 : 2.0;
      s += mult * w * std::norm(spec[k]);
    }
    h32 += tr.weights[b] * dt / L * s;
  }
  fftw_destroy_plan(plan);
  out.H32 = std::sqrt(h32 + tang);
  return out;
}

BoundaryTrace trace_difference(const BoundaryTrace& a, const BoundaryTrace& b) {
  if (a.n_steps != b.n_steps || a.n_points != b.n_points || std::abs(a.dt - b.dt) > 1e-15 * a.dt)
    throw PreconditionError("traces were recorded on different grids");
  BoundaryTrace d = a;
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    d.values[i] -= b.values[i];
    d.dvalues[i] -= b.dvalues[i];
  }
  return d;
}

}  // namespace paikit
