#include "paikit/wave_dirichlet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "paikit/error.hpp"

namespace paikit {

double NormalTrace::l2_norm_sq() const {
  double s = 0.0;
  for (long n = 0; n <= n_steps; ++n) {
    double tau = (n == 0 || n == n_steps) ? 0.5 * dt : dt;
    for (std::size_t f = 0; f < n_faces; ++f) {
      double v = value(n, f);
      s += tau * weights[f] * v * v;
    }
  }
  return s;
}

Field unknown_values(const Domain& domain, std::span<const double> closed_field) {
  return domain.dirichlet().restrict(closed_field);
}

Field face_normal_derivative(const DirichletMesh& mesh, std::span<const double> u,
                             std::span<const double> g) {
  auto faces = mesh.faces();
  Field d(faces.size());
  const double h = mesh.h();
  for (std::size_t k = 0; k < faces.size(); ++k) {
    const auto& f = faces[k];
    double gv = g.empty() ? 0.0 : g[k];
    double a = f.theta * h;
    double u1 = u[f.unknown];
    double deriv;
    if (f.inner >= 0) {
      double b = a + h;
      deriv = gv * (1.0 / a + 1.0 / b) - u1 * b / (a * h) + u[f.inner] * a / (b * h);
    } else {
      deriv = (gv - u1) / a;
    }
    d[k] = deriv / f.cos_normal;
  }
  return d;
}

double dirichlet_energy(const Domain& domain, const SpeedField& speed, std::span<const double> u,
                        std::span<const double> ut) {
  const auto& dm = domain.dirichlet();
  Field ci2 = unknown_values(domain, speed.c_inv2);
  double e = dm.stiffness_energy(u);
  auto m = dm.mass();
  for (std::size_t i = 0; i < dm.size(); ++i) e += m[i] * ci2[i] * ut[i] * ut[i];
  return e;
}

DirichletResult simulate_dirichlet(const SpeedField& speed, const Domain& domain,
                                   const DirichletProblem& pb, const DirichletOptions& opts) {
  const auto& dm = domain.dirichlet();
  const std::size_t n = dm.size();
  const std::size_t nf = dm.faces().size();
  if (pb.u0.size() != n || pb.u1.size() != n)
    throw PreconditionError("Dirichlet data must live on the interior unknowns");
  const TimeGrid tg = time_grid(domain, speed, pb.T, pb.cfl_factor);
  const double dt = tg.dt;
  const long N = tg.n_steps;
  const bool back = pb.backward;
  auto phys = [&](long s) { return back ? N - s : s; };

  Field ci2 = unknown_values(domain, speed.c_inv2);
  Field c2 = unknown_values(domain, speed.c2);
  auto mass = dm.mass();
  Field W(n), Winv(n);
  for (std::size_t i = 0; i < n; ++i) {
    W[i] = mass[i] * ci2[i];
    Winv[i] = 1.0 / W[i];
  }

  DirichletResult res;
  res.dt = dt;
  res.n_steps = N;
  auto& tr = res.trace;
  tr.dt = dt;
  tr.n_steps = N;
  tr.n_faces = nf;
  for (const auto& f : dm.faces()) {
    tr.weights.push_back(f.weight);
    tr.positions.push_back(f.position);
    tr.normals.push_back(f.normal);
  }
  if (opts.record_trace) tr.values.assign((N + 1) * nf, 0.0);

  Field F(n, 0.0), G(nf, 0.0), Ku(n);
  auto load = [&](long s) {
    bool has_f = false, has_g = false;
    if (pb.source) {
      std::fill(F.begin(), F.end(), 0.0);
      pb.source(phys(s), F);
      has_f = true;
    }
    if (pb.boundary) {
      std::fill(G.begin(), G.end(), 0.0);
      pb.boundary(phys(s), G);
      has_g = true;
    }
    return std::make_pair(has_f, has_g);
  };
  // Acceleration term dt^2 W^-1 (-K u + kappa g + M F) for run level s.
  Field acc(n);
  auto acceleration = [&](const Field& u, long s) {
    auto [has_f, has_g] = load(s);
    dm.apply_stiffness(u, Ku);
    for (std::size_t i = 0; i < n; ++i) acc[i] = -Ku[i] + (has_f ? mass[i] * F[i] : 0.0);
    if (has_g) dm.add_boundary_coupling(G, 1.0, acc);
    return has_g;
  };
  auto record_trace = [&](long s, const Field& u, bool has_g) {
    if (!opts.record_trace) return;
    Field d = face_normal_derivative(dm, u, has_g ? std::span<const double>(G) : std::span<const double>());
    std::copy(d.begin(), d.end(), tr.values.begin() + phys(s) * nf);
  };

  Field l0 = pb.u0, l1(n);
  bool g0 = acceleration(l0, 0);
  record_trace(0, l0, g0);
  if (pb.two_level) {
    l1 = pb.u1;
  } else {
    const double sgn = back ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i)
      l1[i] = l0[i] + dt * sgn * pb.u1[i] + 0.5 * dt * dt * Winv[i] * acc[i];
  }
  if (!all_finite(l1)) throw NumericalError("non-finite field after startup", 1);

  const long stride = opts.store_stride;
  auto due = [&](long s) {
    long p = phys(s);
    return stride > 0 && (p % stride == 0 || p == N || p == 0);
  };
  std::vector<std::pair<long, Field>> snaps;
  std::vector<Field> snap_pt;
  const double vsign = back ? -1.0 : 1.0;
  auto store = [&](long s, const Field& u, Field pt) {
    snaps.emplace_back(phys(s), u);
    snap_pt.push_back(std::move(pt));
  };

  auto half_energy = [&](const Field& lo, const Field& hi) {
    Field v(n), m(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = (hi[i] - lo[i]) / dt;
      m[i] = 0.5 * (hi[i] + lo[i]);
    }
    double e = dm.stiffness_energy(m) - 0.25 * dt * dt * dm.stiffness_energy(v);
    double alt = dm.stiffness_energy(m, c2);
    for (std::size_t i = 0; i < n; ++i) {
      e += W[i] * v[i] * v[i];
      alt += mass[i] * v[i] * v[i];
    }
    res.energy.push_back(e);
    res.energy_alt.push_back(alt);
  };

  if (opts.observer) opts.observer(phys(0), l0);
  half_energy(l0, l1);

  Field start0 = l0, start1 = l1, start2;
  Field prev = l0, cur = l1, next(n);
  Field lastm2;
  if (due(0)) {
    Field pt(n);
    if (!pb.two_level) {
      pt = pb.u1;
    } else {
      for (std::size_t i = 0; i < n; ++i) pt[i] = vsign * (l1[i] - l0[i]) / dt;
    }
    store(0, l0, std::move(pt));
  }

  for (long s = 1; s < N; ++s) {
    bool gs = acceleration(cur, s);
    record_trace(s, cur, gs);
    if (opts.observer) opts.observer(phys(s), cur);
    const double dt2 = dt * dt;
    for (std::size_t i = 0; i < n; ++i) next[i] = 2.0 * cur[i] - prev[i] + dt2 * Winv[i] * acc[i];
    if (!all_finite(next)) throw NumericalError("non-finite field detected", phys(s + 1));
    half_energy(cur, next);
    if (due(s)) {
      Field pt(n);
      for (std::size_t i = 0; i < n; ++i) pt[i] = vsign * (next[i] - prev[i]) / (2.0 * dt);
      store(s, cur, std::move(pt));
    }
    if (s == 1) start2 = next;
    if (s == N - 1) lastm2 = prev;
    std::swap(prev, cur);
    std::swap(cur, next);
  }
  // Level N (cur), with N-1 in prev.
  {
    bool gN = false;
    if (pb.boundary) {
      std::fill(G.begin(), G.end(), 0.0);
      pb.boundary(phys(N), G);
      gN = true;
    }
    record_trace(N, cur, gN);
    if (opts.observer) opts.observer(phys(N), cur);
  }
  if (start2.empty()) start2 = cur;
  Field d_start(n), d_end(n);
  for (std::size_t i = 0; i < n; ++i) {
    d_start[i] = (-3.0 * start0[i] + 4.0 * start1[i] - start2[i]) / (2.0 * dt);
    d_end[i] = (3.0 * cur[i] - 4.0 * prev[i] + lastm2[i]) / (2.0 * dt);
  }
  if (due(N)) {
    Field pt(n);
    for (std::size_t i = 0; i < n; ++i) pt[i] = vsign * d_end[i];
    store(N, cur, std::move(pt));
  }

  if (!back) {
    res.u_first = start0;
    res.u_second = start1;
    res.u_penultimate = prev;
    res.u_last = cur;
    res.velocity_start = pb.two_level ? d_start : pb.u1;
    res.velocity_end = d_end;
  } else {
    res.u_first = cur;
    res.u_second = prev;
    res.u_penultimate = start1;
    res.u_last = start0;
    res.velocity_end = pb.two_level ? Field(d_start.size()) : pb.u1;
    if (pb.two_level)
      for (std::size_t i = 0; i < n; ++i) res.velocity_end[i] = -d_start[i];
    res.velocity_start = d_end;
    for (auto& v : res.velocity_start) v = -v;
    std::reverse(res.energy.begin(), res.energy.end());
    std::reverse(res.energy_alt.begin(), res.energy_alt.end());
    std::reverse(snaps.begin(), snaps.end());
    std::reverse(snap_pt.begin(), snap_pt.end());
  }
  auto& traj = res.trajectory;
  traj.dt = dt;
  traj.n_steps = N;
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    traj.steps.push_back(snaps[k].first);
    traj.p.push_back(std::move(snaps[k].second));
    traj.pt.push_back(std::move(snap_pt[k]));
  }
  return res;
}

NormalTrace normal_trace(const WaveTrajectory& traj, const Domain& domain,
                         const std::function<void(long, std::span<double>)>& boundary) {
  const auto& dm = domain.dirichlet();
  const long N = traj.n_steps;
  if (static_cast<long>(traj.steps.size()) != N + 1)
    throw PreconditionError("normal trace needs every time level of the trajectory");
  for (long k = 0; k <= N; ++k)
    if (traj.steps[k] != k) throw PreconditionError("normal trace needs every time level of the trajectory");
  NormalTrace tr;
  tr.dt = traj.dt;
  tr.n_steps = N;
  tr.n_faces = dm.faces().size();
  for (const auto& f : dm.faces()) {
    tr.weights.push_back(f.weight);
    tr.positions.push_back(f.position);
    tr.normals.push_back(f.normal);
  }
  tr.values.resize((N + 1) * tr.n_faces);
  Field g(tr.n_faces, 0.0);
  for (long k = 0; k <= N; ++k) {
    if (traj.p[k].size() != dm.size()) throw PreconditionError("trajectory is not on the interior unknowns");
    if (boundary) {
      std::fill(g.begin(), g.end(), 0.0);
      boundary(k, g);
    }
    Field d = face_normal_derivative(dm, traj.p[k], boundary ? std::span<const double>(g)
                                                             : std::span<const double>());
    std::copy(d.begin(), d.end(), tr.values.begin() + k * tr.n_faces);
  }
  return tr;
}

TranspositionReport transposition_check(const SpeedField& speed, const Domain& domain,
                                        std::span<const double> psi0, std::span<const double> psi1,
                                        const std::function<void(long, std::span<double>)>& g,
                                        const std::function<void(long, std::span<double>)>& F,
                                        double T, double cfl_factor) {
  const auto& dm = domain.dirichlet();
  const std::size_t n = dm.size();
  Field ci2 = unknown_values(domain, speed.c_inv2);
  auto mass = dm.mass();
  TranspositionReport rep;

  // psi solves c^-2 psi_tt - lap psi = 0 with boundary data g.
  DirichletProblem pp;
  pp.u0.assign(psi0.begin(), psi0.end());
  pp.u1.assign(psi1.begin(), psi1.end());
  pp.boundary = g;
  pp.T = T;
  pp.cfl_factor = cfl_factor;
  const TimeGrid tg = time_grid(domain, speed, T, cfl_factor);
  Field Fbuf(n);
  DirichletOptions po;
  po.record_trace = false;
  po.observer = [&](long step, std::span<const double> psi) {
    if (!F) return;
    std::fill(Fbuf.begin(), Fbuf.end(), 0.0);
    F(step, Fbuf);
    double tau = (step == 0 || step == tg.n_steps) ? 0.5 * tg.dt : tg.dt;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += mass[i] * ci2[i] * psi[i] * Fbuf[i];
    rep.lhs += tau * s;
  };
  simulate_dirichlet(speed, domain, pp, po);

  // v_F solves c^-2 v_tt - lap v = c^-2 F backward from zero final data.
  DirichletProblem vp;
  vp.u0.assign(n, 0.0);
  vp.u1.assign(n, 0.0);
  vp.T = T;
  vp.cfl_factor = cfl_factor;
  vp.backward = true;
  if (F)
    vp.source = [&](long step, std::span<double> out) {
      F(step, out);
      for (std::size_t i = 0; i < n; ++i) out[i] *= ci2[i];
    };
  DirichletResult v = simulate_dirichlet(speed, domain, vp);

  double t0 = 0.0, t1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    t0 -= mass[i] * ci2[i] * psi0[i] * v.velocity_start[i];
    t1 += mass[i] * ci2[i] * psi1[i] * v.u_first[i];
  }
  rep.term_psi0 = t0;
  rep.term_psi1 = t1;
  if (g) {
    Field gb(v.trace.n_faces);
    for (long k = 0; k <= v.n_steps; ++k) {
      std::fill(gb.begin(), gb.end(), 0.0);
      g(k, gb);
      double tau = (k == 0 || k == v.n_steps) ? 0.5 * v.dt : v.dt;
      double s = 0.0;
      for (std::size_t f = 0; f < gb.size(); ++f) s += v.trace.weights[f] * v.trace.value(k, f) * gb[f];
      rep.term_flux -= tau * s;
    }
  }
  rep.rhs = rep.term_psi0 + rep.term_psi1 + rep.term_flux;
  double scale = std::max({std::abs(rep.lhs), std::abs(rep.term_psi0), std::abs(rep.term_psi1),
                           std::abs(rep.term_flux)});
  rep.defect_rel = scale > 0.0 ? std::abs(rep.lhs - rep.rhs) / scale : 0.0;
  return rep;
}

}  // namespace paikit
