#include "paikit/control.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "paikit/error.hpp"
#include "paikit/io.hpp"

namespace paikit {

namespace {

void append(std::string& s, double v) {
  char b[sizeof(double)];
  std::memcpy(b, &v, sizeof v);
  s.append(b, sizeof v);
}

void append(std::string& s, std::span<const double> v) {
  append(s, static_cast<double>(v.size()));
  for (double x : v) append(s, x);
}

Point star_centre(const ControlProblem& p) {
  if (p.speed.inclusion) return p.speed.inclusion->x0();
  if (p.domain.shape() == ShapeKind::disk) return p.domain.center();
  return scale(add(p.domain.lo(), p.domain.hi()), 0.5);
}

double tau(long n, long N, double dt) { return (n == 0 || n == N) ? 0.5 * dt : dt; }

}  // namespace

std::string ControlProblem::hash() const {
  std::string s = "paikit-control-v1";
  append(s, static_cast<double>(domain.shape() == ShapeKind::disk ? 1 : 0));
  append(s, static_cast<double>(domain.dim()));
  append(s, static_cast<double>(domain.resolution()));
  append(s, domain.h());
  append(s, std::span<const double>(domain.grid().lo));
  append(s, T);
  append(s, tol);
  append(s, static_cast<double>(max_iter));
  append(s, cfl_factor);
  append(s, speed.a);
  append(s, speed.c_inv2);
  append(s, phi0);
  return sha256_hex(s);
}

// ------------------------------------------------------------ HumOperator

HumOperator::HumOperator(const SpeedField& speed, const Domain& domain, double T, double cfl) {
  mesh_ = &domain.dirichlet();
  TimeGrid tg = time_grid(domain, speed, T, cfl);
  N_ = tg.n_steps;
  dt_ = tg.dt;
  n_ = mesh_->size();
  nf_ = mesh_->faces().size();
  Field ci2 = unknown_values(domain, speed.c_inv2);
  auto m = mesh_->mass();
  W_.resize(n_);
  Winv_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    W_[i] = m[i] * ci2[i];
    Winv_[i] = 1.0 / W_[i];
  }
}

Field HumOperator::forward(const Field& lambda) const {
  if (lambda.size() != static_cast<std::size_t>(N_ + 1) * nf_)
    throw PreconditionError("control has the wrong length");
  const double dt2 = dt_ * dt_;
  Field prev(n_, 0.0), cur(n_, 0.0), next(n_), Ku(n_), acc(n_, 0.0);
  mesh_->add_boundary_coupling(std::span<const double>(lambda.data(), nf_), 1.0, acc);
  for (std::size_t i = 0; i < n_; ++i) cur[i] = 0.5 * dt2 * Winv_[i] * acc[i];
  for (long s = 1; s < N_; ++s) {
    mesh_->apply_stiffness(cur, Ku);
    for (std::size_t i = 0; i < n_; ++i) acc[i] = -Ku[i];
    mesh_->add_boundary_coupling(std::span<const double>(lambda.data() + s * nf_, nf_), 1.0, acc);
    for (std::size_t i = 0; i < n_; ++i) next[i] = 2.0 * cur[i] - prev[i] + dt2 * Winv_[i] * acc[i];
    std::swap(prev, cur);
    std::swap(cur, next);
  }
  Field pair(2 * n_);
  std::copy(prev.begin(), prev.end(), pair.begin());
  std::copy(cur.begin(), cur.end(), pair.begin() + n_);
  return pair;
}

Field HumOperator::transpose(const Field& pair) const {
  const double dt2 = dt_ * dt_;
  auto faces = mesh_->faces();
  Field out(static_cast<std::size_t>(N_ + 1) * nf_, 0.0);
  Field x1(pair.begin() + n_, pair.end());    // adjoint of u^{n+1}
  Field x0(pair.begin(), pair.begin() + n_);  // adjoint of u^n (partial)
  Field xm(n_, 0.0), y(n_), Ky(n_);
  for (long s = N_ - 1; s >= 1; --s) {
    for (std::size_t i = 0; i < n_; ++i) y[i] = Winv_[i] * x1[i];
    for (std::size_t f = 0; f < nf_; ++f) out[s * nf_ + f] = dt2 * faces[f].coupling * y[faces[f].unknown];
    mesh_->apply_stiffness(y, Ky);
    for (std::size_t i = 0; i < n_; ++i) {
      x0[i] += 2.0 * x1[i] - dt2 * Ky[i];
      xm[i] -= x1[i];
    }
    std::swap(x1, x0);
    std::swap(x0, xm);
    std::fill(xm.begin(), xm.end(), 0.0);
  }
  for (std::size_t f = 0; f < nf_; ++f)
    out[f] = 0.5 * dt2 * faces[f].coupling * Winv_[faces[f].unknown] * x1[faces[f].unknown];
  return out;
}

Field HumOperator::adjoint(const Field& pair) const {
  Field l = transpose(pair);
  auto faces = mesh_->faces();
  for (long s = 0; s <= N_; ++s)
    for (std::size_t f = 0; f < nf_; ++f) l[s * nf_ + f] /= tau(s, N_, dt_) * faces[f].weight;
  return l;
}

Field HumOperator::Q(const Field& pair) const {
  const double dt2 = dt_ * dt_;
  Field d(n_), s(n_), Kd(n_), Ks(n_), out(2 * n_);
  for (std::size_t i = 0; i < n_; ++i) {
    d[i] = pair[n_ + i] - pair[i];
    s[i] = pair[n_ + i] + pair[i];
  }
  mesh_->apply_stiffness(d, Kd);
  mesh_->apply_stiffness(s, Ks);
  for (std::size_t i = 0; i < n_; ++i) {
    double Pd = (W_[i] * d[i] - 0.25 * dt2 * Kd[i]) / dt2;
    out[i] = -Pd + 0.25 * Ks[i];
    out[n_ + i] = Pd + 0.25 * Ks[i];
  }
  return out;
}

double HumOperator::q_dot(const Field& x, const Field& y) const {
  Field qy = Q(y);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * qy[i];
  return s;
}

double HumOperator::lambda_dot(const Field& l, const Field& m) const {
  auto faces = mesh_->faces();
  double s = 0.0;
  for (long n = 0; n <= N_; ++n) {
    double t = tau(n, N_, dt_);
    for (std::size_t f = 0; f < nf_; ++f) s += t * faces[f].weight * l[n * nf_ + f] * m[n * nf_ + f];
  }
  return s;
}

Field HumOperator::gramian(const Field& pair) const { return forward(adjoint(Q(pair))); }

// ------------------------------------------------------------ HUM

namespace {

void check_problem(const ControlProblem& p) {
  if (p.phi0.size() != p.domain.dirichlet().size())
    throw PreconditionError("phi0 must live on the Dirichlet unknowns");
  require_certified_contrast(p.speed.a, p.allow_degenerate);
  Point x0 = star_centre(p);
  double C = p.domain.sup_distance(x0);
  if (!(p.T > 2.0 * C / (p.speed.a * p.speed.a)))
    throw PreconditionError("T must exceed 2 C(x0) a^-2 for the control to exist");
  if (!(p.tol > 0.0) || p.max_iter < 0) throw PreconditionError("invalid CG tolerance or iteration cap");
}

DirichletProblem free_problem(const ControlProblem& p) {
  DirichletProblem d;
  d.u0.assign(p.phi0.size(), 0.0);
  d.u1 = p.phi0;
  d.T = p.T;
  d.cfl_factor = p.cfl_factor;
  return d;
}

}  // namespace

ControlCertificate hum_control(const ControlProblem& p) {
  check_problem(p);
  HumOperator R(p.speed, p.domain, p.T, p.cfl_factor);
  const std::size_t n = R.unknowns();
  ControlCertificate cert;
  cert.dt = R.dt();
  cert.n_steps = R.n_steps();
  cert.n_faces = R.faces();
  cert.problem_hash = p.hash();
  cert.control.assign(static_cast<std::size_t>(cert.n_steps + 1) * cert.n_faces, 0.0);
  {
    Field ci2 = unknown_values(p.domain, p.speed.c_inv2);
    auto m = p.domain.dirichlet().mass();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += m[i] * ci2[i] * p.phi0[i] * p.phi0[i];
    cert.phi0_norm = std::sqrt(s);
  }
  if (max_abs(p.phi0) == 0.0) {
    cert.converged = true;
    return cert;
  }

  DirichletOptions quiet;
  quiet.record_trace = false;
  DirichletResult free = simulate_dirichlet(p.speed, p.domain, free_problem(p), quiet);
  Field y(2 * n);
  std::copy(free.u_penultimate.begin(), free.u_penultimate.end(), y.begin());
  std::copy(free.u_last.begin(), free.u_last.end(), y.begin() + n);
  const double yy = R.q_dot(y, y);
  cert.free_energy = yy;

  // Conjugate residuals on A z = -y in the Q inner product: each iterate
  // minimizes the Q-norm of r = -y - A z, which is the controlled final state.
  Field z(2 * n, 0.0), r(2 * n), d(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) r[i] = -y[i];
  Field Ar = R.gramian(r);
  Field Ad = Ar;
  d = r;
  double rAr = R.q_dot(r, Ar);
  double rr = yy;
  int it = 0;
  while (rr > p.tol * yy && it < p.max_iter) {
    double AdAd = R.q_dot(Ad, Ad);
    if (!(rAr > 0.0) || !(AdAd > 0.0))
      throw NumericalError("HUM Gramian lost positivity (conditioning too poor)", it);
    double alpha = rAr / AdAd;
    for (std::size_t i = 0; i < 2 * n; ++i) {
      z[i] += alpha * d[i];
      r[i] -= alpha * Ad[i];
    }
    rr = R.q_dot(r, r);
    ++it;
    cert.residual_history.push_back(rr / yy);
    if (rr <= p.tol * yy) break;
    Ar = R.gramian(r);
    double rAr_new = R.q_dot(r, Ar);
    double beta = rAr_new / rAr;
    rAr = rAr_new;
    for (std::size_t i = 0; i < 2 * n; ++i) {
      d[i] = r[i] + beta * d[i];
      Ad[i] = Ar[i] + beta * Ad[i];
    }
  }
  cert.iterations = it;
  cert.final_energy = rr;
  cert.final_energy_rel = rr / yy;
  cert.converged = rr <= p.tol * yy;
  cert.control = R.adjoint(R.Q(z));
  cert.lambda_norm = std::sqrt(R.lambda_dot(cert.control, cert.control));
  cert.lambda_norm_emp = cert.lambda_norm / cert.phi0_norm;
  if (!cert.converged)
    throw NumericalError("HUM did not reach the energy target within " + std::to_string(p.max_iter) +
                             " iterations (relative energy " + std::to_string(cert.final_energy_rel) + ")",
                         it);
  return cert;
}

ControlledSolution controlled_solution(const ControlProblem& p, const ControlCertificate& cert,
                                       long store_stride) {
  if (cert.problem_hash != p.hash())
    throw PreconditionError("certificate was issued for a different control problem");
  DirichletProblem d = free_problem(p);
  const std::size_t nf = cert.n_faces;
  d.boundary = [&](long step, std::span<double> g) {
    std::copy(cert.control.begin() + step * nf, cert.control.begin() + (step + 1) * nf, g.begin());
  };
  ControlledSolution out;
  Field ci2 = unknown_values(p.domain, p.speed.c_inv2);
  auto m = p.domain.dirichlet().mass();
  DirichletOptions opts;
  opts.store_stride = store_stride;
  opts.record_trace = false;
  opts.observer = [&](long, std::span<const double> u) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += m[i] * u[i] * u[i];
    out.max_l2 = std::max(out.max_l2, std::sqrt(s));
  };
  out.run = simulate_dirichlet(p.speed, p.domain, d, opts);
  double e0 = 0.0;
  for (std::size_t i = 0; i < p.phi0.size(); ++i) e0 += m[i] * ci2[i] * p.phi0[i] * p.phi0[i];
  DirichletOptions quiet;
  quiet.record_trace = false;
  double efree = cert.free_energy;
  if (efree == 0.0 && e0 > 0.0) efree = simulate_dirichlet(p.speed, p.domain, free_problem(p), quiet).energy.back();
  out.final_energy_rel = efree > 0.0 ? out.run.energy.back() / efree : 0.0;
  out.C_emp = e0 > 0.0 ? out.max_l2 / std::sqrt(e0) : 0.0;
  return out;
}

double gramian_symmetry_defect(const ControlProblem& p, CounterRng& rng, int probes) {
  HumOperator R(p.speed, p.domain, p.T, p.cfl_factor);
  const std::size_t n2 = 2 * R.unknowns();
  double worst = 0.0;
  for (int k = 0; k < probes; ++k) {
    Field x(n2), y(n2);
    for (auto& v : x) v = rng.normal();
    for (auto& v : y) v = rng.normal();
    Field Ax = R.gramian(x), Ay = R.gramian(y);
    double l = R.q_dot(Ax, y), r = R.q_dot(x, Ay);
    double scale = std::sqrt(R.q_dot(Ax, Ax) * R.q_dot(y, y));
    worst = std::max(worst, std::abs(l - r) / std::max(scale, 1e-300));
  }
  return worst;
}

// ------------------------------------------------------------ representation

RepresentationResidual representation_residual(const ControlProblem& p,
                                               const ControlCertificate& cert,
                                               const SpeedField& c1, const InitialData& d1,
                                               const InitialData& d2, double boundary_tol) {
  const Domain& dom = p.domain;
  const auto& nm = dom.neumann();
  const auto& dm = dom.dirichlet();
  const std::size_t nc = nm.size();
  auto bnd = nm.boundary();
  const std::size_t nb = bnd.size();
  auto faces = dm.faces();
  const std::size_t nf = faces.size();
  const SpeedField& c2 = p.speed;

  std::vector<int> face_slot(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    int slot = faces[f].closed_node >= 0 ? nm.boundary_slot(faces[f].closed_node) : -1;
    if (slot < 0) throw PreconditionError("representation needs boundary-fitted faces (rectangular domain)");
    face_slot[f] = slot;
  }
  if (d1.f.size() != nc || d2.f.size() != nc) throw PreconditionError("initial data live on another mesh");
  if (d1.beta != d2.beta) throw PreconditionError("both data sets must share beta");

  RepresentationResidual res;
  {
    double mis = 0.0, scale = 0.0;
    for (const auto& b : bnd) mis = std::max(mis, std::abs(d1.f[b.node] - d2.f[b.node]));
    for (std::size_t i = 0; i < nc; ++i) scale = std::max({scale, std::abs(d1.f[i]), std::abs(d2.f[i])});
    res.boundary_mismatch = scale > 0.0 ? mis / scale : 0.0;
    if (res.boundary_mismatch > boundary_tol)
      throw PreconditionError("f1 and f2 differ on the boundary (relative " +
                              std::to_string(res.boundary_mismatch) + ")");
  }

  TimeGrid tg = time_grid(dom, c2, p.T, p.cfl_factor);
  TimeGrid tg1 = time_grid(dom, c1, p.T, p.cfl_factor);
  if (tg.n_steps != tg1.n_steps || tg.n_steps != cert.n_steps)
    throw PreconditionError("both speeds must share one time grid");
  const long N = tg.n_steps;
  const double dt = tg.dt;
  auto mass = nm.mass();

  // p1 at every level, then S^n = (c1^-2 - c2^-2) dtt p1^n.
  std::vector<Field> p1(N + 1);
  ForwardOptions o1;
  o1.cfl_factor = p.cfl_factor;
  o1.observer = [&](long step, std::span<const double> u) { p1[step].assign(u.begin(), u.end()); };
  simulate_forward(c1, d1, dom, p.T, o1);
  Field dci2(nc);
  for (std::size_t i = 0; i < nc; ++i) dci2[i] = c1.c_inv2[i] - c2.c_inv2[i];
  std::vector<Field> S(N + 1, Field(nc));
  for (long k = 0; k <= N; ++k) {
    for (std::size_t i = 0; i < nc; ++i) {
      double acc;
      if (k == 0)
        acc = (2.0 * p1[1][i] - 2.0 * p1[0][i] - 2.0 * dt * d1.g[i]) / (dt * dt);
      else if (k == N)
        acc = (p1[N][i] - 2.0 * p1[N - 1][i] + p1[N - 2][i]) / (dt * dt);
      else
        acc = (p1[k + 1][i] - 2.0 * p1[k][i] + p1[k - 1][i]) / (dt * dt);
      S[k][i] = dci2[i] * acc;
    }
  }
  p1.clear();

  InitialData dp;
  dp.f.resize(nc);
  dp.g.resize(nc);
  for (std::size_t i = 0; i < nc; ++i) {
    dp.f[i] = d2.f[i] - d1.f[i];
    dp.g[i] = d2.g[i] - d1.g[i];
  }
  dp.beta = d2.beta;
  ForwardOptions op;
  op.cfl_factor = p.cfl_factor;
  op.source = [&](long step, std::span<double> out) { std::copy(S[step].begin(), S[step].end(), out.begin()); };
  ForwardResult pr = simulate_forward(c2, dp, dom, p.T, op);
  const BoundaryTrace& tr = pr.trace;

  ControlledSolution phi = controlled_solution(p, cert, 1);
  res.hum_energy_rel = phi.final_energy_rel;
  auto phi_closed = [&](long k) {
    Field g(nf);
    std::copy(cert.control.begin() + k * nf, cert.control.begin() + (k + 1) * nf, g.begin());
    return dm.extend(phi.run.trajectory.p[k], nc, g);
  };

  Field phi0c = dm.extend(p.phi0, nc);
  for (std::size_t i = 0; i < nc; ++i) res.A += mass[i] * c2.c_inv2[i] * phi0c[i] * dp.f[i];

  std::vector<std::vector<std::pair<std::uint32_t, double>>> stencil(nb);
  for (std::size_t b = 0; b < nb; ++b) stencil[b] = normal_derivative_stencil(nm, b);

  Field W2(nc);
  for (std::size_t i = 0; i < nc; ++i) W2[i] = mass[i] * c2.c_inv2[i];
  Field Kphi(nc);
  Field prevc, curc = phi_closed(0), nextc;
  // Virtual level before t = 0: phi^{-1} = phi^1 - 2 dt phi0 inside, control held at the boundary.
  Field first = phi_closed(1);
  prevc.resize(nc);
  for (std::size_t i = 0; i < nc; ++i) prevc[i] = first[i] - 2.0 * dt * phi0c[i];
  for (const auto& b : bnd) prevc[b.node] = first[b.node];
  Field last_dtt(nb, 0.0);
  for (long k = 0; k <= N; ++k) {
    const double t = tau(k, N, dt);
    if (k < N) nextc = phi_closed(k + 1);
    double sB = 0.0, sC = 0.0, sCd = 0.0, sD = 0.0;
    nm.apply_stiffness(curc, Kphi);
    for (std::size_t b = 0; b < nb; ++b) {
      const auto node = bnd[b].node;
      const double w = bnd[b].weight;
      double pv = tr.value(k, b), pdt = tr.dvalue(k, b);
      sB += w * d2.beta[b] * curc[node] * pdt;
      double dn = 0.0;
      for (const auto& [j, c] : stencil[b]) dn += c * curc[j];
      sC += w * dn * pv;
      double dtt = k < N ? (nextc[node] - 2.0 * curc[node] + prevc[node]) / (dt * dt) : last_dtt[b];
      last_dtt[b] = dtt;
      sCd += pv * (W2[node] * dtt + Kphi[node]);
    }
    for (std::size_t i = 0; i < nc; ++i) sD += mass[i] * curc[i] * S[k][i];
    res.B += t * sB;
    res.C += t * sC;
    res.C_disc += t * sCd;
    res.D += t * sD;
    if (k < N) {
      prevc = std::move(curc);
      curc = std::move(nextc);
    }
  }
  auto rel = [&](double c) {
    double scale = std::max({std::abs(res.A), std::abs(res.B), std::abs(c), std::abs(res.D)});
    return scale > 1e-300 ? std::abs(res.A + res.B + c - res.D) / scale : 0.0;
  };
  res.residual_rel = rel(res.C);
  res.residual_disc_rel = rel(res.C_disc);
  return res;
}

}  // namespace paikit
