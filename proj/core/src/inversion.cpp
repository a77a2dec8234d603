#include "paikit/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "paikit/error.hpp"

namespace paikit {

namespace {

double tau(long n, long N, double dt) { return (n == 0 || n == N) ? 0.5 * dt : dt; }

double regularizer(std::span<const double> c, const InverseProblem& p) {
  double s = 0.0;
  for (std::size_t j = p.reg_from; j < c.size(); ++j) s += c[j] * c[j];
  return p.gamma * s;
}

double vdot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Truncated Gaussian smoothing along time, renormalized near the ends.
struct TimeFilter {
  std::vector<double> w;  // w[j] for offsets -J..J
  long J = 0;

  TimeFilter(double sigma, double dt) {
    if (sigma <= 0.0) return;
    J = static_cast<long>(std::ceil(4.0 * sigma / dt));
    for (long j = -J; j <= J; ++j) w.push_back(std::exp(-0.5 * std::pow(j * dt / sigma, 2)));
  }
  bool active() const { return J > 0; }

  double norm(long n, long N) const {
    double z = 0.0;
    for (long j = std::max(-J, -n); j <= std::min(J, N - n); ++j) z += w[j + J];
    return z;
  }
  std::vector<double> apply(const std::vector<double>& x, long N, std::size_t nb) const {
    std::vector<double> y(x.size(), 0.0);
    for (long n = 0; n <= N; ++n) {
      double z = norm(n, N);
      for (long j = std::max(-J, -n); j <= std::min(J, N - n); ++j) {
        double c = w[j + J] / z;
        for (std::size_t b = 0; b < nb; ++b) y[n * nb + b] += c * x[(n + j) * nb + b];
      }
    }
    return y;
  }
  std::vector<double> transpose(const std::vector<double>& y, long N, std::size_t nb) const {
    std::vector<double> x(y.size(), 0.0);
    for (long n = 0; n <= N; ++n) {
      double z = norm(n, N);
      for (long j = std::max(-J, -n); j <= std::min(J, N - n); ++j) {
        double c = w[j + J] / z;
        for (std::size_t b = 0; b < nb; ++b) x[(n + j) * nb + b] += c * y[n * nb + b];
      }
    }
    return x;
  }
};

BoundaryTrace filtered(BoundaryTrace d, const TimeFilter& f) {
  if (f.active()) d.values = f.apply(d.values, d.n_steps, d.n_points);
  return d;
}

/// 1/2 ||G (a - b)||_H1^2 for the time filter of width sigma.
double misfit_of_trace(const BoundaryTrace& a, const BoundaryTrace& b, double sigma) {
  return 0.5 * trace_h1_sq(filtered(trace_difference(a, b), TimeFilter(sigma, a.dt)));
}

}  // namespace

ForwardState forward_state(const StarInclusion& inclusion, const InverseProblem& p,
                           std::vector<Field>* levels) {
  inclusion.validate(p.domain);
  ForwardState st;
  st.speed = build_speed_field(inclusion, p.a, p.domain);
  const auto& mesh = p.domain.neumann();
  st.data.f = solve_diffusion(p.optics, st.speed, p.domain, &st.fluence);
  st.data.f_h1 = h1_norm(mesh, st.data.f);
  st.data.f_h2 = h2_norm(mesh, st.data.f);
  if (st.data.f_h2 > p.optics.M)
    throw PreconditionError("initial pressure exceeds the admissible bound M");
  st.data.beta.assign(mesh.boundary().size(), p.optics.beta);
  st.data.g = harmonic_g(st.data.f, st.data.beta, p.domain);
  ForwardOptions opts;
  opts.cfl_factor = p.cfl_factor;
  if (levels) {
    levels->clear();
    opts.observer = [levels](long, std::span<const double> u) { levels->emplace_back(u.begin(), u.end()); };
  }
  st.result = simulate_forward(st.speed, st.data, p.domain, p.T, opts);
  return st;
}

double trace_h1_sq(const BoundaryTrace& tr) {
  const long N = tr.n_steps;
  const std::size_t nb = tr.n_points;
  const double dt = tr.dt;
  double s = 0.0;
  for (long n = 0; n <= N; ++n) {
    double t = tau(n, N, dt);
    for (std::size_t b = 0; b < nb; ++b) s += t * tr.weights[b] * tr.value(n, b) * tr.value(n, b);
    for (const auto& e : tr.edges) {
      double d = tr.value(n, e.a) - tr.value(n, e.b);
      s += t * d * d * std::pow(e.length, tr.dim - 3);
    }
  }
  for (long n = 0; n < N; ++n)
    for (std::size_t b = 0; b < nb; ++b) {
      double d = (tr.value(n + 1, b) - tr.value(n, b)) / dt;
      s += dt * tr.weights[b] * d * d;
    }
  return s;
}

Field trace_h1_sq_gradient(const BoundaryTrace& tr) {
  const long N = tr.n_steps;
  const std::size_t nb = tr.n_points;
  const double dt = tr.dt;
  Field g(tr.values.size(), 0.0);
  for (long n = 0; n <= N; ++n) {
    double t = tau(n, N, dt);
    for (std::size_t b = 0; b < nb; ++b) g[n * nb + b] += 2.0 * t * tr.weights[b] * tr.value(n, b);
    for (const auto& e : tr.edges) {
      double d = 2.0 * t * (tr.value(n, e.a) - tr.value(n, e.b)) * std::pow(e.length, tr.dim - 3);
      g[n * nb + e.a] += d;
      g[n * nb + e.b] -= d;
    }
  }
  for (long n = 0; n < N; ++n)
    for (std::size_t b = 0; b < nb; ++b) {
      double d = 2.0 * tr.weights[b] * (tr.value(n + 1, b) - tr.value(n, b)) / dt;
      g[(n + 1) * nb + b] += d;
      g[n * nb + b] -= d;
    }
  return g;
}

double misfit(std::span<const double> params, const InverseProblem& p) {
  StarInclusion inc = p.guess.with_coeffs(std::vector<double>(params.begin(), params.end()));
  ForwardState st = forward_state(inc, p);
  TimeFilter filt(p.time_filter, st.result.trace.dt);
  BoundaryTrace d = filtered(trace_difference(st.result.trace, p.observed), filt);
  return 0.5 * trace_h1_sq(d) + regularizer(params, p);
}

MisfitGradient adjoint_gradient(std::span<const double> params, const InverseProblem& p) {
  if (p.guess.smoothing_width() == 0.0)
    throw PreconditionError("shape gradients need a smoothed indicator (width > 0)");
  StarInclusion inc = p.guess.with_coeffs(std::vector<double>(params.begin(), params.end()));
  std::vector<Field> P;
  ForwardState st = forward_state(inc, p, &P);
  const BoundaryTrace& tr = st.result.trace;
  TimeFilter filt(p.time_filter, tr.dt);
  BoundaryTrace diff = filtered(trace_difference(tr, p.observed), filt);
  MisfitGradient out;
  out.J = 0.5 * trace_h1_sq(diff) + regularizer(params, p);
  Field r = trace_h1_sq_gradient(diff);
  for (auto& v : r) v *= 0.5;
  if (filt.active()) r = filt.transpose(r, diff.n_steps, diff.n_points);

  const auto& mesh = p.domain.neumann();
  const std::size_t n = mesh.size();
  auto bnd = mesh.boundary();
  const std::size_t nb = bnd.size();
  const long N = tr.n_steps;
  const double dt = tr.dt, dt2 = dt * dt;
  if (static_cast<long>(P.size()) != N + 1) throw NumericalError("forward levels incomplete");
  auto mass = mesh.mass();
  Field W(n), B(n, 0.0), D(n);
  for (std::size_t i = 0; i < n; ++i) W[i] = mass[i] * st.speed.c_inv2[i];
  for (std::size_t s = 0; s < nb; ++s) B[bnd[s].node] = bnd[s].weight * st.data.beta[s];
  for (std::size_t i = 0; i < n; ++i) D[i] = W[i] / dt2 + B[i] / (2.0 * dt);

  auto add_r = [&](long k, Field& mu) {
    for (std::size_t s = 0; s < nb; ++s) mu[bnd[s].node] += r[k * nb + s];
  };

  Field dW(n, 0.0);
  Field q1(n, 0.0), q2(n, 0.0), mu(n), Kq(n);
  // q1 = D^-1 mu^{k+1}, q2 = D^-1 mu^{k+2}
  {
    std::fill(mu.begin(), mu.end(), 0.0);
    add_r(N, mu);
    for (std::size_t i = 0; i < n; ++i) q1[i] = mu[i] / D[i];
  }
  for (long k = N - 1; k >= 1; --k) {
    // p^{k+1} was produced by the step from (p^k, p^{k-1}).
    for (std::size_t i = 0; i < n; ++i)
      dW[i] += q1[i] * (2.0 * P[k][i] - P[k - 1][i] - P[k + 1][i]) / dt2;
    std::fill(mu.begin(), mu.end(), 0.0);
    add_r(k, mu);
    mesh.apply_stiffness(q1, Kq);
    for (std::size_t i = 0; i < n; ++i)
      mu[i] += 2.0 * W[i] / dt2 * q1[i] - Kq[i] + (-W[i] / dt2 + B[i] / (2.0 * dt)) * q2[i];
    if (k == 1) break;
    q2 = q1;
    for (std::size_t i = 0; i < n; ++i) q1[i] = mu[i] / D[i];
  }
  // mu = adjoint of p^1; q1 = D^-1 mu^2.
  Field mu0(n, 0.0);
  add_r(0, mu0);
  for (std::size_t i = 0; i < n; ++i) mu0[i] += (-W[i] / dt2 + B[i] / (2.0 * dt)) * q1[i];

  const Field& f = st.data.f;
  const Field& g = st.data.g;
  Field Kf(n), y(n), Ky(n);
  mesh.apply_stiffness(f, Kf);
  for (std::size_t i = 0; i < n; ++i) {
    double a0 = -Kf[i] - B[i] * g[i];
    dW[i] -= mu[i] * 0.5 * dt2 * a0 / (W[i] * W[i]);
    y[i] = mu[i] / W[i];
  }
  mesh.apply_stiffness(y, Ky);
  Field dJ_df(n), dJ_dg(n);
  for (std::size_t i = 0; i < n; ++i) {
    dJ_df[i] = mu0[i] + mu[i] - 0.5 * dt2 * Ky[i];
    dJ_dg[i] = dt * mu[i] - 0.5 * dt2 * B[i] * y[i];
  }
  Field lift = harmonic_g_transpose(dJ_dg, st.data.beta, p.domain);
  for (std::size_t i = 0; i < n; ++i) dJ_df[i] += lift[i];

  Field dJ_dind(n, 0.0);
  const double am1 = p.a - 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    double c = st.speed.c[i];
    dJ_dind[i] = dW[i] * mass[i] * (-2.0 * am1 / (c * c * c));
  }
  diffusion_indicator_gradient(p.optics, st.speed.indicator, p.domain, st.fluence, dJ_df, dJ_dind);
  out.grad.assign(params.size(), 0.0);
  indicator_gradient(inc, mesh, dJ_dind, out.grad);
  for (std::size_t j = p.reg_from; j < params.size(); ++j) out.grad[j] += 2.0 * p.gamma * params[j];
  return out;
}

namespace {

struct StageResult {
  std::vector<double> x;
  MisfitGradient cur;
  int iterations = 0;
  bool line_search_failed = false;
  std::string stop_reason;
};

/// Limited-memory quasi-Newton descent on one (possibly filtered) misfit.
StageResult descend(const InverseProblem& p, std::vector<double> x, MisfitGradient cur, double g_ref,
                    double J_floor, double tol_g, int max_iter, const ReconstructionOptions& o, int stage,
                    ReconstructionResult& res) {
  std::deque<std::pair<std::vector<double>, std::vector<double>>> mem;
  const double h = p.domain.h();
  StageResult out;
  int it = 0;
  for (;; ++it) {
    double gn = std::sqrt(vdot(cur.grad, cur.grad));
    if (cur.J <= J_floor) {
      out.stop_reason = "misfit below tolerance";
      break;
    }
    if (gn <= tol_g * g_ref || gn == 0.0) {
      out.stop_reason = "gradient below tolerance";
      break;
    }
    if (it >= max_iter) {
      out.stop_reason = "iteration cap";
      break;
    }
    // Two-loop recursion.
    std::vector<double> q = cur.grad;
    std::vector<double> alpha(mem.size());
    for (std::size_t k = mem.size(); k-- > 0;) {
      const auto& [s, y] = mem[k];
      alpha[k] = vdot(s, q) / vdot(y, s);
      for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * y[i];
    }
    bool scaled = false;
    if (!mem.empty()) {
      const auto& [s, y] = mem.back();
      double gam = vdot(s, y) / vdot(y, y);
      for (auto& v : q) v *= gam;
      scaled = true;
    }
    for (std::size_t k = 0; k < mem.size(); ++k) {
      const auto& [s, y] = mem[k];
      double beta = vdot(y, q) / vdot(y, s);
      for (std::size_t i = 0; i < q.size(); ++i) q[i] += s[i] * (alpha[k] - beta);
    }
    std::vector<double> d(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) d[i] = -q[i];
    double slope = vdot(cur.grad, d);
    if (!(slope < 0.0)) {
      mem.clear();
      scaled = false;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = -cur.grad[i];
      slope = -gn * gn;
    }
    double t = 1.0;
    if (!scaled) {
      double dmax = 0.0;
      for (double v : d) dmax = std::max(dmax, std::abs(v));
      t = h / dmax;
    }
    bool accepted = false;
    std::vector<double> xn(x.size());
    for (int bt = 0; bt <= o.max_backtracks; ++bt) {
      for (std::size_t i = 0; i < x.size(); ++i) xn[i] = x[i] + t * d[i];
      try {
        if (misfit(xn, p) <= cur.J + o.armijo * t * slope) {
          accepted = true;
          break;
        }
      } catch (const GeometryError&) {
      } catch (const PreconditionError&) {
      }
      t *= o.backtrack;
    }
    if (!accepted) {
      out.line_search_failed = true;
      out.stop_reason = "line search failed";
      break;
    }
    MisfitGradient next = adjoint_gradient(xn, p);
    std::vector<double> s(x.size()), y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      s[i] = xn[i] - x[i];
      y[i] = next.grad[i] - cur.grad[i];
    }
    if (vdot(s, y) > 1e-14 * std::sqrt(vdot(s, s) * vdot(y, y))) {
      mem.emplace_back(std::move(s), std::move(y));
      if (static_cast<int>(mem.size()) > o.memory) mem.pop_front();
    }
    x = xn;
    cur = std::move(next);
    res.misfit_history.push_back(cur.J);
    res.grad_norm_history.push_back(std::sqrt(vdot(cur.grad, cur.grad)));
    res.stage_history.push_back(stage);
  }
  out.x = std::move(x);
  out.cur = std::move(cur);
  out.iterations = it;
  return out;
}

}  // namespace

ReconstructionResult reconstruct(const InverseProblem& problem, const ReconstructionOptions& o,
                                 const StarInclusion* truth) {
  require_certified_contrast(problem.a);
  problem.guess.validate(problem.domain);
  InverseProblem p = problem;
  p.time_filter = 0.0;
  const double obs_sq = trace_h1_sq(p.observed);
  std::vector<double> x(p.guess.coeffs().begin(), p.guess.coeffs().end());
  MisfitGradient cur = adjoint_gradient(x, p);
  const double g0 = std::sqrt(vdot(cur.grad, cur.grad));
  ReconstructionResult res{p.guess, {}, {}, {}, 0, "", false, std::nullopt, {}};
  res.misfit_history.push_back(cur.J);
  res.grad_norm_history.push_back(g0);
  res.stage_history.push_back(static_cast<int>(o.continuation.size()));

  int used = 0;
  if (cur.J > o.tol_J * obs_sq) {
    const double diam = p.domain.diameter();
    for (std::size_t k = 0; k < o.continuation.size() && used < o.max_iter; ++k) {
      InverseProblem ps = p;
      ps.time_filter = o.continuation[k] * diam;
      MisfitGradient c = adjoint_gradient(x, ps);
      res.misfit_history.push_back(c.J);
      res.grad_norm_history.push_back(std::sqrt(vdot(c.grad, c.grad)));
      res.stage_history.push_back(static_cast<int>(k));
      BoundaryTrace zero = p.observed;
      std::fill(zero.values.begin(), zero.values.end(), 0.0);
      const double floor = o.tol_J * 2.0 * misfit_of_trace(p.observed, zero, ps.time_filter);
      StageResult st = descend(ps, x, c, std::sqrt(vdot(c.grad, c.grad)), floor, o.stage_tol_g,
                               std::min(o.stage_max_iter, o.max_iter - used), o, static_cast<int>(k), res);
      used += st.iterations;
      x = std::move(st.x);
    }
    cur = adjoint_gradient(x, p);
    res.misfit_history.push_back(cur.J);
    res.grad_norm_history.push_back(std::sqrt(vdot(cur.grad, cur.grad)));
    res.stage_history.push_back(static_cast<int>(o.continuation.size()));
  }
  StageResult fin = descend(p, x, cur, g0, o.tol_J * obs_sq, o.tol_g, o.max_iter - used, o,
                            static_cast<int>(o.continuation.size()), res);
  used += fin.iterations;
  x = std::move(fin.x);
  res.stop_reason = fin.stop_reason;
  res.line_search_failed = fin.line_search_failed;
  res.iterations = used;
  res.inclusion_hat = p.guess.with_coeffs(x);
  SpeedField sp = build_speed_field(res.inclusion_hat, p.a, p.domain);
  res.f_hat = solve_diffusion(p.optics, sp, p.domain);
  if (truth) res.hausdorff_to_truth = hausdorff_distance(res.inclusion_hat, *truth);
  return res;
}

StabilityScanReport stability_scan(std::span<const std::pair<StarInclusion, StarInclusion>> pairs,
                                   std::span<const double> contrasts, const OpticalCoefficients& model,
                                   const Domain& domain, double T, double cfl_factor) {
  if (pairs.empty()) throw PreconditionError("stability scan needs at least one pair");
  StabilityScanReport rep;
  rep.d_emp = std::numeric_limits<double>::infinity();
  const auto& mesh = domain.neumann();
  for (double a : contrasts) {
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto& [w1, w2] = pairs[k];
      InverseProblem ip{domain, a, model, {}, T, cfl_factor, 0.0, 3, w1};
      ForwardState s1 = forward_state(w1, ip);
      ForwardState s2 = forward_state(w2, ip);
      ScanRow row;
      row.pair = k;
      row.a = a;
      for (std::size_t i = 0; i < mesh.size(); ++i)
        row.indicator_diff_inf = std::max(row.indicator_diff_inf,
                                          std::abs(s1.speed.indicator[i] - s2.speed.indicator[i]));
      if (row.indicator_diff_inf < 1.0 - 1e-9)
        throw PreconditionError("inclusion pair " + std::to_string(k) +
                                " does not differ on a fully resolved node");
      row.one_minus_a = 1.0 - a;
      row.lhs1 = row.one_minus_a * row.indicator_diff_inf;
      BoundaryTrace d = trace_difference(s1.result.trace, s2.result.trace);
      TraceNorms tn = trace_norms(d);
      row.h1 = tn.H1;
      row.h32 = tn.H32;
      row.weighted = tn.weighted_t;
      Field df(mesh.size());
      for (std::size_t i = 0; i < df.size(); ++i) df[i] = s1.data.f[i] - s2.data.f[i];
      row.f_diff_h1 = h1_norm(mesh, df);
      row.hausdorff = hausdorff_distance(w1, w2);
      row.symmetric_difference = symmetric_difference(s1.speed.indicator, s2.speed.indicator, mesh);
      if (!(row.h1 > 1e-10)) rep.identifiable = false;
      rep.C_emp1 = std::max(rep.C_emp1, row.lhs1 / row.h1);
      rep.C_emp2 = std::max(rep.C_emp2, row.f_diff_h1 / (row.h32 + row.weighted));
      rep.d_emp = std::min(rep.d_emp, row.f_diff_h1 / row.indicator_diff_inf);
      rep.rows.push_back(row);
    }
  }
  rep.a0_emp = std::max(0.75, 1.0 - rep.d_emp / (6.0 * rep.C_emp1));
  return rep;
}

}  // namespace paikit
