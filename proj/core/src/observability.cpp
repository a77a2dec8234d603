#include "paikit/observability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "paikit/error.hpp"

namespace paikit {

ObservabilityReport observability_ratio(const SpeedField& speed, const Domain& domain,
                                        std::span<const double> u0, std::span<const double> u1,
                                        const std::function<void(long, std::span<double>)>& F,
                                        double T, const Point& x0, const ObservabilityOptions& opts) {
  const auto& dm = domain.dirichlet();
  const std::size_t n = dm.size();
  if (u0.size() != n || u1.size() != n)
    throw PreconditionError("observability data must live on the interior unknowns");
  if (!domain.contains(x0)) throw GeometryError("star centre lies outside the domain");

  ObservabilityReport rep;
  rep.T = T;
  rep.a = speed.a;
  rep.C_x0 = domain.sup_distance(x0);
  const double C = rep.C_x0;
  const double a2 = speed.a * speed.a;

  rep.certified = true;
  auto warn = [&](const std::string& w) {
    rep.certified = false;
    if (!rep.warning.empty()) rep.warning += "; ";
    rep.warning += w;
  };
  if (!(T > 2.0 * C / a2)) warn("T <= 2 C(x0) a^-2: inequality not applicable");
  bool contrast_ok = speed.a > 0.75 && (speed.a < 1.0 || (opts.allow_degenerate && speed.a == 1.0));
  if (!contrast_ok) warn("contrast outside (3/4, 1)");
  if (speed.inclusion) {
    if (!star_shape_check(*speed.inclusion).valid) warn("inclusion not star-shaped");
    if (norm(sub(speed.inclusion->x0(), x0)) > 1e-12) {
      StarShapeResult about_x0{};
      auto dirs = speed.inclusion->sample_directions();
      if (speed.inclusion->dim() == 2) {
        std::vector<Point> curve;
        for (const auto& d : dirs) curve.push_back(add(speed.inclusion->x0(), scale(d, speed.inclusion->radius(d))));
        about_x0 = star_shape_check(curve, x0);
        if (!about_x0.valid) warn("inclusion not star-shaped about x0");
      }
    }
  }

  Field c2 = unknown_values(domain, speed.c2);
  auto mass = dm.mass();
  rep.lhs = dm.stiffness_energy(u0, c2);
  for (std::size_t i = 0; i < n; ++i) rep.lhs += mass[i] * u1[i] * u1[i];

  DirichletProblem pb;
  pb.u0.assign(u0.begin(), u0.end());
  pb.u1.assign(u1.begin(), u1.end());
  pb.T = T;
  pb.cfl_factor = opts.cfl_factor;
  const TimeGrid tg = time_grid(domain, speed, T, opts.cfl_factor);
  Field Fbuf(n);
  if (F) {
    pb.source = F;
    for (long step = 0; step <= tg.n_steps; ++step) {
      std::fill(Fbuf.begin(), Fbuf.end(), 0.0);
      F(step, Fbuf);
      double tau = (step == 0 || step == tg.n_steps) ? 0.5 * tg.dt : tg.dt;
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += mass[i] * Fbuf[i] * Fbuf[i];
      rep.source += tau * s;
    }
  }
  DirichletResult run = simulate_dirichlet(speed, domain, pb);
  rep.flux = run.trace.l2_norm_sq();

  const double denom = T * a2 - 2.0 * C;
  rep.constant = denom > 0.0 ? 2.0 * C / denom : std::numeric_limits<double>::infinity();
  const double rhs = rep.flux + rep.source;
  if (rep.lhs == 0.0) {
    rep.ratio = 0.0;
    rep.proof_ratio = 0.0;
  } else if (denom > 0.0 && rhs > 0.0) {
    rep.ratio = rep.lhs / (rep.constant * rhs);
    rep.proof_ratio = rep.lhs * (T - 2.0 * C / a2) / (C * rep.flux + 2.0 * C * rep.source);
  } else {
    rep.ratio = std::numeric_limits<double>::infinity();
    rep.proof_ratio = std::numeric_limits<double>::infinity();
  }
  if (!std::isfinite(rep.lhs) || !std::isfinite(rep.flux))
    throw NumericalError("non-finite observability terms");
  return rep;
}

EnsembleStats observability_ensemble(const Domain& domain, const Point& x0, const EnsembleSpec& spec) {
  if (spec.samples < 1) throw PreconditionError("ensemble needs at least one sample");
  const int d = domain.dim();
  std::vector<std::vector<double>> shapes;
  std::vector<double> eccs;
  std::vector<double> base = spec.inclusion_coeffs;
  if (base.empty()) base = {0.3 * domain.diameter() / 2.0};
  if (spec.eccentricities.empty() || d != 2) {
    shapes.push_back(base);
    eccs.push_back(-1.0);
  } else {
    for (double e : spec.eccentricities) {
      std::vector<double> c{base[0], 0.0, 0.0, base[0] * e, 0.0};
      shapes.push_back(c);
      eccs.push_back(e);
    }
  }
  const double diam = domain.diameter();
  EnsembleStats st;
  std::uint64_t member = 0;
  double sum = 0.0;
  CounterRng root(spec.seed);
  for (double a : spec.contrasts) {
    for (std::size_t si = 0; si < shapes.size(); ++si) {
      StarInclusion inc(d, x0, shapes[si]);
      SpeedField speed = a == 1.0 ? uniform_speed(domain) : build_speed_field(inc, a, domain);
      for (double tf : spec.T_factors) {
        const double T = 4.0 * diam * tf;
        const double Tmin = 2.0 * domain.sup_distance(x0) / (a * a);
        for (int k = 0; k < spec.samples; ++k, ++member) {
          // Same data for every (a, shape, T) cell: stream depends on k only.
          CounterRng rng = root.split(static_cast<std::uint64_t>(k));
          const std::size_t n = domain.dirichlet().size();
          Field u0(n, 0.0), u1(n, 0.0);
          if (!spec.zero_data) {
            u0 = smooth_random_unknowns(domain, rng);
            u1 = smooth_random_unknowns(domain, rng);
          }
          std::function<void(long, std::span<double>)> F;
          Field shape_f;
          double dt = 0.0;
          if (spec.with_source) {
            shape_f = smooth_random_unknowns(domain, rng);
            dt = time_grid(domain, speed, T, spec.cfl_factor).dt;
            double omega = 2.0 * 3.141592653589793 / T * (1.0 + 3.0 * rng.uniform());
            F = [&, omega, dt](long step, std::span<double> out) {
              double s = std::sin(omega * step * dt);
              for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * shape_f[i];
            };
          }
          ObservabilityOptions oo;
          oo.cfl_factor = spec.cfl_factor;
          EnsembleRow row;
          row.a = a;
          if (eccs[si] >= 0.0) {
            row.eccentricity = inc.max_radius() / inc.min_radius() - 1.0;
          }
          row.T_over_Tmin = T / Tmin;
          row.seed = spec.seed;
          row.member = member;
          row.report = observability_ratio(speed, domain, u0, u1, F, T, x0, oo);
          if (std::isfinite(row.report.ratio)) {
            st.max_ratio = std::max(st.max_ratio, row.report.ratio);
            if (row.report.certified) st.max_certified_ratio = std::max(st.max_certified_ratio, row.report.ratio);
            sum += row.report.ratio;
          }
          st.rows.push_back(std::move(row));
        }
      }
    }
  }
  st.mean_ratio = st.rows.empty() ? 0.0 : sum / st.rows.size();
  return st;
}

}  // namespace paikit
