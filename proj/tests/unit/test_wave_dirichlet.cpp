#include <algorithm>
#include <cmath>
#include <functional>

#include "doctest.h"
#include "paikit/error.hpp"
#include "paikit/random.hpp"
#include "paikit/wave_dirichlet.hpp"
#include "support.hpp"

using namespace paikit;
using paikit::test::pi;

namespace {

Field on_unknowns(const Domain& d, const std::function<double(const Point&)>& fn) {
  const auto& dm = d.dirichlet();
  Field u(dm.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = fn(d.neumann().positions()[dm.closed_node(i)]);
  return u;
}

double eigenmode(const Point& x) { return std::sin(pi * x[0]) * std::sin(pi * x[1]); }

DirichletProblem free_problem(Field u0, Field u1, double T) {
  DirichletProblem p;
  p.u0 = std::move(u0);
  p.u1 = std::move(u1);
  p.T = T;
  return p;
}

}  // namespace

TEST_SUITE("wave_dirichlet") {

TEST_CASE("zero data stay zero") {
  Domain d = test::unit_disk(32);
  SpeedField s = build_speed_field(test::centred_disk(0.2), 0.9, d);
  const std::size_t n = d.dirichlet().size();
  DirichletResult r = simulate_dirichlet(s, d, free_problem(Field(n, 0.0), Field(n, 0.0), 1.0));
  CHECK(max_abs(r.u_last) == 0.0);
  CHECK(max_abs(r.trace.values) == 0.0);
}

TEST_CASE("eigenmode evolution and its normal derivative") {
  const double T = 0.6, w = std::sqrt(2.0) * pi;
  double err_u[2], err_dn[2];
  int k = 0;
  for (int res : {32, 64}) {
    Domain d = test::unit_square(res);
    Field u0 = on_unknowns(d, eigenmode);
    DirichletResult r = simulate_dirichlet(uniform_speed(d), d, free_problem(u0, Field(u0.size(), 0.0), T));
    double e = 0.0;
    for (std::size_t i = 0; i < u0.size(); ++i) e = std::max(e, std::abs(r.u_last[i] - std::cos(w * T) * u0[i]));
    err_u[k] = e;
    double ed = 0.0;
    const auto& tr = r.trace;
    for (std::size_t f = 0; f < tr.n_faces; ++f) {
      const Point& x = tr.positions[f];
      const Point& nu = tr.normals[f];
      double dn0 = pi * (nu[0] * std::cos(pi * x[0]) * std::sin(pi * x[1]) +
                         nu[1] * std::sin(pi * x[0]) * std::cos(pi * x[1]));
      ed = std::max(ed, std::abs(tr.value(tr.n_steps, f) - std::cos(w * T) * dn0));
    }
    err_dn[k] = ed;
    ++k;
  }
  CHECK(std::log2(err_u[0] / err_u[1]) >= 1.8);
  CHECK(err_dn[1] <= 0.05 * pi);
  CHECK(err_dn[1] < err_dn[0]);
}

TEST_CASE("normal derivative is exact for affine fields on a rectangle") {
  Domain d = test::unit_square(16);
  const auto& dm = d.dirichlet();
  auto affine = [](const Point& x) { return 0.3 + 2.0 * x[0] - 0.5 * x[1]; };
  Field u = on_unknowns(d, affine);
  Field g(dm.faces().size());
  for (std::size_t f = 0; f < g.size(); ++f) g[f] = affine(dm.faces()[f].position);
  Field dn = face_normal_derivative(dm, u, g);
  for (std::size_t f = 0; f < g.size(); ++f) {
    const Point& nu = dm.faces()[f].normal;
    CHECK(dn[f] == doctest::Approx(2.0 * nu[0] - 0.5 * nu[1]).epsilon(1e-10).scale(1.0));
  }
  for (const auto& f : dm.faces()) CHECK(f.theta == 1.0);
}

TEST_CASE("energy is conserved without source or boundary data") {
  Domain d = test::unit_disk(64);
  SpeedField s = build_speed_field(test::centred_disk(0.2), 0.9, d);
  CounterRng rng(2);
  Field u0 = smooth_random_unknowns(d, rng), u1 = smooth_random_unknowns(d, rng);
  DirichletResult r = simulate_dirichlet(s, d, free_problem(u0, u1, 2.0 * d.diameter()));
  const double E0 = r.energy.front();
  CHECK(E0 > 0.0);
  for (double e : r.energy) CHECK(std::abs(e - E0) <= 1e-10 * E0);
}

TEST_CASE("solution map is linear") {
  Domain d = test::unit_disk(32);
  SpeedField s = build_speed_field(test::centred_disk(0.2), 0.85, d);
  CounterRng rng(4);
  Field a0 = smooth_random_unknowns(d, rng), a1 = smooth_random_unknowns(d, rng);
  Field b0 = smooth_random_unknowns(d, rng), b1 = smooth_random_unknowns(d, rng);
  auto run = [&](double alpha, double beta, double gamma) {
    Field u0(a0.size()), u1(a0.size());
    for (std::size_t i = 0; i < u0.size(); ++i) {
      u0[i] = alpha * a0[i] + beta * b0[i];
      u1[i] = alpha * a1[i] + beta * b1[i];
    }
    DirichletProblem p = free_problem(u0, u1, 1.0);
    p.boundary = [gamma](long k, std::span<double> g) {
      for (std::size_t f = 0; f < g.size(); ++f) g[f] = gamma * std::sin(0.01 * k) * std::cos(0.3 * f);
    };
    return simulate_dirichlet(s, d, p).u_last;
  };
  Field ua = run(1.0, 0.0, 0.0), ub = run(0.0, 1.0, 0.0), ug = run(0.0, 0.0, 1.0);
  Field uc = run(2.0, -1.0, 3.0);
  double scale = max_abs(uc), err = 0.0;
  for (std::size_t i = 0; i < uc.size(); ++i)
    err = std::max(err, std::abs(uc[i] - (2.0 * ua[i] - ub[i] + 3.0 * ug[i])));
  CHECK(err <= 1e-11 * scale);
}

TEST_CASE("leapfrog runs backward to the initial data") {
  Domain d = test::unit_disk(48);
  SpeedField s = build_speed_field(test::centred_disk(0.2), 0.9, d);
  CounterRng rng(6);
  Field u0 = smooth_random_unknowns(d, rng), u1 = smooth_random_unknowns(d, rng);
  DirichletResult fwd = simulate_dirichlet(s, d, free_problem(u0, u1, 1.5));
  DirichletProblem back = free_problem(fwd.u_last, fwd.u_penultimate, 1.5);
  back.backward = true;
  back.two_level = true;
  DirichletResult bwd = simulate_dirichlet(s, d, back);
  CHECK(test::euclid_diff(bwd.u_first, u0) <= 1e-6 * test::euclid(u0));
  CHECK(test::euclid_diff(bwd.u_second, fwd.u_second) <= 1e-6 * test::euclid(u0));
}

TEST_CASE("boundary pulse respects the finite propagation speed") {
  Domain d = test::unit_square(64);
  const std::size_t n = d.dirichlet().size();
  const auto& faces = d.dirichlet().faces();
  DirichletProblem p = free_problem(Field(n, 0.0), Field(n, 0.0), 1.6);
  const double dt = time_grid(d, uniform_speed(d), p.T, p.cfl_factor).dt;
  p.boundary = [&](long k, std::span<double> g) {
    double t = k * dt;
    double v = t < 0.2 ? std::pow(std::sin(pi * t / 0.2), 4) : 0.0;
    for (std::size_t f = 0; f < g.size(); ++f)
      if (faces[f].normal[0] < -0.5) g[f] = v * std::pow(std::sin(pi * faces[f].position[1]), 2);
  };
  DirichletResult r = simulate_dirichlet(uniform_speed(d), d, p);
  double peak = 0.0;
  for (long k = 0; k <= r.n_steps; ++k)
    for (std::size_t f = 0; f < faces.size(); ++f)
      if (faces[f].normal[0] > 0.5) peak = std::max(peak, std::abs(r.trace.value(k, f)));
  REQUIRE(peak > 0.0);
  double arrival = -1.0;
  for (long k = 0; k <= r.n_steps && arrival < 0.0; ++k)
    for (std::size_t f = 0; f < faces.size(); ++f)
      if (faces[f].normal[0] > 0.5 && std::abs(r.trace.value(k, f)) > 1e-3 * peak) {
        arrival = k * r.dt;
        break;
      }
  // Dispersive precursors of the scheme lead the physical front slightly.
  CHECK(arrival >= 1.0 - 4.0 * d.h());
  // Explicit stencil: data move at most one node per step.
  for (long k = 0; k * r.dt < 0.45; ++k)
    for (std::size_t f = 0; f < faces.size(); ++f)
      if (faces[f].normal[0] > 0.5) CHECK(r.trace.value(k, f) == 0.0);
}

TEST_CASE("normal trace recomputed from stored levels matches the recorded one") {
  Domain d = test::unit_disk(24);
  SpeedField s = build_speed_field(test::centred_disk(0.2), 0.9, d);
  CounterRng rng(9);
  Field u0 = smooth_random_unknowns(d, rng);
  DirichletOptions o;
  o.store_stride = 1;
  DirichletResult r = simulate_dirichlet(s, d, free_problem(u0, Field(u0.size(), 0.0), 0.5), o);
  NormalTrace tr = normal_trace(r.trajectory, d);
  REQUIRE(tr.values.size() == r.trace.values.size());
  for (std::size_t i = 0; i < tr.values.size(); ++i) CHECK(tr.values[i] == r.trace.values[i]);
  CHECK(tr.l2_norm_sq() > 0.0);

  WaveTrajectory sparse = r.trajectory;
  sparse.steps.pop_back();
  sparse.p.pop_back();
  CHECK_THROWS_AS(normal_trace(sparse, d), PreconditionError);

  DirichletResult zero = simulate_dirichlet(s, d, free_problem(Field(u0.size(), 0.0), Field(u0.size(), 0.0), 0.5), o);
  CHECK(max_abs(normal_trace(zero.trajectory, d).values) == 0.0);
}

TEST_CASE("transposition identity: trivial cases and smooth probes") {
  Domain d = test::unit_disk(64);
  SpeedField s = build_speed_field(test::centred_disk(0.2), 0.9, d);
  const std::size_t n = d.dirichlet().size();
  const double T = 1.0;
  CounterRng rng(12);
  Field zero(n, 0.0);
  Field Fshape = smooth_random_unknowns(d, rng);
  const double dt = time_grid(d, s, T, 0.5).dt;
  auto F = [&](long k, std::span<double> out) {
    double t = k * dt;
    for (std::size_t i = 0; i < n; ++i) out[i] = std::sin(3.0 * t) * Fshape[i];
  };
  TranspositionReport z = transposition_check(s, d, zero, zero, {}, F, T);
  CHECK(z.lhs == 0.0);
  CHECK(z.rhs == 0.0);

  Field psi0 = on_unknowns(d, [](const Point& x) {
    double r2 = std::pow(x[0] - 0.45, 2) + std::pow(x[1] - 0.5, 2);
    return std::exp(-r2 / 0.02);
  });
  TranspositionReport nf = transposition_check(s, d, psi0, zero, {}, {}, T);
  CHECK(nf.lhs == 0.0);
  CHECK(std::abs(nf.rhs) <= 1e-3 * std::max(1e-300, std::max(std::abs(nf.term_psi0), std::abs(nf.term_psi1))));

  TranspositionReport sm = transposition_check(s, d, psi0, zero, {}, F, T);
  CHECK(std::abs(sm.lhs) > 0.0);
  CHECK(sm.defect_rel <= 0.02);
}

TEST_CASE("preconditions") {
  Domain d = test::unit_disk(24);
  SpeedField s = uniform_speed(d);
  const std::size_t n = d.dirichlet().size();
  CHECK_THROWS_AS(simulate_dirichlet(s, d, free_problem(Field(n + 1, 0.0), Field(n, 0.0), 1.0)),
                  PreconditionError);
  DirichletProblem p = free_problem(Field(n, 0.0), Field(n, 0.0), 1.0);
  p.cfl_factor = 0.8;
  CHECK_THROWS_AS(simulate_dirichlet(s, d, p), NumericalError);
}

}  // TEST_SUITE
