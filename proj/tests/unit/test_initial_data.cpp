#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "paikit/error.hpp"
#include "paikit/initial_data.hpp"
#include "paikit/random.hpp"
#include "support.hpp"

using namespace paikit;

namespace {

// Homogeneous medium on a disk of radius R: u = A I0(k r), k^2 = mu / D, with
// the Robin condition D u' + u / 2 = q fixing A.
double bessel_fluence(const OpticalCoefficients& c, double R, double r) {
  const double k = std::sqrt(c.mu_out / c.D_out);
  const double A = c.illumination / (c.D_out * k * std::cyl_bessel_i(1.0, k * R) +
                                     0.5 * std::cyl_bessel_i(0.0, k * R));
  return A * std::cyl_bessel_i(0.0, k * r);
}

Field constant_field(const Domain& d, double v) { return Field(d.neumann().size(), v); }

}  // namespace

TEST_SUITE("initial_data") {

TEST_CASE("homogeneous fluence converges to the Bessel solution") {
  OpticalCoefficients c;
  double prev = 1e300;
  for (int res : {32, 64, 128}) {
    Domain d = test::unit_disk(res);
    SpeedField s = uniform_speed(d);
    Field u;
    Field f = solve_diffusion(c, s, d, &u);
    double num = 0.0, den = 0.0;
    auto m = d.neumann().mass();
    auto pos = d.neumann().positions();
    for (std::size_t i = 0; i < u.size(); ++i) {
      double ex = bessel_fluence(c, 0.5, norm(sub(pos[i], d.center())));
      num += m[i] * (u[i] - ex) * (u[i] - ex);
      den += m[i] * ex * ex;
      CHECK(f[i] == doctest::Approx(c.grueneisen * c.mu_out * u[i]).epsilon(1e-14));
    }
    double err = std::sqrt(num / den);
    CHECK(err < 0.05);
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("iterative diffusion solve agrees with a dense direct solve") {
  Domain d = test::unit_disk(32);
  OpticalCoefficients c;
  c.mu_in = 2.0 * c.mu_out;
  StarInclusion inc = test::centred_disk(0.2);
  SpeedField s = build_speed_field(inc, 0.9, d);
  Field u;
  Field f = solve_diffusion(c, s, d, &u);
  Eigen::MatrixXd A(diffusion_matrix(c, s.indicator, d.neumann()));
  Field b = diffusion_rhs(c, d.neumann());
  Eigen::VectorXd ud = A.ldlt().solve(Eigen::Map<Eigen::VectorXd>(b.data(), b.size()));
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    err = std::max(err, std::abs(u[i] - ud[i]));
    scale = std::max(scale, std::abs(ud[i]));
  }
  CHECK(err <= 1e-8 * scale);

  // f jumps up across the interface: compare nodes just inside and outside.
  const auto& mesh = d.neumann();
  double inner = 0.0, outer = 0.0;
  int ni = 0, no = 0;
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    double r = norm(sub(mesh.positions()[i], inc.x0()));
    if (s.indicator[i] == 1.0 && r > 0.2 - 3.0 * d.h()) inner += f[i], ++ni;
    if (s.indicator[i] == 0.0 && r < 0.2 + 3.0 * d.h()) outer += f[i], ++no;
  }
  REQUIRE(ni > 0);
  REQUIRE(no > 0);
  CHECK(inner / ni > outer / no);
  for (double v : f) CHECK(v > 0.0);
}

TEST_CASE("zero illumination gives zero pressure") {
  Domain d = test::unit_disk(32);
  OpticalCoefficients c;
  c.illumination = 0.0;
  Field f = solve_diffusion(c, build_speed_field(test::centred_disk(0.2), 0.9, d), d);
  CHECK(test::euclid(f) == 0.0);
}

TEST_CASE("without optical contrast f does not see the inclusion") {
  Domain d = test::unit_disk(32);
  OpticalCoefficients c;
  c.mu_in = c.mu_out;
  c.D_in = c.D_out;
  Field f1 = solve_diffusion(c, build_speed_field(test::centred_disk(0.15), 0.9, d), d);
  Field f2 = solve_diffusion(c, build_speed_field(test::centred_disk(0.3), 0.8, d), d);
  CHECK(test::euclid_diff(f1, f2) == 0.0);
}

TEST_CASE("f depends Lipschitz-continuously on the radius") {
  Domain d = test::unit_disk(64);
  OpticalCoefficients c;
  auto f_of = [&](double r) { return solve_diffusion(c, build_speed_field(test::centred_disk(r), 0.9, d), d); };
  Field f0 = f_of(0.2);
  std::vector<double> slopes;
  for (double delta : {1e-3, 2e-3, 4e-3}) {
    Field f1 = f_of(0.2 + delta);
    Field diff(f0.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = f1[i] - f0[i];
    slopes.push_back(l2_norm(d.neumann(), diff) / delta);
  }
  CHECK(slopes[0] > 0.0);
  for (double s : slopes) CHECK(s == doctest::Approx(slopes[0]).epsilon(0.1));
}

TEST_CASE("indicator sensitivity of the diffusion model matches finite differences") {
  Domain d = test::unit_disk(24);
  OpticalCoefficients c;
  SpeedField s = build_speed_field(test::centred_disk(0.2), 0.9, d);
  CounterRng rng(3);
  Field w(d.neumann().size());
  for (double& v : w) v = rng.normal();
  Field u;
  solve_diffusion(c, s, d, &u);
  Field grad(w.size(), 0.0);
  diffusion_indicator_gradient(c, s.indicator, d, u, w, grad);
  auto J = [&](const Field& ind) {
    SpeedField t = s;
    t.indicator = ind;
    return test::dot(w, solve_diffusion(c, t, d));
  };
  for (std::size_t node : {std::size_t{0}, w.size() / 3, w.size() / 2, w.size() - 5}) {
    Field p = s.indicator, m = s.indicator;
    p[node] += 1e-6;
    m[node] -= 1e-6;
    double fd = (J(p) - J(m)) / 2e-6;
    CHECK(grad[node] == doctest::Approx(fd).epsilon(1e-5).scale(1e-8));
  }
}

TEST_CASE("harmonic velocity datum: boundary values, harmonicity, maximum principle") {
  Domain d = test::unit_square(16);
  const auto& mesh = d.neumann();
  Field f(mesh.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = mesh.positions()[i][0];
  Field beta(mesh.boundary().size(), 1.0);
  Field g = harmonic_g(f, beta, d);

  // Exact one-sided differences for the affine f: g = -nu_x on the boundary.
  for (const auto& b : mesh.boundary()) CHECK(g[b.node] == doctest::Approx(-b.normal[0]).epsilon(1e-12).scale(1e-12));

  // Oracle: independently assembled 5-point Laplacian, dense solve.
  const auto& grid = d.grid();
  auto nodes = grid.nodes();
  const int nx = nodes[0], ny = nodes[1], n = (nx - 2) * (ny - 2);
  auto id = [&](int i, int j) { return (j - 1) * (nx - 2) + (i - 1); };
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  auto gval = [&](int i, int j) { return g[mesh.node_at(grid.index({i, j, 0}))]; };
  for (int j = 1; j < ny - 1; ++j)
    for (int i = 1; i < nx - 1; ++i) {
      L(id(i, j), id(i, j)) = 4.0;
      const int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
      for (const auto& q : nb) {
        if (q[0] == 0 || q[0] == nx - 1 || q[1] == 0 || q[1] == ny - 1) rhs[id(i, j)] += gval(q[0], q[1]);
        else L(id(i, j), id(q[0], q[1])) = -1.0;
      }
    }
  Eigen::VectorXd ref = L.lu().solve(rhs);
  double err = 0.0;
  for (int j = 1; j < ny - 1; ++j)
    for (int i = 1; i < nx - 1; ++i) err = std::max(err, std::abs(gval(i, j) - ref[id(i, j)]));
  CHECK(err <= 1e-10);

  double bmin = 1e300, bmax = -1e300;
  for (const auto& b : mesh.boundary()) bmin = std::min(bmin, g[b.node]), bmax = std::max(bmax, g[b.node]);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(g[i] <= bmax + 1e-12);
    CHECK(g[i] >= bmin - 1e-12);
  }
}

TEST_CASE("constant f gives zero velocity datum") {
  Domain d = test::unit_disk(32);
  Field g = harmonic_g(constant_field(d, 3.0), Field(d.neumann().boundary().size(), 2.0), d);
  CHECK(max_abs(g) <= 1e-12);
  CHECK_THROWS_AS(harmonic_g(constant_field(d, 3.0), Field(d.neumann().boundary().size(), 0.0), d),
                  PreconditionError);
}

TEST_CASE("velocity datum only sees f near the boundary") {
  Domain d = test::unit_disk(48);
  OpticalCoefficients c;
  InitialData data = make_initial_data(c, build_speed_field(test::centred_disk(0.2), 0.9, d), d);
  Field f2 = data.f;
  const auto& mesh = d.neumann();
  for (std::size_t i = 0; i < f2.size(); ++i)
    if (norm(sub(mesh.positions()[i], d.center())) < 0.3) f2[i] *= 1.5;
  Field g2 = harmonic_g(f2, data.beta, d);
  CHECK(test::euclid_diff(data.g, g2) == 0.0);
}

TEST_CASE("harmonic_g_transpose is the transpose") {
  Domain d = test::unit_disk(32);
  CounterRng rng(8);
  const auto& mesh = d.neumann();
  Field beta(mesh.boundary().size());
  for (double& b : beta) b = rng.uniform(0.5, 2.0);
  Field f = smooth_random_field(d, mesh.positions(), rng, 6, 2.0, false);
  Field w(mesh.size());
  for (double& v : w) v = rng.normal();
  double lhs = test::dot(harmonic_g(f, beta, d), w);
  double rhs = test::dot(f, harmonic_g_transpose(w, beta, d));
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
}

TEST_CASE("compatibility residuals") {
  Domain d = test::unit_disk(32);
  SpeedField s = build_speed_field(test::centred_disk(0.2), 0.9, d);
  const std::size_t nb = d.neumann().boundary().size();

  InitialData zero{constant_field(d, 0.0), constant_field(d, 0.0), Field(nb, 1.0)};
  CompatibilityReport z = check_compatibility(zero, s, d);
  CHECK(z.p1a == 0.0);
  CHECK(z.p2a == 0.0);
  CHECK(z.global_compatible);

  InitialData flat{constant_field(d, 2.0), constant_field(d, 0.0), Field(nb, 1.5)};
  CompatibilityReport k = check_compatibility(flat, s, d);
  CHECK(k.p2a <= 1e-12);
  CHECK(k.p1a == doctest::Approx(2.0 * 1.5 * d.neumann().boundary_measure()).epsilon(1e-12));
  CHECK(k.boundary_compatible);
  CHECK_FALSE(k.global_compatible);

  OpticalCoefficients c;
  InitialData data = make_initial_data(c, s, d);
  CompatibilityReport m = check_compatibility(data, s, d);
  CHECK(m.p2a_relative <= 1e-10);
  CHECK(m.boundary_compatible);
}

TEST_CASE("H^2 bound is enforced") {
  Domain d = test::unit_disk(32);
  OpticalCoefficients c;
  c.M = 1e-6;
  CHECK_THROWS_AS(make_initial_data(c, build_speed_field(test::centred_disk(0.2), 0.9, d), d),
                  PreconditionError);
}

TEST_CASE("discrete norms of simple fields") {
  Domain d = test::unit_square(64);
  const auto& mesh = d.neumann();
  Field one(mesh.size(), 1.0), x(mesh.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = mesh.positions()[i][0];
  CHECK(l2_norm(mesh, one) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(h1_norm(mesh, one) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mesh.stiffness_energy(x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(h1_norm(mesh, x) == doctest::Approx(std::sqrt(1.0 / 3.0 + 1.0)).epsilon(1e-4));
}

TEST_CASE("reverse-inequality probe") {
  Domain d = test::unit_disk(64);
  OpticalCoefficients c;
  std::vector<std::pair<StarInclusion, StarInclusion>> pairs{
      {test::centred_disk(0.2), test::centred_disk(0.3)}};
  ProbeResult p = reverse_inequality_probe(c, pairs, 0.9, d);
  CHECK(p.d_emp > 0.0);
  CHECK(p.admissible);
  REQUIRE(p.pair_norms.size() == 1);

  OpticalCoefficients flat = c;
  flat.mu_in = flat.mu_out;
  flat.D_in = flat.D_out;
  ProbeResult q = reverse_inequality_probe(flat, pairs, 0.9, d);
  CHECK(q.d_emp == 0.0);
  CHECK_FALSE(q.admissible);

  std::vector<std::pair<StarInclusion, StarInclusion>> same{{test::centred_disk(0.2), test::centred_disk(0.2)}};
  CHECK_THROWS_AS(reverse_inequality_probe(c, same, 0.9, d), PreconditionError);
  CHECK_THROWS_AS(reverse_inequality_probe(c, {}, 0.9, d), PreconditionError);
}

TEST_CASE("boundary values of f barely depend on an interior inclusion") {
  Domain d = test::unit_disk(64);
  OpticalCoefficients c;
  Field f1 = solve_diffusion(c, build_speed_field(test::centred_disk(0.2), 0.9, d), d);
  Field f2 = solve_diffusion(c, build_speed_field(test::centred_disk(0.22), 0.9, d), d);
  double diff = 0.0;
  for (const auto& b : d.neumann().boundary()) diff = std::max(diff, std::abs(f1[b.node] - f2[b.node]));
  CHECK(diff <= 0.1 * max_abs(f1));
}

}  // TEST_SUITE
