#include "paikit/initial_data.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "paikit/error.hpp"

namespace paikit {

namespace {

using Triplet = Eigen::Triplet<double>;

double lerp(double out, double in, double chi) { return out + (in - out) * chi; }

// Derivative stencil of u along +axis at `node`: central where possible,
// otherwise one-sided (second order when two nodes are available).
void axis_stencil(const NeumannMesh& mesh, std::uint32_t node, int axis, double scale,
                  std::vector<std::pair<std::uint32_t, double>>& out) {
  const double h = mesh.h();
  std::int32_t p = mesh.neighbor(node, axis, +1);
  std::int32_t m = mesh.neighbor(node, axis, -1);
  if (p >= 0 && m >= 0) {
    out.emplace_back(p, scale / (2.0 * h));
    out.emplace_back(m, -scale / (2.0 * h));
    return;
  }
  int side = p >= 0 ? +1 : -1;
  std::int32_t n1 = p >= 0 ? p : m;
  if (n1 < 0) return;
  std::int32_t n2 = mesh.neighbor(n1, axis, side);
  double s = scale * side;
  if (n2 >= 0) {
    out.emplace_back(node, -3.0 * s / (2.0 * h));
    out.emplace_back(n1, 4.0 * s / (2.0 * h));
    out.emplace_back(n2, -s / (2.0 * h));
  } else {
    out.emplace_back(node, -s / h);
    out.emplace_back(n1, s / h);
  }
}

}  // namespace

void OpticalCoefficients::validate() const {
  if (!(D_out > 0.0 && D_in > 0.0)) throw ConfigError("diffusion coefficients must be positive");
  if (!(mu_out >= 0.0 && mu_in >= 0.0)) throw ConfigError("absorption must be nonnegative");
  if (!(mu_in > mu_out)) throw ConfigError("absorption inside the inclusion must exceed mu_out");
  if (!(beta > 0.0)) throw ConfigError("boundary damping beta must be positive");
  if (!(M > 0.0)) throw ConfigError("H^2 bound M must be positive");
}

SparseMatrix diffusion_matrix(const OpticalCoefficients& coeffs, std::span<const double> indicator,
                              const NeumannMesh& mesh) {
  const std::size_t n = mesh.size();
  std::vector<Triplet> trip;
  trip.reserve(n + 4 * mesh.edges().size() + mesh.boundary().size());
  auto mass = mesh.mass();
  for (std::size_t i = 0; i < n; ++i)
    trip.emplace_back(i, i, mass[i] * lerp(coeffs.mu_out, coeffs.mu_in, indicator[i]));
  for (const auto& e : mesh.edges()) {
    double Da = lerp(coeffs.D_out, coeffs.D_in, indicator[e.a]);
    double Db = lerp(coeffs.D_out, coeffs.D_in, indicator[e.b]);
    double k = e.weight * 2.0 * Da * Db / (Da + Db);
    trip.emplace_back(e.a, e.a, k);
    trip.emplace_back(e.b, e.b, k);
    trip.emplace_back(e.a, e.b, -k);
    trip.emplace_back(e.b, e.a, -k);
  }
  for (const auto& b : mesh.boundary()) trip.emplace_back(b.node, b.node, 0.5 * b.weight);
  SparseMatrix A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

Field diffusion_rhs(const OpticalCoefficients& coeffs, const NeumannMesh& mesh) {
  Field b(mesh.size(), 0.0);
  auto bnd = mesh.boundary();
  if (!coeffs.illumination_profile.empty() && coeffs.illumination_profile.size() != bnd.size())
    throw ConfigError("illumination profile length does not match the boundary node count");
  for (std::size_t s = 0; s < bnd.size(); ++s) b[bnd[s].node] = bnd[s].weight * coeffs.illumination_at(s);
  return b;
}

Field solve_diffusion(const OpticalCoefficients& coeffs, const SpeedField& speed,
                      const Domain& domain, Field* u_out) {
  const auto& mesh = domain.neumann();
  if (speed.indicator.size() != mesh.size()) throw PreconditionError("speed field does not match the mesh");
  SparseMatrix A = diffusion_matrix(coeffs, speed.indicator, mesh);
  Field b = diffusion_rhs(coeffs, mesh);
  Field u = solve_spd(A, b);
  Field f(u.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    f[i] = coeffs.grueneisen * lerp(coeffs.mu_out, coeffs.mu_in, speed.indicator[i]) * u[i];
  if (u_out) *u_out = std::move(u);
  return f;
}

void diffusion_indicator_gradient(const OpticalCoefficients& coeffs,
                                  std::span<const double> indicator, const Domain& domain,
                                  std::span<const double> u, std::span<const double> dJ_df,
                                  std::span<double> dJ_dind) {
  const auto& mesh = domain.neumann();
  const std::size_t n = mesh.size();
  const double dmu = coeffs.mu_in - coeffs.mu_out;
  const double dD = coeffs.D_in - coeffs.D_out;
  Field rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mu = lerp(coeffs.mu_out, coeffs.mu_in, indicator[i]);
    rhs[i] = coeffs.grueneisen * mu * dJ_df[i];
    dJ_dind[i] += coeffs.grueneisen * dmu * u[i] * dJ_df[i];
  }
  SparseMatrix A = diffusion_matrix(coeffs, indicator, mesh);
  Field z = solve_spd(A, rhs);
  auto mass = mesh.mass();
  for (std::size_t i = 0; i < n; ++i) dJ_dind[i] -= z[i] * mass[i] * dmu * u[i];
  if (dD == 0.0) return;
  for (const auto& e : mesh.edges()) {
    double Da = lerp(coeffs.D_out, coeffs.D_in, indicator[e.a]);
    double Db = lerp(coeffs.D_out, coeffs.D_in, indicator[e.b]);
    double s = Da + Db;
    double q = (z[e.a] - z[e.b]) * (u[e.a] - u[e.b]) * e.weight;
    dJ_dind[e.a] -= q * 2.0 * Db * Db / (s * s) * dD;
    dJ_dind[e.b] -= q * 2.0 * Da * Da / (s * s) * dD;
  }
}

std::vector<std::pair<std::uint32_t, double>> normal_derivative_stencil(const NeumannMesh& mesh,
                                                                        std::size_t slot) {
  const auto& b = mesh.boundary()[slot];
  std::vector<std::pair<std::uint32_t, double>> st;
  for (int k = 0; k < mesh.dim(); ++k)
    if (std::abs(b.normal[k]) > 1e-14) axis_stencil(mesh, b.node, k, b.normal[k], st);
  return st;
}

Field normal_derivative(const NeumannMesh& mesh, std::span<const double> u) {
  const std::size_t nb = mesh.boundary().size();
  Field d(nb, 0.0);
  for (std::size_t s = 0; s < nb; ++s)
    for (const auto& [node, w] : normal_derivative_stencil(mesh, s)) d[s] += w * u[node];
  return d;
}

namespace {

// Interior Laplace system of the closed mesh with boundary nodes eliminated.
struct InteriorLaplace {
  std::vector<std::int32_t> interior_of;  // closed node -> interior index
  std::vector<std::uint32_t> nodes;
  SparseMatrix K;
};

InteriorLaplace interior_laplace(const NeumannMesh& mesh) {
  InteriorLaplace L;
  L.interior_of.assign(mesh.size(), -1);
  for (std::size_t i = 0; i < mesh.size(); ++i)
    if (mesh.boundary_slot(i) < 0) {
      L.interior_of[i] = static_cast<std::int32_t>(L.nodes.size());
      L.nodes.push_back(static_cast<std::uint32_t>(i));
    }
  std::vector<Triplet> trip;
  for (const auto& e : mesh.edges()) {
    std::int32_t a = L.interior_of[e.a], b = L.interior_of[e.b];
    if (a >= 0) trip.emplace_back(a, a, e.weight);
    if (b >= 0) trip.emplace_back(b, b, e.weight);
    if (a >= 0 && b >= 0) {
      trip.emplace_back(a, b, -e.weight);
      trip.emplace_back(b, a, -e.weight);
    }
  }
  L.K.resize(L.nodes.size(), L.nodes.size());
  L.K.setFromTriplets(trip.begin(), trip.end());
  return L;
}

void check_beta(const NeumannMesh& mesh, std::span<const double> beta) {
  if (beta.size() != mesh.boundary().size())
    throw PreconditionError("beta must have one value per boundary node");
  for (double b : beta)
    if (!(b > 0.0)) throw PreconditionError("beta must be positive on the whole boundary");
}

}  // namespace

Field harmonic_g(std::span<const double> f, std::span<const double> beta, const Domain& domain) {
  const auto& mesh = domain.neumann();
  check_beta(mesh, beta);
  Field dn = normal_derivative(mesh, f);
  Field g(mesh.size(), 0.0);
  auto bnd = mesh.boundary();
  for (std::size_t s = 0; s < bnd.size(); ++s) g[bnd[s].node] = -dn[s] / beta[s];
  InteriorLaplace L = interior_laplace(mesh);
  Field rhs(L.nodes.size(), 0.0);
  for (const auto& e : mesh.edges()) {
    std::int32_t a = L.interior_of[e.a], b = L.interior_of[e.b];
    if (a >= 0 && b < 0) rhs[a] += e.weight * g[e.b];
    if (b >= 0 && a < 0) rhs[b] += e.weight * g[e.a];
  }
  Field gi = solve_spd(L.K, rhs);
  for (std::size_t k = 0; k < L.nodes.size(); ++k) g[L.nodes[k]] = gi[k];
  return g;
}

Field harmonic_g_transpose(std::span<const double> dJ_dg, std::span<const double> beta,
                           const Domain& domain) {
  const auto& mesh = domain.neumann();
  check_beta(mesh, beta);
  InteriorLaplace L = interior_laplace(mesh);
  Field gi(L.nodes.size());
  for (std::size_t k = 0; k < L.nodes.size(); ++k) gi[k] = dJ_dg[L.nodes[k]];
  Field y = solve_spd(L.K, gi);
  // Boundary values collect their direct sensitivity plus the lifting term.
  Field gb(mesh.size(), 0.0);
  for (std::size_t i = 0; i < mesh.size(); ++i)
    if (mesh.boundary_slot(i) >= 0) gb[i] = dJ_dg[i];
  for (const auto& e : mesh.edges()) {
    std::int32_t a = L.interior_of[e.a], b = L.interior_of[e.b];
    if (a >= 0 && b < 0) gb[e.b] += e.weight * y[a];
    if (b >= 0 && a < 0) gb[e.a] += e.weight * y[b];
  }
  Field df(mesh.size(), 0.0);
  auto bnd = mesh.boundary();
  for (std::size_t s = 0; s < bnd.size(); ++s) {
    double coef = -gb[bnd[s].node] / beta[s];
    for (const auto& [node, w] : normal_derivative_stencil(mesh, s)) df[node] += coef * w;
  }
  return df;
}

double l2_norm(const NeumannMesh& mesh, std::span<const double> u) {
  auto m = mesh.mass();
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s += m[i] * u[i] * u[i];
  return std::sqrt(s);
}

double h1_norm(const NeumannMesh& mesh, std::span<const double> u) {
  double l2 = l2_norm(mesh, u);
  return std::sqrt(l2 * l2 + mesh.stiffness_energy(u));
}

double h2_norm(const NeumannMesh& mesh, std::span<const double> u) {
  double h1 = h1_norm(mesh, u);
  Field ku(mesh.size());
  mesh.apply_stiffness(u, ku);
  auto m = mesh.mass();
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (mesh.boundary_slot(i) >= 0) continue;
    double lap = ku[i] / m[i];
    s += m[i] * lap * lap;
  }
  return std::sqrt(h1 * h1 + s);
}

InitialData make_initial_data(const OpticalCoefficients& coeffs, const SpeedField& speed,
                              const Domain& domain) {
  coeffs.validate();
  const auto& mesh = domain.neumann();
  InitialData d;
  d.f = solve_diffusion(coeffs, speed, domain);
  d.f_h1 = h1_norm(mesh, d.f);
  d.f_h2 = h2_norm(mesh, d.f);
  if (d.f_h2 > coeffs.M)
    throw PreconditionError("initial pressure exceeds the admissible bound: ||f||_H2 = " +
                            std::to_string(d.f_h2) + " > M = " + std::to_string(coeffs.M));
  d.beta.assign(mesh.boundary().size(), coeffs.beta);
  d.g = harmonic_g(d.f, d.beta, domain);
  return d;
}

CompatibilityReport check_compatibility(const InitialData& data, const SpeedField& speed,
                                        const Domain& domain, double tol) {
  const auto& mesh = domain.neumann();
  CompatibilityReport r;
  auto m = mesh.mass();
  for (std::size_t i = 0; i < m.size(); ++i) r.p1a += m[i] * speed.c_inv2[i] * data.g[i];
  auto bnd = mesh.boundary();
  Field dn = normal_derivative(mesh, data.f);
  double scale = 0.0;
  for (std::size_t s = 0; s < bnd.size(); ++s) {
    r.p1a += bnd[s].weight * data.beta[s] * data.f[bnd[s].node];
    double bg = data.beta[s] * data.g[bnd[s].node];
    r.p2a = std::max(r.p2a, std::abs(dn[s] + bg));
    scale = std::max({scale, std::abs(dn[s]), std::abs(bg)});
  }
  scale = std::max(scale, max_abs(data.f) / domain.diameter());
  r.p2a_relative = scale > 0.0 ? r.p2a / scale : r.p2a;
  bool p2 = r.p2a_relative <= tol;
  double p1_scale = 0.0;
  for (std::size_t s = 0; s < bnd.size(); ++s)
    p1_scale += bnd[s].weight * data.beta[s] * std::abs(data.f[bnd[s].node]);
  bool p1 = std::abs(r.p1a) <= tol * std::max(p1_scale, 1.0);
  r.boundary_compatible = p2;
  r.global_compatible = p1 && p2;
  return r;
}

ProbeResult reverse_inequality_probe(const OpticalCoefficients& model,
                                     std::span<const std::pair<StarInclusion, StarInclusion>> pairs,
                                     double a, const Domain& domain) {
  if (pairs.empty()) throw PreconditionError("inclusion pair list is empty");
  const auto& mesh = domain.neumann();
  ProbeResult r;
  r.d_emp = std::numeric_limits<double>::infinity();
  double scale = 0.0;
  for (const auto& [w1, w2] : pairs) {
    SpeedField s1 = build_speed_field(w1, a, domain);
    SpeedField s2 = build_speed_field(w2, a, domain);
    bool resolved = false;
    for (std::size_t i = 0; i < mesh.size() && !resolved; ++i)
      resolved = std::abs(s1.indicator[i] - s2.indicator[i]) >= 1.0 - 1e-12;
    if (!resolved) throw PreconditionError("inclusion pair does not differ on a fully resolved cell");
    Field f1 = solve_diffusion(model, s1, domain);
    Field f2 = solve_diffusion(model, s2, domain);
    Field diff(f1.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = f1[i] - f2[i];
    double d = h1_norm(mesh, diff);
    r.pair_norms.push_back(d);
    r.d_emp = std::min(r.d_emp, d);
    scale = std::max(scale, h1_norm(mesh, f1));
  }
  r.admissible = r.d_emp > 1e-10 * std::max(scale, 1e-300);
  return r;
}

}  // namespace paikit
