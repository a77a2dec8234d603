#include "paikit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "paikit/error.hpp"

namespace paikit {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kSphereSamples = 2000;
constexpr int kCrispSubsamples = 8;

std::vector<Point> fibonacci_sphere(int n) {
  std::vector<Point> dirs(n);
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    double z = 1.0 - (2.0 * i + 1.0) / n;
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double phi = golden * i;
    dirs[i] = {r * std::cos(phi), r * std::sin(phi), z};
  }
  return dirs;
}

Point cross(const Point& a, const Point& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

std::vector<Point> boundary_samples(const StarInclusion& s, int samples) {
  std::vector<Point> pts;
  if (s.dim() == 2) {
    pts.reserve(samples);
    for (int i = 0; i < samples; ++i) {
      double th = 2.0 * kPi * i / samples;
      Point dir{std::cos(th), std::sin(th), 0.0};
      pts.push_back(add(s.x0(), scale(dir, s.radius(dir))));
    }
  } else {
    for (const auto& dir : fibonacci_sphere(std::max(samples, kSphereSamples)))
      pts.push_back(add(s.x0(), scale(dir, s.radius(dir))));
  }
  return pts;
}

}  // namespace

// ------------------------------------------------------------- StarInclusion

StarInclusion::StarInclusion(int dim, const Point& x0, std::vector<double> coeffs,
                             double smoothing_width)
    : dim_(dim), x0_(x0), coeffs_(std::move(coeffs)), width_(smoothing_width) {
  if (dim_ != 2 && dim_ != 3) throw GeometryError("inclusion dimension must be 2 or 3");
  if (coeffs_.empty()) throw GeometryError("inclusion needs at least the mean radius r0");
  if (dim_ == 2 && coeffs_.size() % 2 == 0)
    throw GeometryError("2-D radial coefficients must be [r0, a1, b1, ..., aK, bK]");
  if (dim_ == 3 && coeffs_.size() > 9)
    throw GeometryError("3-D radial coefficients support harmonics up to degree 2 (9 values)");
  for (int k = dim_; k < 3; ++k) x0_[k] = 0.0;
}

int StarInclusion::max_mode() const {
  if (dim_ == 2) return static_cast<int>(coeffs_.size() - 1) / 2;
  if (coeffs_.size() <= 1) return 0;
  return coeffs_.size() <= 4 ? 1 : 2;
}

StarInclusion StarInclusion::with_coeffs(std::vector<double> coeffs) const {
  return StarInclusion(dim_, x0_, std::move(coeffs), width_);
}

void StarInclusion::basis(const Point& dir, std::span<double> out) const {
  const std::size_t n = coeffs_.size();
  if (dim_ == 2) {
    double th = std::atan2(dir[1], dir[0]);
    out[0] = 1.0;
    for (std::size_t k = 1; 2 * k - 1 < n; ++k) {
      out[2 * k - 1] = std::cos(k * th);
      out[2 * k] = std::sin(k * th);
    }
    return;
  }
  const double x = dir[0], y = dir[1], z = dir[2];
  const double all[9] = {1.0, x, y, z, x * y, y * z, x * z, x * x - y * y, 3.0 * z * z - 1.0};
  for (std::size_t j = 0; j < n; ++j) out[j] = all[j];
}

double StarInclusion::radius(const Point& dir) const {
  double b[9];
  std::vector<double> big;
  std::span<double> buf(b, 9);
  if (coeffs_.size() > 9) {
    big.resize(coeffs_.size());
    buf = big;
  }
  basis(dir, buf);
  double r = 0.0;
  for (std::size_t j = 0; j < coeffs_.size(); ++j) r += coeffs_[j] * buf[j];
  return r;
}

void StarInclusion::radius_gradient(const Point& dir, std::span<double> out) const {
  basis(dir, out);
}

double StarInclusion::radius_at(double theta) const {
  return radius({std::cos(theta), std::sin(theta), 0.0});
}

double StarInclusion::radius_derivative_at(double theta) const {
  double d = 0.0;
  for (std::size_t k = 1; 2 * k - 1 < coeffs_.size(); ++k)
    d += k * (-coeffs_[2 * k - 1] * std::sin(k * theta) + coeffs_[2 * k] * std::cos(k * theta));
  return d;
}

double StarInclusion::signed_distance(const Point& x) const {
  Point rel = sub(x, x0_);
  double rho = norm(rel);
  if (dim_ == 2) {
    double th = std::atan2(rel[1], rel[0]);
    double r = radius_at(th);
    double t = radius_derivative_at(th) / r;
    return (rho - r) / std::sqrt(1.0 + t * t);
  }
  Point dir = rho > 0 ? scale(rel, 1.0 / rho) : Point{0.0, 0.0, 1.0};
  return rho - radius(dir);
}

void StarInclusion::signed_distance_gradient(const Point& x, std::span<double> out) const {
  Point rel = sub(x, x0_);
  double rho = norm(rel);
  const std::size_t n = coeffs_.size();
  if (dim_ == 3) {
    Point dir = rho > 0 ? scale(rel, 1.0 / rho) : Point{0.0, 0.0, 1.0};
    basis(dir, out);
    for (std::size_t j = 0; j < n; ++j) out[j] = -out[j];
    return;
  }
  double th = std::atan2(rel[1], rel[0]);
  double r = radius_at(th);
  double rp = radius_derivative_at(th);
  double t = rp / r;
  double q = std::sqrt(1.0 + t * t);
  double gap = rho - r;
  for (std::size_t j = 0; j < n; ++j) {
    double dr, drp;
    if (j == 0) {
      dr = 1.0, drp = 0.0;
    } else {
      int k = static_cast<int>((j + 1) / 2);
      if (j % 2 == 1) {
        dr = std::cos(k * th), drp = -k * std::sin(k * th);
      } else {
        dr = std::sin(k * th), drp = k * std::cos(k * th);
      }
    }
    double dt = (drp * r - rp * dr) / (r * r);
    double dq = t * dt / q;
    out[j] = -dr / q - gap * dq / (q * q);
  }
}

std::vector<Point> StarInclusion::sample_directions() const {
  if (dim_ == 3) return fibonacci_sphere(kSphereSamples);
  int n = std::max(360, 36 * max_mode());
  std::vector<Point> dirs(n);
  for (int i = 0; i < n; ++i) {
    double th = 2.0 * kPi * i / n;
    dirs[i] = {std::cos(th), std::sin(th), 0.0};
  }
  return dirs;
}

double StarInclusion::min_radius() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& d : sample_directions()) m = std::min(m, radius(d));
  return m;
}

double StarInclusion::max_radius() const {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& d : sample_directions()) m = std::max(m, radius(d));
  return m;
}

double StarInclusion::area() const {
  if (dim_ == 2) {
    double s = kPi * coeffs_[0] * coeffs_[0];
    for (std::size_t j = 1; j < coeffs_.size(); ++j) s += 0.5 * kPi * coeffs_[j] * coeffs_[j];
    return s;
  }
  auto dirs = fibonacci_sphere(kSphereSamples);
  double s = 0.0;
  for (const auto& d : dirs) {
    double r = radius(d);
    s += r * r * r;
  }
  return 4.0 * kPi / dirs.size() * s / 3.0;
}

double StarInclusion::default_margin(double h) const {
  return std::max(3.0 * h, effective_width(h) + 2.0 * h);
}

void StarInclusion::validate(const Domain& domain, double margin) const {
  if (domain.dim() != dim_) throw GeometryError("inclusion and domain dimensions differ");
  double rmin = min_radius();
  if (!(rmin > 0.0))
    throw GeometryError("degenerate inclusion: radius " + std::to_string(rmin) + " <= 0");
  double clearance = domain.distance_to_boundary(x0_);
  if (!(clearance > 0.0)) throw GeometryError("inclusion centre lies outside the domain");
  double rmax = max_radius();
  if (rmax > clearance - margin)
    throw GeometryError("inclusion violates the boundary margin: max radius " +
                        std::to_string(rmax) + " > " + std::to_string(clearance - margin));
}

// --------------------------------------------------------------- rasterizing

double smoothed_step(double z, double eps) {
  if (z <= -eps) return 0.0;
  if (z >= eps) return 1.0;
  return 0.5 * (1.0 + z / eps + std::sin(kPi * z / eps) / kPi);
}

double smoothed_step_derivative(double z, double eps) {
  if (z <= -eps || z >= eps) return 0.0;
  return 0.5 / eps * (1.0 + std::cos(kPi * z / eps));
}

Field rasterize_indicator(const StarInclusion& inclusion, const NeumannMesh& mesh) {
  const double h = mesh.h();
  const double eps = inclusion.effective_width(h);
  auto pos = mesh.positions();
  Field ind(pos.size(), 0.0);
  if (eps > 0.0) {
    for (std::size_t i = 0; i < pos.size(); ++i)
      ind[i] = smoothed_step(-inclusion.signed_distance(pos[i]), eps);
    return ind;
  }
  // Crisp mode: area (volume) fraction of the node's dual cell.
  const int m = kCrispSubsamples;
  const int d = mesh.dim();
  const int total = d == 2 ? m * m : m * m * m;
  const double reach = std::sqrt(static_cast<double>(d)) * h;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    double sd = inclusion.signed_distance(pos[i]);
    if (sd > reach) continue;
    if (sd < -reach) {
      ind[i] = 1.0;
      continue;
    }
    int inside = 0;
    for (int s = 0; s < total; ++s) {
      Point x = pos[i];
      int idx = s;
      for (int k = 0; k < d; ++k) {
        x[k] += h * ((idx % m + 0.5) / m - 0.5);
        idx /= m;
      }
      if (inclusion.contains(x)) ++inside;
    }
    ind[i] = static_cast<double>(inside) / total;
  }
  return ind;
}

void indicator_gradient(const StarInclusion& inclusion, const NeumannMesh& mesh,
                        std::span<const double> weight, std::span<double> grad) {
  const double eps = inclusion.effective_width(mesh.h());
  if (!(eps > 0.0)) throw PreconditionError("indicator gradient needs a positive smoothing width");
  auto pos = mesh.positions();
  std::vector<double> ds(inclusion.coeffs().size());
  for (std::size_t i = 0; i < pos.size(); ++i) {
    if (weight[i] == 0.0) continue;
    double sd = inclusion.signed_distance(pos[i]);
    double hp = smoothed_step_derivative(-sd, eps);
    if (hp == 0.0) continue;
    inclusion.signed_distance_gradient(pos[i], ds);
    for (std::size_t j = 0; j < ds.size(); ++j) grad[j] -= weight[i] * hp * ds[j];
  }
}

// --------------------------------------------------------------- SpeedField

double SpeedField::max_c() const {
  double m = 0.0;
  for (double v : c) m = std::max(m, v);
  return m;
}

SpeedField speed_from_indicator(Field indicator, double a) {
  if (!(a > 0.5 && a <= 1.0))
    throw PreconditionError("contrast a must lie in (1/2, 1], got " + std::to_string(a));
  SpeedField s;
  s.a = a;
  s.indicator = std::move(indicator);
  const std::size_t n = s.indicator.size();
  s.c.resize(n);
  s.c2.resize(n);
  s.c_inv2.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double chi = std::clamp(s.indicator[i], 0.0, 1.0);
    s.indicator[i] = chi;
    double c = chi == 1.0 ? a : 1.0 + (a - 1.0) * chi;
    s.c[i] = c;
    s.c2[i] = c * c;
    s.c_inv2[i] = 1.0 / (c * c);
  }
  return s;
}

SpeedField build_speed_field(const StarInclusion& inclusion, double a, const Domain& domain) {
  if (!(a > 0.5 && a <= 1.0))
    throw PreconditionError("contrast a must lie in (1/2, 1], got " + std::to_string(a));
  inclusion.validate(domain);
  SpeedField s = speed_from_indicator(rasterize_indicator(inclusion, domain.neumann()), a);
  s.inclusion = inclusion;
  return s;
}

SpeedField uniform_speed(const Domain& domain, double value) {
  SpeedField s;
  s.a = value;
  const std::size_t n = domain.neumann().size();
  s.indicator.assign(n, 0.0);
  s.c.assign(n, value);
  s.c2.assign(n, value * value);
  s.c_inv2.assign(n, 1.0 / (value * value));
  return s;
}

void require_certified_contrast(double a, bool allow_degenerate) {
  if (allow_degenerate && a == 1.0) return;
  if (!(a > 0.75 && a < 1.0))
    throw PreconditionError("contrast a must lie in (3/4, 1) for control/observability, got " +
                            std::to_string(a));
}

// ------------------------------------------------------------ shape checks

StarShapeResult star_shape_check(std::span<const Point> curve, const Point& x0) {
  const std::size_t n = curve.size();
  if (n < 3) throw GeometryError("curve needs at least three samples");
  StarShapeResult res;
  res.margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    Point t = sub(curve[(i + 1) % n], curve[(i + n - 1) % n]);
    double len = norm(t);
    if (len == 0.0) {
      res.valid = false;
      res.margin = -std::numeric_limits<double>::infinity();
      return res;
    }
    Point normal{t[1] / len, -t[0] / len, 0.0};
    res.margin = std::min(res.margin, dot(normal, sub(curve[i], x0)));
  }
  res.valid = res.margin >= -1e-10;
  return res;
}

StarShapeResult star_shape_check(const StarInclusion& inclusion, int samples) {
  samples = std::max(samples, 360);
  StarShapeResult res;
  if (inclusion.dim() == 2) {
    std::vector<Point> curve(samples);
    double rmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
      double th = 2.0 * kPi * i / samples;
      Point dir{std::cos(th), std::sin(th), 0.0};
      double r = inclusion.radius(dir);
      rmin = std::min(rmin, r);
      curve[i] = add(inclusion.x0(), scale(dir, r));
    }
    if (!(rmin > 0.0)) return {false, rmin};
    return star_shape_check(curve, inclusion.x0());
  }
  // 3-D: latitude/longitude sampling, normals from finite-difference tangents.
  const int nt = std::max(samples / 4, 90);
  const int np = 2 * nt;
  const double dth = kPi / nt, dph = 2.0 * kPi / np;
  auto point = [&](double th, double ph) {
    Point dir{std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
    return std::make_pair(add(inclusion.x0(), scale(dir, inclusion.radius(dir))), inclusion.radius(dir));
  };
  res.margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < nt; ++i) {
    double th = (i + 0.5) * dth;
    for (int j = 0; j < np; ++j) {
      double ph = j * dph;
      auto [x, r] = point(th, ph);
      if (!(r > 0.0)) return {false, r};
      Point tth = sub(point(th + 1e-4, ph).first, point(th - 1e-4, ph).first);
      Point tph = sub(point(th, ph + 1e-4).first, point(th, ph - 1e-4).first);
      Point nrm = cross(tth, tph);
      double len = norm(nrm);
      if (len == 0.0) return {false, -std::numeric_limits<double>::infinity()};
      res.margin = std::min(res.margin, dot(scale(nrm, 1.0 / len), sub(x, inclusion.x0())));
    }
  }
  res.valid = res.margin >= -1e-10;
  return res;
}

GeometryConstants geometry_constants(const Domain& domain, const Point& x0, double a) {
  if (!domain.contains(x0)) throw GeometryError("x0 lies outside the domain");
  if (!(a > 0.5 && a <= 1.0))
    throw PreconditionError("contrast a must lie in (1/2, 1], got " + std::to_string(a));
  GeometryConstants g;
  g.C_x0 = domain.sup_distance(x0);
  g.diam = domain.diameter();
  g.T = 4.0 * g.diam;
  g.T_min_obs = 2.0 * g.C_x0 / (a * a);
  if (a > 0.75 && !(g.T > g.T_min_obs))
    throw GeometryError("observation time does not exceed 2 C(x0) / a^2");
  return g;
}

double hausdorff_distance(const StarInclusion& a, const StarInclusion& b, int samples) {
  auto pa = boundary_samples(a, samples);
  auto pb = boundary_samples(b, samples);
  auto directed = [](const std::vector<Point>& from, const std::vector<Point>& to) {
    double worst = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) {
        Point d = sub(p, q);
        best = std::min(best, dot(d, d));
      }
      worst = std::max(worst, best);
    }
    return std::sqrt(worst);
  };
  return std::max(directed(pa, pb), directed(pb, pa));
}

double symmetric_difference(std::span<const double> ind1, std::span<const double> ind2,
                            const NeumannMesh& mesh) {
  auto m = mesh.mass();
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s += m[i] * std::abs(ind1[i] - ind2[i]);
  return s;
}

}  // namespace paikit
