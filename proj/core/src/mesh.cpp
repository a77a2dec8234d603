#include "paikit/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <utility>

#include "paikit/error.hpp"

namespace paikit {

namespace {

constexpr double kOnBoundaryTol = 1e-9;

Point axis_vector(int axis, int side) {
  Point e{};
  e[axis] = side;
  return e;
}

Point normalized(const Point& p) {
  double n = norm(p);
  return n > 0 ? scale(p, 1.0 / n) : Point{1.0, 0.0, 0.0};
}

// Second-order one-sided derivative along +axis from values at 0, h, 2h.
double one_sided(double u0, double u1, double u2, double h) {
  return (-3.0 * u0 + 4.0 * u1 - u2) / (2.0 * h);
}

}  // namespace

// ---------------------------------------------------------------- NeumannMesh

void NeumannMesh::apply_stiffness(std::span<const double> u, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& e : edges_) {
    double flux = e.weight * (u[e.a] - u[e.b]);
    out[e.a] += flux;
    out[e.b] -= flux;
  }
}

double NeumannMesh::stiffness_energy(std::span<const double> u) const {
  double s = 0.0;
  for (const auto& e : edges_) {
    double d = u[e.a] - u[e.b];
    s += e.weight * d * d;
  }
  return s;
}

double NeumannMesh::stiffness_energy(std::span<const double> u,
                                     std::span<const double> nodal_coeff) const {
  double s = 0.0;
  for (const auto& e : edges_) {
    double d = u[e.a] - u[e.b];
    s += 0.5 * (nodal_coeff[e.a] + nodal_coeff[e.b]) * e.weight * d * d;
  }
  return s;
}

Point NeumannMesh::gradient(std::span<const double> u, std::size_t node) const {
  Point g{};
  for (int k = 0; k < dim_; ++k) {
    std::int32_t p = neighbor(node, k, +1);
    std::int32_t m = neighbor(node, k, -1);
    if (p >= 0 && m >= 0) {
      g[k] = (u[p] - u[m]) / (2.0 * h_);
    } else if (p >= 0) {
      std::int32_t pp = neighbor(p, k, +1);
      g[k] = pp >= 0 ? one_sided(u[node], u[p], u[pp], h_) : (u[p] - u[node]) / h_;
    } else if (m >= 0) {
      std::int32_t mm = neighbor(m, k, -1);
      g[k] = mm >= 0 ? -one_sided(u[node], u[m], u[mm], h_) : (u[node] - u[m]) / h_;
    }
  }
  return g;
}

double NeumannMesh::boundary_measure() const {
  double s = 0.0;
  for (const auto& b : boundary_) s += b.weight;
  return s;
}

// -------------------------------------------------------------- DirichletMesh

void DirichletMesh::apply_stiffness(std::span<const double> u, std::span<double> out) const {
  for (std::size_t i = 0; i < size(); ++i) out[i] = diag_[i] * u[i];
  for (const auto& e : edges_) {
    double flux = e.weight * (u[e.a] - u[e.b]);
    out[e.a] += flux;
    out[e.b] -= flux;
  }
}

double DirichletMesh::stiffness_energy(std::span<const double> u) const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += diag_[i] * u[i] * u[i];
  for (const auto& e : edges_) {
    double d = u[e.a] - u[e.b];
    s += e.weight * d * d;
  }
  return s;
}

double DirichletMesh::stiffness_energy(std::span<const double> u,
                                       std::span<const double> nodal_coeff) const {
  double s = 0.0;
  for (const auto& f : faces_) s += nodal_coeff[f.unknown] * f.coupling * u[f.unknown] * u[f.unknown];
  for (const auto& e : edges_) {
    double d = u[e.a] - u[e.b];
    s += 0.5 * (nodal_coeff[e.a] + nodal_coeff[e.b]) * e.weight * d * d;
  }
  return s;
}

void DirichletMesh::add_boundary_coupling(std::span<const double> g, double alpha,
                                          std::span<double> out) const {
  for (std::size_t f = 0; f < faces_.size(); ++f)
    out[faces_[f].unknown] += alpha * faces_[f].coupling * g[f];
}

Field DirichletMesh::restrict(std::span<const double> closed_field) const {
  Field u(size());
  for (std::size_t i = 0; i < size(); ++i) u[i] = closed_field[closed_of_[i]];
  return u;
}

Field DirichletMesh::extend(std::span<const double> u, std::size_t closed_size,
                            std::span<const double> face_values) const {
  Field out(closed_size, 0.0);
  for (std::size_t i = 0; i < size(); ++i) out[closed_of_[i]] = u[i];
  if (!face_values.empty()) {
    for (std::size_t f = 0; f < faces_.size(); ++f)
      if (faces_[f].closed_node >= 0) out[faces_[f].closed_node] = face_values[f];
  }
  return out;
}

// --------------------------------------------------------------------- Domain

Domain Domain::disk(const Point& center, double radius, int dim, int resolution) {
  if (dim != 2 && dim != 3) throw GeometryError("dimension must be 2 or 3");
  if (!(radius > 0.0)) throw GeometryError("disk radius must be positive");
  if (resolution < 4) throw GeometryError("resolution must be at least 4 cells");
  Domain d;
  d.shape_ = ShapeKind::disk;
  d.center_ = center;
  for (int k = dim; k < 3; ++k) d.center_[k] = 0.0;
  d.radius_ = radius;
  d.grid_.dim = dim;
  d.grid_.h = 2.0 * radius / resolution;
  for (int k = 0; k < 3; ++k) {
    d.grid_.cells[k] = k < dim ? resolution : 0;
    d.grid_.lo[k] = k < dim ? d.center_[k] - radius : 0.0;
  }
  for (int k = 0; k < 3; ++k) {
    d.lo_[k] = k < dim ? d.center_[k] - radius : 0.0;
    d.hi_[k] = k < dim ? d.center_[k] + radius : 0.0;
  }
  d.build();
  return d;
}

Domain Domain::rectangle(const Point& lo, const Point& hi, int dim, int resolution) {
  if (dim != 2 && dim != 3) throw GeometryError("dimension must be 2 or 3");
  if (resolution < 4) throw GeometryError("resolution must be at least 4 cells");
  Domain d;
  d.shape_ = ShapeKind::rectangle;
  d.grid_.dim = dim;
  for (int k = 0; k < dim; ++k)
    if (!(hi[k] > lo[k])) throw GeometryError("rectangle must have hi > lo on every axis");
  double h = (hi[0] - lo[0]) / resolution;
  d.grid_.h = h;
  for (int k = 0; k < 3; ++k) {
    d.lo_[k] = k < dim ? lo[k] : 0.0;
    d.hi_[k] = k < dim ? hi[k] : 0.0;
    d.grid_.lo[k] = d.lo_[k];
    if (k >= dim) {
      d.grid_.cells[k] = 0;
      continue;
    }
    double n = (hi[k] - lo[k]) / h;
    long rounded = std::lround(n);
    if (std::abs(n - rounded) > 1e-9 * std::max(1.0, n) || rounded < 2)
      throw GeometryError("rectangle extents must be integer multiples of the grid spacing");
    d.grid_.cells[k] = static_cast<int>(rounded);
  }
  d.build();
  return d;
}

double Domain::diameter() const {
  if (shape_ == ShapeKind::disk) return 2.0 * radius_;
  return norm(sub(hi_, lo_));
}

double Domain::sup_distance(const Point& x0) const {
  if (shape_ == ShapeKind::disk) return norm(sub(x0, center_)) + radius_;
  double s = 0.0;
  for (int k = 0; k < dim(); ++k) {
    double m = std::max(std::abs(x0[k] - lo_[k]), std::abs(hi_[k] - x0[k]));
    s += m * m;
  }
  return std::sqrt(s);
}

bool Domain::contains(const Point& x, double tol) const {
  if (shape_ == ShapeKind::disk) return norm(sub(x, center_)) <= radius_ + tol;
  for (int k = 0; k < dim(); ++k)
    if (x[k] < lo_[k] - tol || x[k] > hi_[k] + tol) return false;
  return true;
}

double Domain::distance_to_boundary(const Point& x) const {
  if (shape_ == ShapeKind::disk) return radius_ - norm(sub(x, center_));
  double d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < dim(); ++k) d = std::min({d, x[k] - lo_[k], hi_[k] - x[k]});
  return d;
}

Point Domain::outward_normal(const Point& x) const {
  if (shape_ == ShapeKind::disk) return normalized(sub(x, center_));
  Point n{};
  double tol = kOnBoundaryTol * grid_.h;
  bool any = false;
  for (int k = 0; k < dim(); ++k) {
    if (std::abs(x[k] - lo_[k]) <= tol) n[k] -= 1.0, any = true;
    if (std::abs(x[k] - hi_[k]) <= tol) n[k] += 1.0, any = true;
  }
  if (any) return normalized(n);
  int best_axis = 0;
  int best_side = 1;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < dim(); ++k) {
    if (x[k] - lo_[k] < best) best = x[k] - lo_[k], best_axis = k, best_side = -1;
    if (hi_[k] - x[k] < best) best = hi_[k] - x[k], best_axis = k, best_side = 1;
  }
  return axis_vector(best_axis, best_side);
}

double Domain::measure() const {
  if (shape_ == ShapeKind::disk)
    return dim() == 2 ? std::numbers::pi * radius_ * radius_
                      : 4.0 / 3.0 * std::numbers::pi * radius_ * radius_ * radius_;
  double v = 1.0;
  for (int k = 0; k < dim(); ++k) v *= hi_[k] - lo_[k];
  return v;
}

double Domain::boundary_measure() const {
  if (shape_ == ShapeKind::disk)
    return dim() == 2 ? 2.0 * std::numbers::pi * radius_
                      : 4.0 * std::numbers::pi * radius_ * radius_;
  if (dim() == 2) return 2.0 * ((hi_[0] - lo_[0]) + (hi_[1] - lo_[1]));
  double a = hi_[0] - lo_[0], b = hi_[1] - lo_[1], c = hi_[2] - lo_[2];
  return 2.0 * (a * b + b * c + a * c);
}

double Domain::exit_fraction(const Point& a, const Point& b) const {
  if (shape_ == ShapeKind::rectangle) {
    double t = 1.0;
    for (int k = 0; k < dim(); ++k) {
      double dk = b[k] - a[k];
      if (dk > 0 && b[k] > hi_[k]) t = std::min(t, (hi_[k] - a[k]) / dk);
      if (dk < 0 && b[k] < lo_[k]) t = std::min(t, (lo_[k] - a[k]) / dk);
    }
    return std::clamp(t, 0.0, 1.0);
  }
  Point d = sub(b, a);
  Point m = sub(a, center_);
  double A = dot(d, d);
  double B = dot(m, d);
  double C = dot(m, m) - radius_ * radius_;
  double disc = std::max(B * B - A * C, 0.0);
  double t = (-B + std::sqrt(disc)) / A;
  return std::clamp(t, 0.0, 1.0);
}

void Domain::build() {
  const int d = grid_.dim;
  const double h = grid_.h;
  const double hd1 = std::pow(h, d - 1);
  const double hd2 = std::pow(h, d - 2);
  auto nn = grid_.nodes();
  const std::size_t total = grid_.node_count();

  auto nm = std::make_shared<NeumannMesh>();
  nm->dim_ = d;
  nm->h_ = h;
  nm->node_of_grid_.assign(total, -1);

  auto on_lo = [&](const std::array<int, 3>& c, int k) { return c[k] == 0; };
  auto on_hi = [&](const std::array<int, 3>& c, int k) { return c[k] == nn[k] - 1; };

  const double r_tol = radius_ * (1.0 + 1e-12);
  for (std::size_t g = 0; g < total; ++g) {
    auto c = grid_.coords(g);
    Point x = grid_.position(c);
    if (shape_ == ShapeKind::disk && norm(sub(x, center_)) > r_tol) continue;
    nm->node_of_grid_[g] = static_cast<std::int32_t>(nm->positions_.size());
    nm->positions_.push_back(x);
    nm->grid_index_.push_back(g);
  }
  const std::size_t n = nm->positions_.size();
  nm->neighbors_.assign(n * 6, -1);
  for (std::size_t i = 0; i < n; ++i) {
    auto c = grid_.coords(nm->grid_index_[i]);
    for (int k = 0; k < d; ++k) {
      for (int s : {-1, 1}) {
        auto cn = c;
        cn[k] += s;
        if (!grid_.in_range(cn)) continue;
        nm->neighbors_[i * 6 + k * 2 + (s > 0 ? 1 : 0)] = nm->node_of_grid_[grid_.index(cn)];
      }
    }
  }

  nm->mass_.assign(n, 0.0);
  nm->slot_.assign(n, -1);
  std::vector<BoundaryNode> boundary;
  for (std::size_t i = 0; i < n; ++i) {
    auto c = grid_.coords(nm->grid_index_[i]);
    if (shape_ == ShapeKind::rectangle) {
      double m = std::pow(h, d);
      Point normal{};
      double w = 0.0;
      for (int k = 0; k < d; ++k) {
        bool lo = on_lo(c, k), hi = on_hi(c, k);
        if (lo || hi) m *= 0.5;
        if (!lo && !hi) continue;
        double face = hd1;
        for (int j = 0; j < d; ++j)
          if (j != k && (on_lo(c, j) || on_hi(c, j))) face *= 0.5;
        if (lo) normal[k] -= 1.0, w += face;
        if (hi) normal[k] += 1.0, w += face;
      }
      nm->mass_[i] = m;
      if (w > 0.0) boundary.push_back({static_cast<std::uint32_t>(i), normalized(normal), w});
      for (int k = 0; k < d; ++k) {
        std::int32_t j = nm->neighbor(i, k, +1);
        if (j < 0) continue;
        double weight = hd2;
        for (int l = 0; l < d; ++l)
          if (l != k && (on_lo(c, l) || on_hi(c, l))) weight *= 0.5;
        nm->edges_.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), weight});
      }
    } else {
      nm->mass_[i] = std::pow(h, d);
      Point normal = normalized(sub(nm->positions_[i], center_));
      double w = 0.0;
      for (int k = 0; k < d; ++k)
        for (int s : {-1, 1})
          if (nm->neighbor(i, k, s) < 0) w += hd1 * std::abs(normal[k]);
      bool missing = false;
      for (int k = 0; k < d; ++k)
        for (int s : {-1, 1})
          if (nm->neighbor(i, k, s) < 0) missing = true;
      if (missing) {
        // A node missing only neighbours orthogonal to its normal still
        // lies on the discrete boundary; give it a small positive weight.
        w = std::max(w, DirichletMesh::kMinCos * hd1);
        boundary.push_back({static_cast<std::uint32_t>(i), normal, w});
      }
      for (int k = 0; k < d; ++k) {
        std::int32_t j = nm->neighbor(i, k, +1);
        if (j >= 0)
          nm->edges_.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), hd2});
      }
    }
  }

  if (d == 2) {
    Point mid = shape_ == ShapeKind::disk ? center_ : scale(add(lo_, hi_), 0.5);
    auto key = [&](const BoundaryNode& b) {
      Point r = sub(nm->positions_[b.node], mid);
      return std::make_pair(std::atan2(r[1], r[0]), norm(r));
    };
    std::sort(boundary.begin(), boundary.end(),
              [&](const BoundaryNode& x, const BoundaryNode& y) { return key(x) < key(y); });
  }
  nm->boundary_ = std::move(boundary);
  for (std::size_t s = 0; s < nm->boundary_.size(); ++s) nm->slot_[nm->boundary_[s].node] = static_cast<int>(s);

  const std::size_t nb = nm->boundary_.size();
  if (d == 2) {
    for (std::size_t s = 0; s < nb; ++s) {
      std::size_t t = (s + 1) % nb;
      double len = norm(sub(nm->positions_[nm->boundary_[s].node], nm->positions_[nm->boundary_[t].node]));
      nm->boundary_edges_.push_back({static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(t), len});
    }
  } else {
    for (std::size_t s = 0; s < nb; ++s) {
      std::uint32_t i = nm->boundary_[s].node;
      for (int k = 0; k < d; ++k) {
        std::int32_t j = nm->neighbor(i, k, +1);
        if (j >= 0 && nm->slot_[j] >= 0)
          nm->boundary_edges_.push_back(
              {static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(nm->slot_[j]), h});
      }
    }
  }

  // Dirichlet unknowns: nodes strictly inside the domain.
  auto dm = std::make_shared<DirichletMesh>();
  dm->dim_ = d;
  dm->h_ = h;
  dm->cell_volume_ = std::pow(h, d);
  dm->unknown_of_.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    bool interior;
    if (shape_ == ShapeKind::disk) {
      interior = norm(sub(nm->positions_[i], center_)) < radius_ * (1.0 - kOnBoundaryTol);
    } else {
      interior = nm->slot_[i] < 0;
    }
    if (!interior) continue;
    dm->unknown_of_[i] = static_cast<std::int32_t>(dm->closed_of_.size());
    dm->closed_of_.push_back(static_cast<std::uint32_t>(i));
  }
  const std::size_t nu = dm->closed_of_.size();
  if (nu == 0) throw GeometryError("grid too coarse: no interior nodes");
  dm->mass_.assign(nu, dm->cell_volume_);
  dm->diag_.assign(nu, 0.0);

  for (std::size_t u = 0; u < nu; ++u) {
    std::uint32_t i = dm->closed_of_[u];
    const Point& xi = nm->positions_[i];
    auto c = grid_.coords(nm->grid_index_[i]);
    for (int k = 0; k < d; ++k) {
      for (int s : {-1, 1}) {
        auto cn = c;
        cn[k] += s;
        std::int32_t j = grid_.in_range(cn) ? nm->node_of_grid_[grid_.index(cn)] : -1;
        std::int32_t uj = j >= 0 ? dm->unknown_of_[j] : -1;
        if (uj >= 0) {
          if (s > 0) dm->edges_.push_back({static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(uj), hd2});
          continue;
        }
        DirichletFace f{};
        f.unknown = static_cast<std::uint32_t>(u);
        f.axis = k;
        f.side = s;
        Point xn = add(xi, scale(axis_vector(k, s), h));
        double tg = exit_fraction(xi, xn);
        if (j >= 0 && tg > 1.0 - kOnBoundaryTol) tg = 1.0;
        f.theta_geom = std::max(tg, 1e-12);
        f.theta = std::max(f.theta_geom, DirichletMesh::kMinTheta);
        f.coupling = hd2 / f.theta;
        f.position = add(xi, scale(axis_vector(k, s), f.theta_geom * h));
        if (shape_ == ShapeKind::rectangle) {
          f.normal = axis_vector(k, s);
        } else {
          f.normal = normalized(sub(f.position, center_));
        }
        f.cos_normal = std::max(f.normal[k] * s, DirichletMesh::kMinCos);
        f.weight = hd1 * f.cos_normal;
        auto ci = c;
        ci[k] -= s;
        std::int32_t jin = grid_.in_range(ci) ? nm->node_of_grid_[grid_.index(ci)] : -1;
        f.inner = jin >= 0 ? dm->unknown_of_[jin] : -1;
        f.closed_node = (j >= 0 && f.theta_geom == 1.0) ? j : -1;
        dm->diag_[u] += f.coupling;
        dm->faces_.push_back(f);
      }
    }
  }

  neumann_ = std::move(nm);
  dirichlet_ = std::move(dm);
}

}  // namespace paikit
