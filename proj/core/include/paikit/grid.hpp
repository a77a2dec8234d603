#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace paikit {

/// Points are always stored with three components; unused trailing
/// components are zero in 2-D.
using Point = std::array<double, 3>;

/// Nodal grid field. Indexing follows the mesh the field was built on.
using Field = std::vector<double>;

inline double dot(const Point& a, const Point& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline Point sub(const Point& a, const Point& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Point add(const Point& a, const Point& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Point scale(const Point& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
inline double norm(const Point& a) { return std::sqrt(dot(a, a)); }

/// Uniform node-centred Cartesian grid, spacing `h` along every axis.
struct Grid {
  int dim = 2;
  std::array<int, 3> cells{1, 1, 1};
  Point lo{0.0, 0.0, 0.0};
  double h = 1.0;

  std::array<int, 3> nodes() const {
    return {cells[0] + 1, dim > 1 ? cells[1] + 1 : 1, dim > 2 ? cells[2] + 1 : 1};
  }
  std::size_t node_count() const {
    auto n = nodes();
    return static_cast<std::size_t>(n[0]) * n[1] * n[2];
  }
  std::size_t index(const std::array<int, 3>& c) const {
    auto n = nodes();
    return (static_cast<std::size_t>(c[2]) * n[1] + c[1]) * n[0] + c[0];
  }
  std::array<int, 3> coords(std::size_t idx) const {
    auto n = nodes();
    std::array<int, 3> c{};
    c[0] = static_cast<int>(idx % n[0]);
    idx /= n[0];
    c[1] = static_cast<int>(idx % n[1]);
    c[2] = static_cast<int>(idx / n[1]);
    return c;
  }
  Point position(const std::array<int, 3>& c) const {
    Point p{};
    for (int k = 0; k < dim; ++k) p[k] = lo[k] + h * c[k];
    return p;
  }
  bool in_range(const std::array<int, 3>& c) const {
    auto n = nodes();
    for (int k = 0; k < 3; ++k)
      if (c[k] < 0 || c[k] >= n[k]) return false;
    return true;
  }
};

// Small dense-vector helpers used throughout the solvers.
double weighted_dot(std::span<const double> a, std::span<const double> b,
                    std::span<const double> w);
double max_abs(std::span<const double> a);
bool all_finite(std::span<const double> a);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

}  // namespace paikit
