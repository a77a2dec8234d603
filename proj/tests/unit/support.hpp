#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "paikit/geometry.hpp"
#include "paikit/grid.hpp"
#include "paikit/mesh.hpp"

namespace paikit::test {

inline constexpr double pi = std::numbers::pi;

inline Domain unit_disk(int resolution, int dim = 2) {
  return Domain::disk({0.5, 0.5, dim == 3 ? 0.5 : 0.0}, 0.5, dim, resolution);
}

inline Domain unit_square(int resolution) {
  return Domain::rectangle({0.0, 0.0, 0.0}, {1.0, 1.0, 0.0}, 2, resolution);
}

inline StarInclusion centred_disk(double r, double width = -1.0) {
  return StarInclusion(2, {0.5, 0.5, 0.0}, {r}, width);
}

inline double euclid(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

inline double euclid_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace paikit::test
