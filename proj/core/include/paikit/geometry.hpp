#pragma once

#include <optional>
#include <span>
#include <vector>

#include "paikit/grid.hpp"
#include "paikit/mesh.hpp"

namespace paikit {

/// Star-shaped inclusion given as a radial graph about its centre x0.
///
/// 2-D coefficients are `[r0, a1, b1, ..., aK, bK]` with
/// r(theta) = r0 + sum_k a_k cos(k theta) + b_k sin(k theta).
/// 3-D coefficients multiply the real harmonics of degree <= 2, written as
/// polynomials of the unit direction n:
/// `[1, nx, ny, nz, nx ny, ny nz, nx nz, nx^2 - ny^2, 3 nz^2 - 1]` (any prefix).
class StarInclusion {
 public:
  static constexpr double kDefaultWidthCells = 1.5;

  /// `smoothing_width` < 0 selects the default 1.5 h at rasterization time;
  /// 0 selects the crisp (sub-cell area fraction) indicator.
  StarInclusion(int dim, const Point& x0, std::vector<double> coeffs,
                double smoothing_width = -1.0);

  int dim() const { return dim_; }
  const Point& x0() const { return x0_; }
  std::span<const double> coeffs() const { return coeffs_; }
  double smoothing_width() const { return width_; }
  /// Highest angular mode K in 2-D; harmonic degree in 3-D.
  int max_mode() const;

  StarInclusion with_coeffs(std::vector<double> coeffs) const;

  /// Radius along a unit direction.
  double radius(const Point& dir) const;
  /// d r / d coeff_j along a unit direction.
  void radius_gradient(const Point& dir, std::span<double> out) const;
  /// 2-D convenience: r(theta) and r'(theta).
  double radius_at(double theta) const;
  double radius_derivative_at(double theta) const;

  /// First-order signed distance to the boundary, negative inside.
  double signed_distance(const Point& x) const;
  /// Derivative of signed_distance(x) with respect to the coefficients.
  void signed_distance_gradient(const Point& x, std::span<double> out) const;

  bool contains(const Point& x) const { return signed_distance(x) < 0.0; }
  /// Sample radii on a direction set dense enough to resolve all modes.
  std::vector<Point> sample_directions() const;
  double min_radius() const;
  double max_radius() const;
  double area() const;

  /// Width actually used on a grid of spacing h.
  double effective_width(double h) const { return width_ < 0.0 ? kDefaultWidthCells * h : width_; }
  /// Default clearance between the inclusion and the outer boundary.
  double default_margin(double h) const;
  /// Throws GeometryError unless r > 0 everywhere and the inclusion keeps
  /// `margin` away from the outer boundary.
  void validate(const Domain& domain, double margin) const;
  void validate(const Domain& domain) const { validate(domain, default_margin(domain.h())); }

 private:
  void basis(const Point& dir, std::span<double> out) const;

  int dim_;
  Point x0_;
  std::vector<double> coeffs_;
  double width_;
};

/// Smoothed Heaviside of `z` with half-width eps (eps > 0).
double smoothed_step(double z, double eps);
double smoothed_step_derivative(double z, double eps);

/// Indicator of the inclusion sampled on the closed mesh.
Field rasterize_indicator(const StarInclusion& inclusion, const NeumannMesh& mesh);

/// Accumulate sum_i weight_i * d indicator_i / d coeffs into `grad`.
void indicator_gradient(const StarInclusion& inclusion, const NeumannMesh& mesh,
                        std::span<const double> weight, std::span<double> grad);

/// Grid sampling of c = 1 + (a - 1) * indicator on the closed mesh.
struct SpeedField {
  double a = 1.0;
  Field indicator;
  Field c;
  Field c2;
  Field c_inv2;
  std::optional<StarInclusion> inclusion;

  double max_c() const;
};

/// a must lie in (1/2, 1]; a == 1 is the degenerate constant-speed limit.
SpeedField build_speed_field(const StarInclusion& inclusion, double a, const Domain& domain);
/// Constant speed field c == value (no inclusion).
SpeedField uniform_speed(const Domain& domain, double value = 1.0);
/// Speed field from an arbitrary indicator (values clamped into [0, 1]).
SpeedField speed_from_indicator(Field indicator, double a);

/// Throws PreconditionError unless a lies in (3/4, 1); `allow_degenerate`
/// additionally admits a == 1.
void require_certified_contrast(double a, bool allow_degenerate = false);

struct StarShapeResult {
  bool valid = false;
  double margin = 0.0;  // min over samples of n . (x - x0)
};

/// Numerical star-shapedness test about the inclusion's own centre, with
/// normals from finite differences of the sampled boundary.
StarShapeResult star_shape_check(const StarInclusion& inclusion, int samples = 720);
/// Same test for an arbitrary closed counter-clockwise 2-D curve.
StarShapeResult star_shape_check(std::span<const Point> curve, const Point& x0);

struct GeometryConstants {
  double C_x0 = 0.0;
  double diam = 0.0;
  double T = 0.0;
  double T_min_obs = 0.0;
};

GeometryConstants geometry_constants(const Domain& domain, const Point& x0, double a);

/// Symmetric Hausdorff distance between two inclusion boundaries.
double hausdorff_distance(const StarInclusion& a, const StarInclusion& b, int samples = 720);
/// Symmetric-difference measure of two indicators on a mesh.
double symmetric_difference(std::span<const double> ind1, std::span<const double> ind2,
                            const NeumannMesh& mesh);

}  // namespace paikit
