#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "paikit/grid.hpp"

namespace paikit {

enum class ShapeKind { disk, rectangle };

struct MeshEdge {
  std::uint32_t a;
  std::uint32_t b;
  double weight;  // dual-face measure divided by h
};

struct BoundaryNode {
  std::uint32_t node;
  Point normal;   // outward unit normal
  double weight;  // surface quadrature weight
};

struct BoundaryEdge {
  std::uint32_t a;  // boundary slots
  std::uint32_t b;
  double length;
};

/// Closed node set of the domain: natural (Neumann/Robin) boundary handling.
///
/// On rectangles the masses and edge weights are the trapezoidal ones, which
/// makes `K` identical to the five-point Laplacian with mirrored ghost values.
/// On disks the boundary is staircased: every node inside the closed disk is
/// active and boundary weights are distributed so that they sum to the
/// perimeter.
class NeumannMesh {
 public:
  std::size_t size() const { return positions_.size(); }
  int dim() const { return dim_; }
  double h() const { return h_; }

  std::span<const Point> positions() const { return positions_; }
  std::span<const double> mass() const { return mass_; }
  std::span<const MeshEdge> edges() const { return edges_; }
  std::span<const BoundaryNode> boundary() const { return boundary_; }
  std::span<const BoundaryEdge> boundary_edges() const { return boundary_edges_; }

  /// Position of `node` in boundary(), or -1 for interior nodes.
  int boundary_slot(std::size_t node) const { return slot_[node]; }
  std::size_t grid_index(std::size_t node) const { return grid_index_[node]; }
  std::int32_t node_at(std::size_t grid_index) const { return node_of_grid_[grid_index]; }
  /// Neighbour along `axis` on `side` (+1/-1), or -1.
  std::int32_t neighbor(std::size_t node, int axis, int side) const {
    return neighbors_[node * 6 + axis * 2 + (side > 0 ? 1 : 0)];
  }

  /// out = K u  (K is the symmetric positive semidefinite stiffness matrix).
  void apply_stiffness(std::span<const double> u, std::span<double> out) const;
  /// u^T K u
  double stiffness_energy(std::span<const double> u) const;
  /// sum over edges of coeff_e * w_e (u_a - u_b)^2 with coeff_e the mean of
  /// the nodal coefficient at both ends.
  double stiffness_energy(std::span<const double> u, std::span<const double> nodal_coeff) const;

  /// One-sided/central gradient estimate at a node (second order where the
  /// stencil allows it).
  Point gradient(std::span<const double> u, std::size_t node) const;

  double boundary_measure() const;

 private:
  friend class Domain;
  int dim_ = 2;
  double h_ = 1.0;
  std::vector<Point> positions_;
  std::vector<double> mass_;
  std::vector<MeshEdge> edges_;
  std::vector<BoundaryNode> boundary_;
  std::vector<BoundaryEdge> boundary_edges_;
  std::vector<int> slot_;
  std::vector<std::size_t> grid_index_;
  std::vector<std::int32_t> node_of_grid_;
  std::vector<std::int32_t> neighbors_;
};

/// Boundary crossing of a grid edge leaving the set of Dirichlet unknowns.
struct DirichletFace {
  std::uint32_t unknown;  // adjacent interior unknown
  int axis;
  int side;               // outward axis direction is side * e_axis
  double theta;           // stencil fraction, clamped below at kMinTheta
  double theta_geom;      // exact fraction of h to the boundary point
  double coupling;        // h^{d-2} / theta
  double cos_normal;      // nu . (side e_axis), floored at kMinCos
  double weight;          // surface quadrature weight h^{d-1} cos_normal
  Point position;
  Point normal;
  std::int32_t inner;        // next unknown inward along the axis, or -1
  std::int32_t closed_node;  // NeumannMesh node located at the face point, or -1
};

/// Interior unknowns plus boundary faces: symmetric embedded-boundary
/// Dirichlet discretization (diagonal coupling h^{d-2}/theta per cut edge).
/// On rectangles every face sits on a boundary node and theta == 1, which
/// recovers the standard five-point Dirichlet Laplacian.
class DirichletMesh {
 public:
  static constexpr double kMinTheta = 0.75;
  static constexpr double kMinCos = 0.05;

  std::size_t size() const { return closed_of_.size(); }
  int dim() const { return dim_; }
  double h() const { return h_; }
  double cell_volume() const { return cell_volume_; }

  std::span<const DirichletFace> faces() const { return faces_; }
  std::span<const MeshEdge> edges() const { return edges_; }
  std::span<const double> mass() const { return mass_; }
  std::uint32_t closed_node(std::size_t unknown) const { return closed_of_[unknown]; }
  std::int32_t unknown_of(std::size_t closed_node) const { return unknown_of_[closed_node]; }

  /// out = K_D u
  void apply_stiffness(std::span<const double> u, std::span<double> out) const;
  double stiffness_energy(std::span<const double> u) const;
  /// Stiffness energy with nodal coefficient averaged onto edges/faces.
  double stiffness_energy(std::span<const double> u, std::span<const double> nodal_coeff) const;
  /// out[unknown(f)] += alpha * coupling_f * g[f]
  void add_boundary_coupling(std::span<const double> g, double alpha, std::span<double> out) const;

  /// Restrict a NeumannMesh field to the unknowns.
  Field restrict(std::span<const double> closed_field) const;
  /// Scatter unknowns (and optional face values) back to a NeumannMesh field.
  Field extend(std::span<const double> u, std::size_t closed_size,
               std::span<const double> face_values = {}) const;

 private:
  friend class Domain;
  int dim_ = 2;
  double h_ = 1.0;
  double cell_volume_ = 1.0;
  std::vector<std::uint32_t> closed_of_;
  std::vector<std::int32_t> unknown_of_;
  std::vector<double> mass_;
  std::vector<double> diag_;
  std::vector<MeshEdge> edges_;
  std::vector<DirichletFace> faces_;
};

/// Outer domain Omega with its uniform grid and both discretizations.
/// Immutable and cheap to copy; the meshes are shared.
class Domain {
 public:
  /// Disk (2-D) or ball (3-D). `resolution` is the number of cells across
  /// the diameter.
  static Domain disk(const Point& center, double radius, int dim, int resolution);
  /// Axis-aligned box. `resolution` is the number of cells along x; other
  /// extents must be integer multiples of the resulting spacing.
  static Domain rectangle(const Point& lo, const Point& hi, int dim, int resolution);

  ShapeKind shape() const { return shape_; }
  int dim() const { return grid_.dim; }
  int resolution() const { return grid_.cells[0]; }
  double h() const { return grid_.h; }
  const Grid& grid() const { return grid_; }
  const Point& center() const { return center_; }
  double radius() const { return radius_; }
  const Point& lo() const { return lo_; }
  const Point& hi() const { return hi_; }

  double diameter() const;
  /// sup over Omega of |x - x0|.
  double sup_distance(const Point& x0) const;
  bool contains(const Point& x, double tol = 0.0) const;
  /// Distance from an interior point to the boundary (negative outside).
  double distance_to_boundary(const Point& x) const;
  /// Outward normal at the boundary point closest to x.
  Point outward_normal(const Point& x) const;
  double measure() const;
  double boundary_measure() const;

  const NeumannMesh& neumann() const { return *neumann_; }
  const DirichletMesh& dirichlet() const { return *dirichlet_; }

 private:
  Domain() = default;
  void build();
  double exit_fraction(const Point& a, const Point& b) const;

  ShapeKind shape_ = ShapeKind::rectangle;
  Grid grid_;
  Point center_{};
  double radius_ = 0.0;
  Point lo_{};
  Point hi_{};
  std::shared_ptr<const NeumannMesh> neumann_;
  std::shared_ptr<const DirichletMesh> dirichlet_;
};

}  // namespace paikit
