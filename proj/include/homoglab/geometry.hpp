#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "homoglab/errors.hpp"

namespace homoglab {

inline constexpr int kMaxDim = 3;
using MultiIndex = std::array<int, kMaxDim>;
using Point = std::array<double, kMaxDim>;

enum class Region : std::uint8_t { matrix = 0, inclusion = 1 };

/// The unit cell Y = [0,1)^d with a single inclusion ω.
///
/// The main constructor takes an axis-aligned box whose closure lies strictly
/// inside Y; structured grids can then resolve ∂ω exactly. A general ω can be
/// given as an indicator function, in which case grids tag cells by sampling
/// the indicator at barycenters and θ is estimated by midpoint sampling.
class PeriodicGeometry {
 public:
  using Indicator = std::function<bool(std::span<const double>)>;

  static PeriodicGeometry box(std::vector<double> lower, std::vector<double> upper);
  /// Square/cube of the given side centred in Y.
  static PeriodicGeometry centered_box(int dim, double side);
  static PeriodicGeometry from_indicator(int dim, Indicator inside, int samples_per_axis = 512);

  int dim() const { return dim_; }
  double theta() const { return theta_; }
  bool is_box() const { return !indicator_; }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }

  /// Membership of y ∈ Y in the open inclusion.
  bool contains(std::span<const double> y) const;

 private:
  PeriodicGeometry() = default;

  int dim_ = 0;
  double theta_ = 0.0;
  std::vector<double> lower_;
  std::vector<double> upper_;
  Indicator indicator_;
};

/// Raised when a grid resolution does not put every inclusion face on a
/// grid line.
class IncompatibleResolution : public ValidationError {
 public:
  IncompatibleResolution(int requested, int suggested);
  int requested() const { return requested_; }
  int suggested() const { return suggested_; }

 private:
  int requested_;
  int suggested_;
};

/// Whether every box bound times `resolution` is an integer.
bool resolution_compatible(const PeriodicGeometry& geom, int resolution);

/// Smallest resolution for which resolution_compatible holds. Box geometry only.
int smallest_compatible_resolution(const PeriodicGeometry& geom);

/// ε-lattice bookkeeping for Ω = (0,1)^d and ε = 1/n.
struct EpsilonLattice {
  int dim = 0;
  int n = 0;
  double epsilon = 0.0;
  /// Cells ε(k+Y) whose closure lies in the closed unit cube.
  std::vector<MultiIndex> inner_cells;
  /// Cells ε(k+Y) whose closure meets the open unit cube.
  std::vector<MultiIndex> covering_cells;

  std::size_t cell_count() const { return covering_cells.size(); }
  /// Row-major (axis 0 fastest) linear index of a lattice cell in [0,n)^d.
  std::size_t linear_index(const MultiIndex& k) const;
};

EpsilonLattice make_epsilon_lattice(int dim, int n);

enum class BoundaryCondition { dirichlet, periodic };

/// Uniform tensor-product grid on [0,1]^d.
///
/// Dirichlet grids carry (res+1) nodes per axis including the boundary;
/// periodic grids carry res nodes per axis with node res identified with 0.
/// Cells and nodes are numbered with axis 0 fastest.
class StructuredGrid {
 public:
  StructuredGrid(int dim, std::vector<int> resolution, BoundaryCondition bc);

  int dim() const { return dim_; }
  BoundaryCondition boundary() const { return bc_; }
  bool periodic() const { return bc_ == BoundaryCondition::periodic; }
  int resolution(int axis) const { return resolution_[static_cast<std::size_t>(axis)]; }
  double spacing(int axis) const { return 1.0 / resolution(axis); }
  double cell_volume() const;

  std::size_t num_cells() const { return num_cells_; }
  std::size_t num_nodes() const { return num_nodes_; }
  int nodes_per_axis(int axis) const;
  int nodes_per_cell() const { return 1 << dim_; }

  MultiIndex cell_multi_index(std::size_t cell) const;
  std::size_t cell_index(const MultiIndex& idx) const;
  MultiIndex node_multi_index(std::size_t node) const;
  /// Periodic grids wrap indices; Dirichlet grids require them in range.
  std::size_t node_index(MultiIndex idx) const;

  /// Node ids of a cell; local node j has offset bit k of j along axis k.
  std::array<std::size_t, 1 << kMaxDim> cell_nodes(std::size_t cell) const;

  Point node_coordinates(std::size_t node) const;
  Point cell_barycenter(std::size_t cell) const;
  bool is_boundary_node(std::size_t node) const;

  bool tagged() const { return !tags_.empty(); }
  Region tag(std::size_t cell) const { return tags_[cell]; }
  const std::vector<Region>& tags() const { return tags_; }
  void set_tags(std::vector<Region> tags);
  double region_volume(Region r) const;

  // Two-scale structure of ε-domain grids (resolution = n·M on every axis).
  bool has_lattice() const { return lattice_n_ > 0; }
  int lattice_n() const { return lattice_n_; }
  int subcells() const { return subcells_; }
  void set_lattice(int n, int subcells);
  /// Lattice cell containing a fine cell, linear index in [0,n)^d.
  std::size_t epsilon_cell_of(std::size_t cell) const;
  /// Index of a fine cell inside its ε-cell, each entry in [0,M).
  MultiIndex local_cell(std::size_t cell) const;
  /// y = {x/ε} at the barycenter of a fine cell.
  Point local_barycenter(std::size_t cell) const;

 private:
  int dim_;
  std::vector<int> resolution_;
  BoundaryCondition bc_;
  std::size_t num_cells_ = 1;
  std::size_t num_nodes_ = 1;
  std::vector<Region> tags_;
  int lattice_n_ = 0;
  int subcells_ = 0;
};

/// Periodic grid on Y with exact inclusion tags.
StructuredGrid build_unit_cell_grid(const PeriodicGeometry& geom, int resolution);

struct EpsilonDomain {
  EpsilonLattice lattice;
  StructuredGrid grid;
};

/// Dirichlet grid on the unit square at resolution n·M whose inclusion tags
/// are exactly the union of ε(k+ω) over the lattice.
EpsilonDomain build_epsilon_domain(const PeriodicGeometry& geom, int n, int subcells);

}  // namespace homoglab
