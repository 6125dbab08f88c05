#include "homoglab/geometry.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>

namespace homoglab {
namespace {

constexpr double kAlignTol = 1e-9;

bool near_integer(double v) { return std::abs(v - std::round(v)) <= kAlignTol * std::max(1.0, std::abs(v)); }

int denominator_of(double b) {
  for (int q = 1; q <= 1'000'000; ++q) {
    if (near_integer(b * q)) return q;
  }
  throw ValidationError("inclusion bound " + std::to_string(b) +
                        " is not a rational number with denominator <= 1e6");
}

void check_dim(int dim) {
  if (dim < 1 || dim > kMaxDim) throw ValidationError("dimension must be 1, 2 or 3");
}

}  // namespace

PeriodicGeometry PeriodicGeometry::box(std::vector<double> lower, std::vector<double> upper) {
  if (lower.size() != upper.size()) throw ValidationError("inclusion bounds have different lengths");
  check_dim(static_cast<int>(lower.size()));
  PeriodicGeometry g;
  g.dim_ = static_cast<int>(lower.size());
  g.theta_ = 1.0;
  for (std::size_t k = 0; k < lower.size(); ++k) {
    if (!(lower[k] > 0.0 && upper[k] < 1.0 && lower[k] < upper[k])) {
      std::ostringstream msg;
      msg << "inclusion (" << lower[k] << ", " << upper[k] << ") on axis " << k
          << " must satisfy 0 < lower < upper < 1 (closure strictly inside Y)";
      throw ValidationError(msg.str());
    }
    g.theta_ *= upper[k] - lower[k];
  }
  g.lower_ = std::move(lower);
  g.upper_ = std::move(upper);
  return g;
}

PeriodicGeometry PeriodicGeometry::centered_box(int dim, double side) {
  check_dim(dim);
  const double lo = 0.5 - 0.5 * side;
  return box(std::vector<double>(static_cast<std::size_t>(dim), lo),
             std::vector<double>(static_cast<std::size_t>(dim), 1.0 - lo));
}

PeriodicGeometry PeriodicGeometry::from_indicator(int dim, Indicator inside, int samples_per_axis) {
  check_dim(dim);
  if (!inside) throw ValidationError("empty inclusion indicator");
  if (samples_per_axis < 1) throw ValidationError("samples_per_axis must be positive");
  PeriodicGeometry g;
  g.dim_ = dim;
  g.indicator_ = std::move(inside);
  std::size_t total = 1;
  for (int k = 0; k < dim; ++k) total *= static_cast<std::size_t>(samples_per_axis);
  std::size_t hits = 0;
  std::vector<double> y(static_cast<std::size_t>(dim));
  for (std::size_t s = 0; s < total; ++s) {
    std::size_t rest = s;
    for (int k = 0; k < dim; ++k) {
      y[static_cast<std::size_t>(k)] = (static_cast<double>(rest % samples_per_axis) + 0.5) / samples_per_axis;
      rest /= static_cast<std::size_t>(samples_per_axis);
    }
    if (g.indicator_(y)) ++hits;
  }
  g.theta_ = static_cast<double>(hits) / static_cast<double>(total);
  if (!(g.theta_ > 0.0 && g.theta_ < 1.0)) throw ValidationError("inclusion volume fraction must lie in (0,1)");
  return g;
}

bool PeriodicGeometry::contains(std::span<const double> y) const {
  if (indicator_) return indicator_(y);
  for (int k = 0; k < dim_; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    if (!(y[ku] > lower_[ku] && y[ku] < upper_[ku])) return false;
  }
  return true;
}

IncompatibleResolution::IncompatibleResolution(int requested, int suggested)
    : ValidationError("resolution " + std::to_string(requested) +
                      " does not align grid lines with the inclusion faces; smallest compatible resolution is " +
                      std::to_string(suggested)),
      requested_(requested),
      suggested_(suggested) {}

bool resolution_compatible(const PeriodicGeometry& geom, int resolution) {
  if (resolution < 1) return false;
  if (!geom.is_box()) return true;
  for (int k = 0; k < geom.dim(); ++k) {
    const auto ku = static_cast<std::size_t>(k);
    if (!near_integer(geom.lower()[ku] * resolution) || !near_integer(geom.upper()[ku] * resolution)) return false;
  }
  return true;
}

int smallest_compatible_resolution(const PeriodicGeometry& geom) {
  if (!geom.is_box()) return 1;
  long long l = 1;
  for (int k = 0; k < geom.dim(); ++k) {
    const auto ku = static_cast<std::size_t>(k);
    l = std::lcm(l, static_cast<long long>(denominator_of(geom.lower()[ku])));
    l = std::lcm(l, static_cast<long long>(denominator_of(geom.upper()[ku])));
  }
  return static_cast<int>(l);
}

std::size_t EpsilonLattice::linear_index(const MultiIndex& k) const {
  std::size_t idx = 0;
  for (int a = dim - 1; a >= 0; --a) idx = idx * static_cast<std::size_t>(n) + static_cast<std::size_t>(k[static_cast<std::size_t>(a)]);
  return idx;
}

EpsilonLattice make_epsilon_lattice(int dim, int n) {
  check_dim(dim);
  if (n < 1) throw ValidationError("epsilon must be 1/n with integer n >= 1");
  EpsilonLattice lat;
  lat.dim = dim;
  lat.n = n;
  lat.epsilon = 1.0 / n;
  // Candidates k in [-1, n]^d; cell closure is [k, k+1]·ε per axis. Comparisons
  // are done in integer units of ε.
  const int side = n + 2;
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(side);
  for (std::size_t s = 0; s < total; ++s) {
    MultiIndex k{0, 0, 0};
    std::size_t rest = s;
    for (int a = 0; a < dim; ++a) {
      k[static_cast<std::size_t>(a)] = static_cast<int>(rest % side) - 1;
      rest /= static_cast<std::size_t>(side);
    }
    bool inner = true;
    bool covering = true;
    for (int a = 0; a < dim; ++a) {
      const int ka = k[static_cast<std::size_t>(a)];
      inner = inner && ka >= 0 && ka + 1 <= n;
      covering = covering && ka + 1 > 0 && ka < n;
    }
    if (inner) lat.inner_cells.push_back(k);
    if (covering) lat.covering_cells.push_back(k);
  }
  return lat;
}

StructuredGrid::StructuredGrid(int dim, std::vector<int> resolution, BoundaryCondition bc)
    : dim_(dim), resolution_(std::move(resolution)), bc_(bc) {
  check_dim(dim);
  if (static_cast<int>(resolution_.size()) != dim) throw ValidationError("resolution must have one entry per axis");
  for (int a = 0; a < dim; ++a) {
    if (this->resolution(a) < 1) throw ValidationError("grid resolution must be positive");
    num_cells_ *= static_cast<std::size_t>(this->resolution(a));
    num_nodes_ *= static_cast<std::size_t>(nodes_per_axis(a));
  }
}

double StructuredGrid::cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < dim_; ++a) v *= spacing(a);
  return v;
}

int StructuredGrid::nodes_per_axis(int axis) const {
  return periodic() ? resolution(axis) : resolution(axis) + 1;
}

MultiIndex StructuredGrid::cell_multi_index(std::size_t cell) const {
  MultiIndex idx{0, 0, 0};
  for (int a = 0; a < dim_; ++a) {
    const auto r = static_cast<std::size_t>(resolution(a));
    idx[static_cast<std::size_t>(a)] = static_cast<int>(cell % r);
    cell /= r;
  }
  return idx;
}

std::size_t StructuredGrid::cell_index(const MultiIndex& idx) const {
  std::size_t c = 0;
  for (int a = dim_ - 1; a >= 0; --a) c = c * static_cast<std::size_t>(resolution(a)) + static_cast<std::size_t>(idx[static_cast<std::size_t>(a)]);
  return c;
}

MultiIndex StructuredGrid::node_multi_index(std::size_t node) const {
  MultiIndex idx{0, 0, 0};
  for (int a = 0; a < dim_; ++a) {
    const auto r = static_cast<std::size_t>(nodes_per_axis(a));
    idx[static_cast<std::size_t>(a)] = static_cast<int>(node % r);
    node /= r;
  }
  return idx;
}

std::size_t StructuredGrid::node_index(MultiIndex idx) const {
  std::size_t n = 0;
  for (int a = dim_ - 1; a >= 0; --a) {
    const int r = nodes_per_axis(a);
    int i = idx[static_cast<std::size_t>(a)];
    if (periodic()) i = ((i % r) + r) % r;
    n = n * static_cast<std::size_t>(r) + static_cast<std::size_t>(i);
  }
  return n;
}

std::array<std::size_t, 1 << kMaxDim> StructuredGrid::cell_nodes(std::size_t cell) const {
  std::array<std::size_t, 1 << kMaxDim> out{};
  const MultiIndex base = cell_multi_index(cell);
  for (int j = 0; j < nodes_per_cell(); ++j) {
    MultiIndex idx = base;
    for (int a = 0; a < dim_; ++a) idx[static_cast<std::size_t>(a)] += (j >> a) & 1;
    out[static_cast<std::size_t>(j)] = node_index(idx);
  }
  return out;
}

Point StructuredGrid::node_coordinates(std::size_t node) const {
  const MultiIndex idx = node_multi_index(node);
  Point p{0.0, 0.0, 0.0};
  for (int a = 0; a < dim_; ++a) p[static_cast<std::size_t>(a)] = idx[static_cast<std::size_t>(a)] * spacing(a);
  return p;
}

Point StructuredGrid::cell_barycenter(std::size_t cell) const {
  const MultiIndex idx = cell_multi_index(cell);
  Point p{0.0, 0.0, 0.0};
  for (int a = 0; a < dim_; ++a) p[static_cast<std::size_t>(a)] = (idx[static_cast<std::size_t>(a)] + 0.5) * spacing(a);
  return p;
}

bool StructuredGrid::is_boundary_node(std::size_t node) const {
  if (periodic()) return false;
  const MultiIndex idx = node_multi_index(node);
  for (int a = 0; a < dim_; ++a) {
    const int i = idx[static_cast<std::size_t>(a)];
    if (i == 0 || i == resolution(a)) return true;
  }
  return false;
}

void StructuredGrid::set_tags(std::vector<Region> tags) {
  if (tags.size() != num_cells_) throw ValidationError("tag array does not match cell count");
  tags_ = std::move(tags);
}

double StructuredGrid::region_volume(Region r) const {
  if (!tagged()) throw ValidationError("grid carries no region tags");
  std::size_t count = 0;
  for (Region t : tags_) count += (t == r) ? 1 : 0;
  return static_cast<double>(count) * cell_volume();
}

void StructuredGrid::set_lattice(int n, int subcells) {
  for (int a = 0; a < dim_; ++a) {
    if (resolution(a) != n * subcells) throw ValidationError("grid resolution is not n·M on every axis");
  }
  lattice_n_ = n;
  subcells_ = subcells;
}

std::size_t StructuredGrid::epsilon_cell_of(std::size_t cell) const {
  const MultiIndex idx = cell_multi_index(cell);
  std::size_t e = 0;
  for (int a = dim_ - 1; a >= 0; --a) e = e * static_cast<std::size_t>(lattice_n_) + static_cast<std::size_t>(idx[static_cast<std::size_t>(a)] / subcells_);
  return e;
}

MultiIndex StructuredGrid::local_cell(std::size_t cell) const {
  MultiIndex idx = cell_multi_index(cell);
  for (int a = 0; a < dim_; ++a) idx[static_cast<std::size_t>(a)] %= subcells_;
  return idx;
}

Point StructuredGrid::local_barycenter(std::size_t cell) const {
  const MultiIndex idx = local_cell(cell);
  Point p{0.0, 0.0, 0.0};
  for (int a = 0; a < dim_; ++a) p[static_cast<std::size_t>(a)] = (idx[static_cast<std::size_t>(a)] + 0.5) / subcells_;
  return p;
}

StructuredGrid build_unit_cell_grid(const PeriodicGeometry& geom, int resolution) {
  if (!resolution_compatible(geom, resolution)) {
    throw IncompatibleResolution(resolution, smallest_compatible_resolution(geom));
  }
  StructuredGrid grid(geom.dim(), std::vector<int>(static_cast<std::size_t>(geom.dim()), resolution),
                      BoundaryCondition::periodic);
  std::vector<Region> tags(grid.num_cells());
  for (std::size_t c = 0; c < grid.num_cells(); ++c) {
    const Point y = grid.cell_barycenter(c);
    tags[c] = geom.contains(std::span<const double>(y.data(), static_cast<std::size_t>(geom.dim()))) ? Region::inclusion
                                                                                                  : Region::matrix;
  }
  grid.set_tags(std::move(tags));
  return grid;
}

EpsilonDomain build_epsilon_domain(const PeriodicGeometry& geom, int n, int subcells) {
  if (n < 1) throw ValidationError("epsilon must be 1/n with integer n >= 1");
  if (!resolution_compatible(geom, subcells)) {
    throw IncompatibleResolution(subcells, smallest_compatible_resolution(geom));
  }
  EpsilonLattice lattice = make_epsilon_lattice(geom.dim(), n);
  StructuredGrid grid(geom.dim(), std::vector<int>(static_cast<std::size_t>(geom.dim()), n * subcells),
                      BoundaryCondition::dirichlet);
  grid.set_lattice(n, subcells);
  std::vector<Region> tags(grid.num_cells());
  for (std::size_t c = 0; c < grid.num_cells(); ++c) {
    const Point y = grid.local_barycenter(c);
    tags[c] = geom.contains(std::span<const double>(y.data(), static_cast<std::size_t>(geom.dim()))) ? Region::inclusion
                                                                                                  : Region::matrix;
  }
  grid.set_tags(std::move(tags));
  return {std::move(lattice), std::move(grid)};
}

}  // namespace homoglab
